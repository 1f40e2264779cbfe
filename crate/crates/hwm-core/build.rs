/// Link the system LAPACK/BLAS (the Debian alternatives point these at
/// OpenBLAS when it is installed).
fn main() {
    println!("cargo:rustc-link-lib=dylib=lapack");
    println!("cargo:rustc-link-lib=dylib=blas");
}
