//! Thin bindings to the system LAPACK/BLAS drivers behind the dense
//! eigensolves, SVDs and matrix products.
//!
//! All matrices on the Rust side are square, row-major `ndarray` arrays.
//! LAPACK is column-major, so the buffer we hand over is the transpose of
//! the logical matrix. Every wrapper here is either transpose-invariant
//! (symmetric input, eigenvalues, singular values) or compensates
//! explicitly (`matmul` swaps the operands).

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("LAPACK {routine} failed with info = {info}")]
pub struct LapackError {
    routine: &'static str,
    info: i32,
}

extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn zgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut Complex64,
        vl: *mut Complex64,
        ldvl: *const i32,
        vr: *mut Complex64,
        ldvr: *const i32,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
    fn zgesdd_(
        jobz: *const u8,
        m: *const i32,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        s: *mut f64,
        u: *mut Complex64,
        ldu: *const i32,
        vt: *mut Complex64,
        ldvt: *const i32,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        iwork: *mut i32,
        info: *mut i32,
    );
    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

fn check(routine: &'static str, info: i32) -> Result<(), LapackError> {
    if info == 0 {
        Ok(())
    } else {
        Err(LapackError { routine, info })
    }
}

fn square_dim<T>(a: &Array2<T>) -> i32 {
    let (r, c) = a.dim();
    assert_eq!(r, c, "square matrix expected");
    i32::try_from(r).expect("matrix dimension exceeds i32")
}

/// Eigendecomposition of a real symmetric matrix (divide and conquer).
///
/// Eigenvalues ascending; when requested, row `i` of the returned array is
/// the eigenvector for eigenvalue `i`.
pub fn sym_eigh(
    a: &Array2<f64>,
    vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<f64>>), LapackError> {
    let n = square_dim(a);
    let nu = n as usize;
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let mut w = vec![0.0_f64; nu];
    let jobz = if vectors { b'V' } else { b'N' };
    let uplo = b'L';
    let mut info = 0_i32;

    // Workspace query.
    let mut work_q = [0.0_f64; 1];
    let mut iwork_q = [0_i32; 1];
    let m1 = -1_i32;
    unsafe {
        dsyevd_(
            &jobz, &uplo, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), work_q.as_mut_ptr(), &m1,
            iwork_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("dsyevd (query)", info)?;
    let lwork = work_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![0.0_f64; lwork as usize];
    let mut iwork = vec![0_i32; liwork as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    check("dsyevd", info)?;
    let vecs = if vectors {
        // Column-major columns land as rows of the row-major view.
        Some(Array2::from_shape_vec((nu, nu), buf).expect("shape"))
    } else {
        None
    };
    Ok((w, vecs))
}

/// Eigenvalues (ascending) of a complex Hermitian matrix.
pub fn herm_eigvals(a: &Array2<Complex64>) -> Result<Vec<f64>, LapackError> {
    let n = square_dim(a);
    let nu = n as usize;
    let mut buf: Vec<Complex64> = a.iter().copied().collect();
    let mut w = vec![0.0_f64; nu];
    let (jobz, uplo) = (b'N', b'L');
    let mut info = 0_i32;

    let mut work_q = [Complex64::new(0.0, 0.0); 1];
    let mut rwork_q = [0.0_f64; 1];
    let mut iwork_q = [0_i32; 1];
    let m1 = -1_i32;
    unsafe {
        zheevd_(
            &jobz, &uplo, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), work_q.as_mut_ptr(), &m1,
            rwork_q.as_mut_ptr(), &m1, iwork_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("zheevd (query)", info)?;
    let lwork = work_q[0].re as i32;
    let lrwork = rwork_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0_f64; lrwork as usize];
    let mut iwork = vec![0_i32; liwork as usize];
    unsafe {
        zheevd_(
            &jobz, &uplo, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    check("zheevd", info)?;
    Ok(w)
}

/// Singular values (descending) of a complex matrix.
pub fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>, LapackError> {
    let n = square_dim(a);
    let nu = n as usize;
    let mut buf: Vec<Complex64> = a.iter().copied().collect();
    let mut s = vec![0.0_f64; nu];
    let jobz = b'N';
    let mut info = 0_i32;
    let mut rwork = vec![0.0_f64; (7 * nu).max(1)];
    let mut iwork = vec![0_i32; 8 * nu.max(1)];
    let mut u = [Complex64::new(0.0, 0.0); 1];
    let mut vt = [Complex64::new(0.0, 0.0); 1];
    let one = 1_i32;

    let mut work_q = [Complex64::new(0.0, 0.0); 1];
    let m1 = -1_i32;
    unsafe {
        zgesdd_(
            &jobz, &n, &n, buf.as_mut_ptr(), &n, s.as_mut_ptr(), u.as_mut_ptr(), &one,
            vt.as_mut_ptr(), &one, work_q.as_mut_ptr(), &m1, rwork.as_mut_ptr(),
            iwork.as_mut_ptr(), &mut info,
        );
    }
    check("zgesdd (query)", info)?;
    let lwork = work_q[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    unsafe {
        zgesdd_(
            &jobz, &n, &n, buf.as_mut_ptr(), &n, s.as_mut_ptr(), u.as_mut_ptr(), &one,
            vt.as_mut_ptr(), &one, work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(),
            iwork.as_mut_ptr(), &mut info,
        );
    }
    check("zgesdd", info)?;
    Ok(s)
}

/// Eigenvalues of a general complex matrix (no eigenvectors).
pub fn general_eigvals(a: &Array2<Complex64>) -> Result<Vec<Complex64>, LapackError> {
    let n = square_dim(a);
    let nu = n as usize;
    let mut buf: Vec<Complex64> = a.iter().copied().collect();
    let mut w = vec![Complex64::new(0.0, 0.0); nu];
    let (jobvl, jobvr) = (b'N', b'N');
    let mut info = 0_i32;
    let mut rwork = vec![0.0_f64; 2 * nu.max(1)];
    let mut vdummy = [Complex64::new(0.0, 0.0); 1];
    let one = 1_i32;

    let mut work_q = [Complex64::new(0.0, 0.0); 1];
    let m1 = -1_i32;
    unsafe {
        zgeev_(
            &jobvl, &jobvr, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), vdummy.as_mut_ptr(), &one,
            vdummy.as_mut_ptr(), &one, work_q.as_mut_ptr(), &m1, rwork.as_mut_ptr(), &mut info,
        );
    }
    check("zgeev (query)", info)?;
    let lwork = work_q[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    unsafe {
        zgeev_(
            &jobvl, &jobvr, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), vdummy.as_mut_ptr(), &one,
            vdummy.as_mut_ptr(), &one, work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &mut info,
        );
    }
    check("zgeev", info)?;
    Ok(w)
}

/// `a * b` through BLAS. Row-major product computed by swapping operands in
/// the column-major call.
pub fn matmul(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let n = square_dim(a);
    assert_eq!(a.dim(), b.dim());
    let nu = n as usize;
    let av: Vec<Complex64> = a.iter().copied().collect();
    let bv: Vec<Complex64> = b.iter().copied().collect();
    let mut cv = vec![Complex64::new(0.0, 0.0); nu * nu];
    let (ta, tb) = (b'N', b'N');
    let alpha = Complex64::new(1.0, 0.0);
    let beta = Complex64::new(0.0, 0.0);
    unsafe {
        zgemm_(
            &ta, &tb, &n, &n, &n, &alpha, bv.as_ptr(), &n, av.as_ptr(), &n, &beta,
            cv.as_mut_ptr(), &n,
        );
    }
    Array2::from_shape_vec((nu, nu), cv).expect("shape")
}
