//! Small fixed-size vector helpers for sphere-valued samples.

/// A point or tangent vector in R^3.
pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// a + s * b
#[inline]
pub fn add_scaled(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// Apply a 3x3 matrix (row-major) to a vector.
#[inline]
pub fn mat_apply(r: &[[f64; 3]; 3], a: Vec3) -> Vec3 {
    [dot(r[0], a), dot(r[1], a), dot(r[2], a)]
}

/// Frobenius norm of R^T R - I, used to validate rotation matrices.
pub fn orthogonality_defect(r: &[[f64; 3]; 3]) -> f64 {
    let mut defect = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut e = if i == j { -1.0 } else { 0.0 };
            for k in 0..3 {
                e += r[k][i] * r[k][j];
            }
            defect += e * e;
        }
    }
    defect.sqrt()
}

pub fn determinant(r: &[[f64; 3]; 3]) -> f64 {
    dot(r[0], cross(r[1], r[2]))
}
