//! Discretization descriptors and exact Fourier-multiplier calculus.
//!
//! Two geometries share one FFT code path:
//!
//! * `Torus` — the circle of circumference `2*pi`, integer wavenumbers;
//! * `Window` — a symmetric interval `[-L, L)` treated as a large torus with
//!   wavenumbers `pi*q/L`, used as a domain-truncation approximation of the
//!   real line. Truncation error is controlled by convergence studies in `L`.
//!
//! Discrete Fourier convention (all multiplier tables derive from it):
//! forward transform `F_k = sum_j f_j exp(-i k x_j)` is unnormalized, the
//! inverse carries the `1/n` factor. Wavenumber bins are stored in FFT order
//! `0, 1, ..., n/2-1, -n/2, ..., -1` (scaled by `pi/L` on a window).
//!
//! Both odd symbols (`Hilbert`, `Derivative`) annihilate the unpaired
//! Nyquist bin so that real input maps to real output; `sgn(0) = 0`, so the
//! mean is annihilated as well and `|D|` stays symmetric positive
//! semidefinite.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::vec3::{self, Vec3};

/// Tolerance on `| |u|^2 - 1 |` for sphere-valued samples.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("sample count {0} is not a power of two >= 8")]
    BadSampleCount(usize),
    #[error("window grid requires a positive half-width, got {0:?}")]
    BadHalfWidth(Option<f64>),
    #[error("half-width only applies to window grids")]
    UnexpectedHalfWidth,
    #[error("field has {got} samples but the grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("node {node}: | |u|^2 - 1 | = {defect:.3e} exceeds {NORM_TOL:.1e}")]
    NotUnitNorm { node: usize, defect: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("operation requires a {expected:?} grid")]
    WrongKind { expected: GridKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GridKind {
    Torus,
    Window,
}

/// One-dimensional equispaced grid with its spectral metadata.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub kind: GridKind,
    /// Sample count, a power of two.
    pub n: usize,
    /// Half the circumference: `pi` on the torus, `L` on a window.
    pub half_width: f64,
    /// Equispaced nodes: `2*pi*j/n` on the torus, `-L + j*dx` on a window.
    pub nodes: Vec<f64>,
    /// Physical wavenumbers in FFT bin order.
    pub wavenumbers: Vec<f64>,
    /// Quadrature weight, `dx * n = 2 * half_width`.
    pub dx: f64,
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid1D {
    pub fn torus(n: usize) -> Result<Self, GridError> {
        Self::build(GridKind::Torus, n, PI)
    }

    pub fn window(n: usize, half_width: f64) -> Result<Self, GridError> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadHalfWidth(Some(half_width)));
        }
        Self::build(GridKind::Window, n, half_width)
    }

    fn build(kind: GridKind, n: usize, half_width: f64) -> Result<Self, GridError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(GridError::BadSampleCount(n));
        }
        let dx = 2.0 * half_width / n as f64;
        let origin = match kind {
            GridKind::Torus => 0.0,
            GridKind::Window => -half_width,
        };
        let nodes: Vec<f64> = (0..n).map(|j| origin + j as f64 * dx).collect();
        let scale = PI / half_width; // = 1 on the torus
        let wavenumbers: Vec<f64> = (0..n)
            .map(|q| {
                let k = if q < n / 2 {
                    q as isize
                } else {
                    q as isize - n as isize
                };
                k as f64 * scale
            })
            .collect();
        Ok(Grid1D {
            kind,
            n,
            half_width,
            nodes,
            wavenumbers,
            dx,
        })
    }

    pub fn circumference(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Largest resolved wavenumber magnitude (`n/2 * pi / half_width`).
    pub fn k_max(&self) -> f64 {
        (self.n / 2) as f64 * PI / self.half_width
    }

    pub fn require_kind(&self, expected: GridKind) -> Result<(), GridError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(GridError::WrongKind { expected })
        }
    }
}

/// Build a grid from its descriptor parts. `half_width` is required iff
/// `kind == Window`.
pub fn make_grid(kind: GridKind, n: usize, half_width: Option<f64>) -> Result<Grid1D, GridError> {
    match (kind, half_width) {
        (GridKind::Torus, None) => Grid1D::torus(n),
        (GridKind::Torus, Some(_)) => Err(GridError::UnexpectedHalfWidth),
        (GridKind::Window, Some(l)) => Grid1D::window(n, l),
        (GridKind::Window, None) => Err(GridError::BadHalfWidth(None)),
    }
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Real scalar samples on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

/// R^3-valued samples on a grid; no norm constraint.
#[derive(Debug, Clone)]
pub struct VectorField3 {
    pub grid: Grid1D,
    pub values: Vec<Vec3>,
}

/// Sphere-valued samples: `| u(x_j) |^2 = 1` within [`NORM_TOL`] at every
/// node, validated on construction.
#[derive(Debug, Clone)]
pub struct SphereField {
    pub grid: Grid1D,
    values: Vec<Vec3>,
}

impl ScalarField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                expected: grid.n,
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        ScalarField { grid, values }
    }

    pub fn apply_multiplier(&self, symbol: Symbol) -> ScalarField {
        let values = apply_multiplier_slice(&self.grid, &self.values, symbol);
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }
}

impl VectorField3 {
    pub fn new(grid: Grid1D, values: Vec<Vec3>) -> Result<Self, GridError> {
        if values.len() != grid.n {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                expected: grid.n,
            });
        }
        Ok(VectorField3 { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Vec3) -> Self {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        VectorField3 { grid, values }
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn apply_multiplier(&self, symbol: Symbol) -> VectorField3 {
        let mut out = vec![[0.0; 3]; self.grid.n];
        for c in 0..3 {
            let comp: Vec<f64> = self.values.iter().map(|v| v[c]).collect();
            let res = apply_multiplier_slice(&self.grid, &comp, symbol);
            for (o, r) in out.iter_mut().zip(res) {
                o[c] = r;
            }
        }
        VectorField3 {
            grid: self.grid.clone(),
            values: out,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|&v| vec3::norm(v)).fold(0.0, f64::max)
    }
}

impl SphereField {
    pub fn new(grid: Grid1D, values: Vec<Vec3>) -> Result<Self, GridError> {
        if values.len() != grid.n {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                expected: grid.n,
            });
        }
        for (node, v) in values.iter().enumerate() {
            let defect = (vec3::dot(*v, *v) - 1.0).abs();
            if defect > NORM_TOL {
                return Err(GridError::NotUnitNorm { node, defect });
            }
        }
        Ok(SphereField { grid, values })
    }

    /// Constant field `u(x) = p`; `p` must be a unit vector.
    pub fn constant(grid: Grid1D, p: Vec3) -> Result<Self, GridError> {
        let n = grid.n;
        Self::new(grid, vec![p; n])
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn to_vector_field(&self) -> VectorField3 {
        VectorField3 {
            grid: self.grid.clone(),
            values: self.values.clone(),
        }
    }

    /// Largest `| |u|^2 - 1 |` over the nodes.
    pub fn norm_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (vec3::dot(v, v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Sup distance `max_j |u(x_j) - v(x_j)|`.
    pub fn sup_distance(&self, other: &SphereField) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| vec3::norm(vec3::sub(a, b)))
            .fold(0.0, f64::max))
    }
}

// ---------------------------------------------------------------------------
// Fourier multipliers
// ---------------------------------------------------------------------------

/// The three multiplier symbols used throughout: `|k|`, `-i*sgn(k)`, `i*k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    /// `|D|`: symbol `|k|`.
    Halfwave,
    /// Hilbert transform: symbol `-i*sgn(k)` with `sgn(0) = 0`.
    Hilbert,
    /// `d/dx`: symbol `i*k`.
    Derivative,
}

fn multiplier_table(grid: &Grid1D, symbol: Symbol) -> Vec<Complex64> {
    let n = grid.n;
    grid.wavenumbers
        .iter()
        .enumerate()
        .map(|(q, &k)| {
            let nyquist = q == n / 2;
            match symbol {
                Symbol::Halfwave => Complex64::new(k.abs(), 0.0),
                // Odd symbols zero the unpaired Nyquist bin.
                Symbol::Hilbert => {
                    if nyquist || k == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, -k.signum())
                    }
                }
                Symbol::Derivative => {
                    if nyquist {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, k)
                    }
                }
            }
        })
        .collect()
}

fn plan_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static PLANS: OnceLock<Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> =
        OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized forward DFT of real samples.
pub(crate) fn fft_forward(values: &[f64]) -> Vec<Complex64> {
    let (fwd, _) = plan_pair(values.len());
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    buf
}

/// Inverse DFT (with the `1/n` factor), real part.
pub(crate) fn fft_inverse_real(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    let (_, inv) = plan_pair(n);
    inv.process(&mut spectrum);
    let scale = 1.0 / n as f64;
    spectrum.iter().map(|c| c.re * scale).collect()
}

/// Normalized Fourier coefficients `c_k = F_k / n` of real samples, FFT bin
/// order.
pub fn fourier_coefficients(grid: &Grid1D, values: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(values.len(), grid.n);
    let scale = 1.0 / grid.n as f64;
    fft_forward(values).into_iter().map(|c| c * scale).collect()
}

fn apply_multiplier_slice(grid: &Grid1D, values: &[f64], symbol: Symbol) -> Vec<f64> {
    let table = multiplier_table(grid, symbol);
    let mut spectrum = fft_forward(values);
    for (s, t) in spectrum.iter_mut().zip(&table) {
        *s *= t;
    }
    fft_inverse_real(spectrum)
}

/// Dense matrix of a multiplier in the node basis (a circulant).
///
/// For the even `Halfwave` symbol the result is exactly symmetric; odd
/// symbols give exactly antisymmetric matrices. Entry `(j, l)` couples node
/// `j` to node `l`.
pub fn dense_multiplier_matrix(grid: &Grid1D, symbol: Symbol) -> Array2<f64> {
    let n = grid.n;
    let table = multiplier_table(grid, symbol);
    // First circulant column: inverse DFT of the multiplier table.
    let (_, inv) = plan_pair(n);
    let mut col: Vec<Complex64> = table;
    inv.process(&mut col);
    let scale = 1.0 / n as f64;
    let mut c: Vec<f64> = col.iter().map(|z| z.re * scale).collect();
    // Clean up rounding so the symmetry class is exact.
    match symbol {
        Symbol::Halfwave => {
            for r in 1..n / 2 {
                let avg = 0.5 * (c[r] + c[n - r]);
                c[r] = avg;
                c[n - r] = avg;
            }
        }
        Symbol::Hilbert | Symbol::Derivative => {
            c[0] = 0.0;
            c[n / 2] = 0.0;
            for r in 1..n / 2 {
                let avg = 0.5 * (c[r] - c[n - r]);
                c[r] = avg;
                c[n - r] = -avg;
            }
        }
    }
    Array2::from_shape_fn((n, n), |(j, l)| c[(j + n - l) % n])
}

/// Pointwise right-hand side `u x |D| u` of the half-wave maps equation.
///
/// The result is orthogonal to `u` at every node, exactly, by the algebra of
/// the cross product.
pub fn hwm_rhs(u: &SphereField) -> VectorField3 {
    let w = u.to_vector_field().apply_multiplier(Symbol::Halfwave);
    let values = u
        .values()
        .iter()
        .zip(&w.values)
        .map(|(&a, &b)| vec3::cross(a, b))
        .collect();
    VectorField3 {
        grid: u.grid.clone(),
        values,
    }
}

/// Same right-hand side for a not-necessarily-unit-norm field (used by the
/// midpoint stage, whose averaged field lies slightly inside the sphere).
pub(crate) fn hwm_rhs_raw(w: &VectorField3) -> VectorField3 {
    let dw = w.apply_multiplier(Symbol::Halfwave);
    let values = w
        .values
        .iter()
        .zip(&dw.values)
        .map(|(&a, &b)| vec3::cross(a, b))
        .collect();
    VectorField3 {
        grid: w.grid.clone(),
        values,
    }
}

/// Evaluate the trigonometric interpolant of `values` at arbitrary points
/// (given in grid coordinates). Exact for resolved trigonometric
/// polynomials; the unpaired Nyquist mode is evaluated as a cosine.
pub fn interpolate_scalar(grid: &Grid1D, values: &[f64], points: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let coeffs = fourier_coefficients(grid, values);
    let origin = grid.nodes[0];
    points
        .iter()
        .map(|&x| {
            let t = x - origin;
            let mut acc = coeffs[0].re;
            for q in 1..n / 2 {
                let k = grid.wavenumbers[q];
                let phase = Complex64::from_polar(1.0, k * t);
                // Pair +k with -k; real input makes them conjugate.
                acc += 2.0 * (coeffs[q] * phase).re;
            }
            let k_nyq = grid.wavenumbers[n / 2].abs();
            acc += coeffs[n / 2].re * (k_nyq * t).cos();
            acc
        })
        .collect()
}

/// Vector-valued trigonometric interpolation, component-wise.
pub fn interpolate_vec3(grid: &Grid1D, values: &[Vec3], points: &[f64]) -> Vec<Vec3> {
    let mut out = vec![[0.0; 3]; points.len()];
    for c in 0..3 {
        let comp: Vec<f64> = values.iter().map(|v| v[c]).collect();
        let res = interpolate_scalar(grid, &comp, points);
        for (o, r) in out.iter_mut().zip(res) {
            o[c] = r;
        }
    }
    out
}
