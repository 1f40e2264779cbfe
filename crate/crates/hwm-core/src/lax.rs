//! The commutator operator `L_u = [H, U]`, its companion `B_u`, and the
//! integrability diagnostics built on them: Schatten norms, numerical
//! Kronecker rank, and the Lax-equation residual along trajectories.
//!
//! Two finite-dimensional representations are provided.
//!
//! * `window_kernel` — Nystroem discretization of the integral kernel
//!   `K(x,y) = (1/pi) (U(x) - U(y))/(x - y)` on a window grid, with the
//!   derivative limit `(1/pi) U'(x)` on the diagonal. Hermitian by
//!   construction, exactly, in floating point.
//! * `torus_fourier` — matrix elements in the Fourier basis,
//!   `L_{nm} = -i (sgn n - sgn m) Uhat_{n-m}` for `|n|, |m| <= N`. Works on
//!   either grid kind, since a window is treated as a large torus.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::evolve::Trajectory;
use crate::grid::{self, Grid1D, GridError, GridKind, SphereField, Symbol};
use crate::lapack;
use crate::vec3::Vec3;

/// Default relative singular-value threshold for the numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Hermiticity defect below which singular values are taken as absolute
/// eigenvalues of the Hermitian eigensolve instead of a full SVD.
const HERMITIAN_PATH_TOL: f64 = 1e-10;

/// Window matrices above this node count would need multiple GiB; the
/// streamed Hilbert-Schmidt sum covers those sizes instead.
const MAX_WINDOW_NODES: usize = 4096;

#[derive(Debug, Error)]
pub enum LaxError {
    #[error("the kernel backend needs a window grid (use the Fourier backend on a torus)")]
    KernelNeedsWindow,
    #[error("mode cut {mode_cut} exceeds n/2 = {limit}: coefficients unresolved")]
    ModeCutTooLarge { mode_cut: usize, limit: usize },
    #[error("window matrix with n = {n} nodes exceeds the dense limit {MAX_WINDOW_NODES}")]
    WindowTooLarge { n: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("Schatten exponent must be positive and finite, got {p}")]
    BadExponent { p: f64 },
    #[error("need at least 3 usable snapshots for a finite-difference residual, got {got}")]
    TooFewSnapshots { got: usize },
    #[error("trajectory snapshots are not uniformly spaced")]
    NonUniformSpacing,
    #[error("dt_fd = {dt_fd} is not a multiple of the snapshot spacing {spacing}")]
    IncommensurateStride { dt_fd: f64, spacing: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("dense solver: {0}")]
    Lapack(#[from] lapack::LapackError),
}

// 2x2 complex blocks, row-major [a, b; c, d].
type Block = [Complex64; 4];

const ZERO_BLOCK: Block = [
    Complex64::new(0.0, 0.0),
    Complex64::new(0.0, 0.0),
    Complex64::new(0.0, 0.0),
    Complex64::new(0.0, 0.0),
];

fn pauli_of(v: Vec3) -> Block {
    [
        Complex64::new(v[2], 0.0),
        Complex64::new(v[0], -v[1]),
        Complex64::new(v[0], v[1]),
        Complex64::new(-v[2], 0.0),
    ]
}

fn pauli_of_coeff(c: [Complex64; 3]) -> Block {
    [
        c[2],
        c[0] - Complex64::i() * c[1],
        c[0] + Complex64::i() * c[1],
        -c[2],
    ]
}

fn block_mul(a: &Block, b: &Block) -> Block {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// The field of Pauli matrices `U(x) = u(x) . sigma`.
#[derive(Debug, Clone)]
pub struct PauliField {
    pub grid: Grid1D,
    matrices: Vec<Block>,
}

impl PauliField {
    pub fn matrices(&self) -> &[Block] {
        &self.matrices
    }

    /// Worst deviation of `U^2` from the identity over the nodes.
    pub fn involution_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| {
                let sq = block_mul(m, m);
                let mut worst = 0.0_f64;
                for (idx, entry) in sq.iter().enumerate() {
                    let target = if idx == 0 || idx == 3 { 1.0 } else { 0.0 };
                    worst = worst.max((entry - target).norm());
                }
                worst
            })
            .fold(0.0, f64::max)
    }
}

/// `u . sigma`: Hermitian, traceless, squares to the identity.
pub fn pauli_field(u: &SphereField) -> PauliField {
    PauliField {
        grid: u.grid.clone(),
        matrices: u.values().iter().map(|&v| pauli_of(v)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LaxBackend {
    WindowKernel,
    TorusFourier,
}

/// Dense representation of `L_u` with its assembly metadata.
#[derive(Debug, Clone)]
pub struct LaxMatrix {
    pub backend: LaxBackend,
    pub mat: Array2<Complex64>,
    /// Fourier backend only: modes run over `[-mode_cut, mode_cut]`.
    pub mode_cut: Option<usize>,
}

impl LaxMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Max entry-wise deviation from Hermitian symmetry.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.mat)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn hermiticity_defect(mat: &Array2<Complex64>) -> f64 {
    let n = mat.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn skewness_defect(mat: &Array2<Complex64>) -> f64 {
    let n = mat.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((mat[(i, j)] + mat[(j, i)].conj()).norm());
        }
    }
    worst
}

fn write_block(mat: &mut Array2<Complex64>, j: usize, k: usize, b: &Block) {
    mat[(2 * j, 2 * k)] = b[0];
    mat[(2 * j, 2 * k + 1)] = b[1];
    mat[(2 * j + 1, 2 * k)] = b[2];
    mat[(2 * j + 1, 2 * k + 1)] = b[3];
}

/// Nystroem matrix of the commutator kernel on a window grid.
pub fn lax_l_window(u: &SphereField) -> Result<LaxMatrix, LaxError> {
    let g = &u.grid;
    if g.kind != GridKind::Window {
        return Err(LaxError::KernelNeedsWindow);
    }
    if g.n > MAX_WINDOW_NODES {
        return Err(LaxError::WindowTooLarge { n: g.n });
    }
    let n = g.n;
    let scale = g.dx / std::f64::consts::PI;
    let pauli = pauli_field(u);
    let du = u.to_vector_field().apply_multiplier(Symbol::Derivative);
    let mut mat = Array2::from_elem((2 * n, 2 * n), Complex64::new(0.0, 0.0));
    for j in 0..n {
        let uj = &pauli.matrices()[j];
        for k in 0..n {
            let block = if j == k {
                let mut d = pauli_of(du.values[j]);
                for e in d.iter_mut() {
                    *e *= scale;
                }
                d
            } else {
                let uk = &pauli.matrices()[k];
                let inv = scale / (g.nodes[j] - g.nodes[k]);
                [
                    (uj[0] - uk[0]) * inv,
                    (uj[1] - uk[1]) * inv,
                    (uj[2] - uk[2]) * inv,
                    (uj[3] - uk[3]) * inv,
                ]
            };
            write_block(&mut mat, j, k, &block);
        }
    }
    Ok(LaxMatrix {
        backend: LaxBackend::WindowKernel,
        mat,
        mode_cut: None,
    })
}

/// Matrix Fourier coefficients `Uhat_k` of the Pauli field for integer
/// offsets `|k| <= max_offset`; offsets at or beyond the Nyquist bin are
/// zero. Indexed by `k + max_offset`.
fn pauli_coefficients(u: &SphereField, max_offset: usize) -> Vec<Block> {
    let g = &u.grid;
    let n = g.n;
    let comp_coeffs: Vec<Vec<Complex64>> = (0..3)
        .map(|c| {
            let comp: Vec<f64> = u.values().iter().map(|v| v[c]).collect();
            grid::fourier_coefficients(g, &comp)
        })
        .collect();
    (0..=2 * max_offset)
        .map(|i| {
            let d = i as isize - max_offset as isize;
            if d.unsigned_abs() >= n / 2 {
                return ZERO_BLOCK;
            }
            let bin = d.rem_euclid(n as isize) as usize;
            pauli_of_coeff([
                comp_coeffs[0][bin],
                comp_coeffs[1][bin],
                comp_coeffs[2][bin],
            ])
        })
        .collect()
}

/// `L_{nm} = -i (sgn n - sgn m) Uhat_{n-m}` over modes `|n|, |m| <= N`.
/// Windows are treated as large tori, so either grid kind is accepted.
pub fn lax_l_fourier(u: &SphereField, mode_cut: usize) -> Result<LaxMatrix, LaxError> {
    let g = &u.grid;
    if mode_cut > g.n / 2 {
        return Err(LaxError::ModeCutTooLarge {
            mode_cut,
            limit: g.n / 2,
        });
    }
    let nn = mode_cut as isize;
    let coeffs = pauli_coefficients(u, 2 * mode_cut);
    let modes = 2 * mode_cut + 1;
    let mut mat = Array2::from_elem((2 * modes, 2 * modes), Complex64::new(0.0, 0.0));
    for (row, n_idx) in (-nn..=nn).enumerate() {
        for (col, m_idx) in (-nn..=nn).enumerate() {
            let sgn_diff = n_idx.signum() - m_idx.signum();
            if sgn_diff == 0 {
                continue;
            }
            let offset = (n_idx - m_idx + 2 * nn) as usize;
            let factor = Complex64::new(0.0, -(sgn_diff as f64));
            let c = &coeffs[offset];
            let block = [factor * c[0], factor * c[1], factor * c[2], factor * c[3]];
            write_block(&mut mat, row, col, &block);
        }
    }
    Ok(LaxMatrix {
        backend: LaxBackend::TorusFourier,
        mat,
        mode_cut: Some(mode_cut),
    })
}

/// `B_u = -(i/2)(U |D| + |D| U) + (i/2) |D|U` in the node basis of a window
/// grid. Exactly skew-Hermitian by construction.
pub fn lax_b_window(u: &SphereField) -> Result<Array2<Complex64>, LaxError> {
    let g = &u.grid;
    if g.kind != GridKind::Window {
        return Err(LaxError::KernelNeedsWindow);
    }
    if g.n > MAX_WINDOW_NODES {
        return Err(LaxError::WindowTooLarge { n: g.n });
    }
    let n = g.n;
    let d = grid::dense_multiplier_matrix(g, Symbol::Halfwave);
    let pauli = pauli_field(u);
    let w = u.to_vector_field().apply_multiplier(Symbol::Halfwave);
    let half_i = Complex64::new(0.0, 0.5);
    let mut mat = Array2::from_elem((2 * n, 2 * n), Complex64::new(0.0, 0.0));
    for j in 0..n {
        let uj = &pauli.matrices()[j];
        for k in 0..n {
            let uk = &pauli.matrices()[k];
            let mut block = ZERO_BLOCK;
            let djk = d[(j, k)];
            for e in 0..4 {
                block[e] = -half_i * djk * (uj[e] + uk[e]);
            }
            if j == k {
                let wj = pauli_of(w.values[j]);
                for e in 0..4 {
                    block[e] += half_i * wj[e];
                }
            }
            write_block(&mut mat, j, k, &block);
        }
    }
    Ok(mat)
}

/// `B_{nm} = -(i/2)(|k_n| + |k_m| - |k_n - k_m|) Uhat_{n-m}` in the Fourier
/// basis, with physical wavenumbers.
pub fn lax_b_fourier(u: &SphereField, mode_cut: usize) -> Result<Array2<Complex64>, LaxError> {
    let g = &u.grid;
    if mode_cut > g.n / 2 {
        return Err(LaxError::ModeCutTooLarge {
            mode_cut,
            limit: g.n / 2,
        });
    }
    let nn = mode_cut as isize;
    let scale = std::f64::consts::PI / g.half_width;
    let coeffs = pauli_coefficients(u, 2 * mode_cut);
    let modes = 2 * mode_cut + 1;
    let mut mat = Array2::from_elem((2 * modes, 2 * modes), Complex64::new(0.0, 0.0));
    for (row, n_idx) in (-nn..=nn).enumerate() {
        for (col, m_idx) in (-nn..=nn).enumerate() {
            let weight =
                scale * ((n_idx.abs() + m_idx.abs() - (n_idx - m_idx).abs()) as f64);
            if weight == 0.0 {
                continue;
            }
            let offset = (n_idx - m_idx + 2 * nn) as usize;
            let factor = Complex64::new(0.0, -0.5 * weight);
            let c = &coeffs[offset];
            let block = [factor * c[0], factor * c[1], factor * c[2], factor * c[3]];
            write_block(&mut mat, row, col, &block);
        }
    }
    Ok(mat)
}

/// `Tr |L_u|^2` of the window-kernel discretization, summed directly from
/// the kernel without materializing the matrix:
/// `(2/pi^2) sum_{j,k} |u(x_j) - u(x_k)|^2 / (x_j - x_k)^2 dx^2`.
pub fn hilbert_schmidt_sq_window(u: &SphereField) -> Result<f64, LaxError> {
    let g = &u.grid;
    if g.kind != GridKind::Window {
        return Err(LaxError::KernelNeedsWindow);
    }
    let n = g.n;
    let vals = u.values();
    let nodes = &g.nodes;
    let du = u.to_vector_field().apply_multiplier(Symbol::Derivative);
    let weight = 2.0 * g.dx * g.dx / (std::f64::consts::PI * std::f64::consts::PI);
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = 0.0;
            let uj = vals[j];
            let xj = nodes[j];
            for k in 0..n {
                if k == j {
                    let d = du.values[j];
                    acc += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                } else {
                    let dx = xj - nodes[k];
                    let d0 = uj[0] - vals[k][0];
                    let d1 = uj[1] - vals[k][1];
                    let d2 = uj[2] - vals[k][2];
                    acc += (d0 * d0 + d1 * d1 + d2 * d2) / (dx * dx);
                }
            }
            acc
        })
        .sum();
    Ok(total * weight)
}

/// Singular values (descending) of a dense matrix; Hermitian inputs go
/// through the symmetric eigensolve, others through the SVD.
pub fn singular_spectrum(mat: &Array2<Complex64>) -> Result<Vec<f64>, LaxError> {
    if mat.iter().any(|z| !z.is_finite()) {
        return Err(LaxError::NonFinite);
    }
    let sigma = if hermiticity_defect(mat) <= HERMITIAN_PATH_TOL {
        let mut s: Vec<f64> = lapack::herm_eigvals(mat)?.iter().map(|v| v.abs()).collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    } else {
        lapack::singular_values(mat)?
    };
    Ok(sigma)
}

#[derive(Debug, Clone, Serialize)]
pub struct SchattenNorm {
    pub p: f64,
    pub norm: f64,
    /// `p < 1` only gives a quasi-norm.
    pub quasi: bool,
}

/// Singular values plus the requested Schatten norms and the numerical rank
/// at the default threshold.
#[derive(Debug, Clone, Serialize)]
pub struct SchattenReport {
    pub sigma: Vec<f64>,
    pub norms: Vec<SchattenNorm>,
    pub rank: usize,
    pub threshold: f64,
}

/// `(sum_i sigma_i^p)^(1/p)` for each requested exponent.
pub fn schatten(lmat: &LaxMatrix, p_list: &[f64]) -> Result<SchattenReport, LaxError> {
    for &p in p_list {
        if !(p > 0.0) || !p.is_finite() {
            return Err(LaxError::BadExponent { p });
        }
    }
    let sigma = singular_spectrum(&lmat.mat)?;
    let norms = p_list
        .iter()
        .map(|&p| SchattenNorm {
            p,
            norm: sigma.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p),
            quasi: p < 1.0,
        })
        .collect();
    let (rank, threshold, _) = rank_from_sigma(&sigma, DEFAULT_RANK_TOL);
    Ok(SchattenReport {
        sigma,
        norms,
        rank,
        threshold,
    })
}

fn rank_from_sigma(sigma: &[f64], tau_rel: f64) -> (usize, f64, Option<f64>) {
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let threshold = tau_rel * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    let gap = if rank > 0 && rank < sigma.len() && sigma[rank] > 0.0 {
        Some(sigma[rank - 1] / sigma[rank])
    } else {
        None
    };
    (rank, threshold, gap)
}

/// Numerical Kronecker rank: singular values above `tau_rel * sigma_1`,
/// with the full spectrum attached so the gap is auditable.
#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub sigma: Vec<f64>,
    pub tau_rel: f64,
    pub threshold: f64,
    /// `sigma_rank / sigma_{rank+1}` when both sides exist.
    pub gap: Option<f64>,
    /// Set when `sigma_1 = 0` (the zero matrix).
    pub zero_matrix: bool,
}

pub fn numerical_rank(lmat: &LaxMatrix, tau_rel: f64) -> Result<RankReport, LaxError> {
    let sigma = singular_spectrum(&lmat.mat)?;
    let (rank, threshold, gap) = rank_from_sigma(&sigma, tau_rel);
    let zero_matrix = sigma.first().copied().unwrap_or(0.0) == 0.0;
    Ok(RankReport {
        rank: if zero_matrix { 0 } else { rank },
        sigma,
        tau_rel,
        threshold,
        gap,
        zero_matrix,
    })
}

/// How to assemble `L` and `B` for residual evaluation.
#[derive(Debug, Clone, Copy)]
pub enum LaxAssembly {
    WindowKernel,
    TorusFourier { mode_cut: usize },
}

impl LaxAssembly {
    pub fn l_matrix(&self, u: &SphereField) -> Result<LaxMatrix, LaxError> {
        match *self {
            LaxAssembly::WindowKernel => lax_l_window(u),
            LaxAssembly::TorusFourier { mode_cut } => lax_l_fourier(u, mode_cut),
        }
    }

    pub fn b_matrix(&self, u: &SphereField) -> Result<Array2<Complex64>, LaxError> {
        match *self {
            LaxAssembly::WindowKernel => lax_b_window(u),
            LaxAssembly::TorusFourier { mode_cut } => lax_b_fourier(u, mode_cut),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LaxResidualPoint {
    pub time: f64,
    pub residual: f64,
}

/// Relative Lax residual `|| dL/dt - [B, L] ||_F / ||L||_F` with `dL/dt` by
/// central difference at stride `dt_fd`, evaluated at up to
/// `max_evaluations` interior snapshots (evenly strided). The trajectory
/// must be uniformly spaced and `dt_fd` a multiple of that spacing.
pub fn lax_residual_series(
    traj: &Trajectory,
    assembly: LaxAssembly,
    dt_fd: f64,
    max_evaluations: usize,
) -> Result<Vec<LaxResidualPoint>, LaxError> {
    if traj.len() < 3 {
        return Err(LaxError::TooFewSnapshots { got: traj.len() });
    }
    let spacing = traj
        .snapshot_spacing()
        .ok_or(LaxError::NonUniformSpacing)?;
    let stride_f = dt_fd / spacing;
    let stride = stride_f.round() as usize;
    if stride == 0 || (stride_f - stride as f64).abs() > 1e-6 {
        return Err(LaxError::IncommensurateStride { dt_fd, spacing });
    }
    let len = traj.len();
    if len < 2 * stride + 1 {
        return Err(LaxError::TooFewSnapshots { got: len });
    }
    let eligible: Vec<usize> = (stride..len - stride).collect();
    let take = max_evaluations.max(1).min(eligible.len());
    let pick = (eligible.len() as f64 / take as f64).ceil() as usize;
    let mut points = Vec::new();
    for &i in eligible.iter().step_by(pick.max(1)) {
        let l_minus = assembly.l_matrix(&traj.snapshots[i - stride])?;
        let l_mid = assembly.l_matrix(&traj.snapshots[i])?;
        let l_plus = assembly.l_matrix(&traj.snapshots[i + stride])?;
        let b_mid = assembly.b_matrix(&traj.snapshots[i])?;

        let inv_two_h = 1.0 / (2.0 * stride as f64 * spacing);
        let bl = lapack::matmul(&b_mid, &l_mid.mat);
        let lb = lapack::matmul(&l_mid.mat, &b_mid);

        let plus = l_plus.mat.as_slice().expect("contiguous");
        let minus = l_minus.mat.as_slice().expect("contiguous");
        let bl_s = bl.as_slice().expect("contiguous");
        let lb_s = lb.as_slice().expect("contiguous");
        let mut num = 0.0_f64;
        let mut den = 0.0_f64;
        for (idx, center) in l_mid.mat.iter().enumerate() {
            let ldot = (plus[idx] - minus[idx]) * inv_two_h;
            let comm = bl_s[idx] - lb_s[idx];
            num += (ldot - comm).norm_sqr();
            den += center.norm_sqr();
        }
        let residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
        points.push(LaxResidualPoint {
            time: traj.times[i],
            residual,
        });
    }
    Ok(points)
}

/// Worst-case residual over [`lax_residual_series`].
pub fn lax_residual(
    traj: &Trajectory,
    assembly: LaxAssembly,
    dt_fd: f64,
) -> Result<f64, LaxError> {
    let series = lax_residual_series(traj, assembly, dt_fd, 16)?;
    Ok(series.iter().map(|p| p.residual).fold(0.0, f64::max))
}
