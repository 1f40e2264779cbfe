//! Closed-form solution factory.
//!
//! Traveling-wave profiles with `|v| < 1` are finite Blaschke products
//! composed with a target rotation,
//!
//! ```text
//!     Q_v(x) = R ( a Re B(x), -s a Im B(x), -s v ),    a = sqrt(1 - v^2),
//! ```
//!
//! with `B(z) = prod_k (z - z_k)/(z - conj z_k)` and chirality `s = +-1`
//! resolving the sign pair in the classification. The factory also provides
//! the stereographic transfer to the circle, infinite-energy circle waves,
//! the rotating rational half-circle, Moebius reparametrization of the
//! domain, and a seeded smooth perturbation generator.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{self, Grid1D, GridError, GridKind, SphereField, Symbol, VectorField3};
use crate::vec3::{self, Vec3};

pub type Rotation = [[f64; 3]; 3];

pub const IDENTITY_ROTATION: Rotation = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

const ROTATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("zero {index} = {z} must lie strictly in the upper half-plane")]
    ZeroNotInUpperHalfPlane { index: usize, z: Complex64 },
    #[error("rotation matrix defect {defect:.3e} (orthogonality or det != +1)")]
    BadRotation { defect: f64 },
    #[error("no nonconstant profile for |v| >= 1 (only constants solve the profile equation); got v = {v}")]
    NoTravelingProfile { v: f64 },
    #[error("circle wave requires m >= 1, got {m}")]
    BadCircleDegree { m: usize },
    #[error("Moebius map kind does not match the grid kind")]
    MapKindMismatch,
    #[error("Moebius line map must satisfy a*d - b*c = 1, defect {defect:.3e}")]
    BadLineMap { defect: f64 },
    #[error("disk point of a torus Moebius map must satisfy |a| < 1, got |a| = {modulus}")]
    BadDiskPoint { modulus: f64 },
    #[error(
        "{outside} mapped nodes leave the resolvable window (max |phi(x)| = {max_abs:.3e}, half-width {half_width})"
    )]
    UnresolvableImage {
        outside: usize,
        max_abs: f64,
        half_width: f64,
    },
    #[error("perturbation collapsed the field at node {node}")]
    DegeneratePerturbation { node: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    Plus,
    Minus,
}

impl Chirality {
    pub fn sign(self) -> f64 {
        match self {
            Chirality::Plus => 1.0,
            Chirality::Minus => -1.0,
        }
    }
}

/// Parameters of an exact traveling-wave profile: Blaschke zeros, velocity,
/// target rotation and the chirality sign.
#[derive(Debug, Clone)]
pub struct BlaschkeSpec {
    zeros: Vec<Complex64>,
    velocity: f64,
    rotation: Rotation,
    chirality: Chirality,
}

impl BlaschkeSpec {
    pub fn new(
        zeros: Vec<Complex64>,
        velocity: f64,
        rotation: Rotation,
        chirality: Chirality,
    ) -> Result<Self, ExactError> {
        for (index, &z) in zeros.iter().enumerate() {
            if !(z.im > 0.0) || !z.is_finite() {
                return Err(ExactError::ZeroNotInUpperHalfPlane { index, z });
            }
        }
        let defect =
            vec3::orthogonality_defect(&rotation).max((vec3::determinant(&rotation) - 1.0).abs());
        if defect > ROTATION_TOL {
            return Err(ExactError::BadRotation { defect });
        }
        Ok(BlaschkeSpec {
            zeros,
            velocity,
            rotation,
            chirality,
        })
    }

    /// Degree-`m` profile with all zeros at `i`, velocity `v`, identity
    /// rotation and positive chirality (the ground-state family for `m = 1`).
    pub fn pure(m: usize, velocity: f64) -> Self {
        BlaschkeSpec {
            zeros: vec![Complex64::new(0.0, 1.0); m],
            velocity,
            rotation: IDENTITY_ROTATION,
            chirality: Chirality::Plus,
        }
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn chirality(&self) -> Chirality {
        self.chirality
    }
}

/// Evaluate the Blaschke product at a point of the closed upper half-plane.
/// The empty product is 1; on the real line the value has modulus one.
pub fn blaschke_product(spec: &BlaschkeSpec, z: Complex64) -> Complex64 {
    spec.zeros
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &zk| {
            acc * (z - zk) / (z - zk.conj())
        })
}

/// Profile value from a Blaschke value.
fn profile_point(spec: &BlaschkeSpec, b: Complex64) -> Vec3 {
    let v = spec.velocity;
    let a = (1.0 - v * v).sqrt();
    let s = spec.chirality.sign();
    let q = [a * b.re, -s * a * b.im, -s * v];
    vec3::mat_apply(&spec.rotation, q)
}

/// Sample the traveling-wave profile on a grid. Window grids evaluate the
/// line formula directly; torus grids go through [`stereographic_pullback`].
pub fn blaschke_profile(spec: &BlaschkeSpec, grid: &Grid1D) -> Result<SphereField, ExactError> {
    if spec.velocity.abs() >= 1.0 {
        return Err(ExactError::NoTravelingProfile { v: spec.velocity });
    }
    match grid.kind {
        GridKind::Torus => stereographic_pullback(spec, grid),
        GridKind::Window => {
            let values = grid
                .nodes
                .iter()
                .map(|&x| profile_point(spec, blaschke_product(spec, Complex64::new(x, 0.0))))
                .collect();
            Ok(SphereField::new(grid.clone(), values)?)
        }
    }
}

/// Energy of the degree-`m` profile at velocity `v`: `(1 - v^2) * m * pi`.
pub fn soliton_energy_expected(m: usize, v: f64) -> f64 {
    (1.0 - v * v) * m as f64 * PI
}

/// Transfer the line profile to the circle through `x = tan(theta/2)`,
/// `theta` in `(-pi, pi]`; the `theta = pi` node takes the limit value with
/// `B(inf) = 1`.
pub fn stereographic_pullback(
    spec: &BlaschkeSpec,
    torus_grid: &Grid1D,
) -> Result<SphereField, ExactError> {
    torus_grid.require_kind(GridKind::Torus)?;
    if spec.velocity.abs() >= 1.0 {
        return Err(ExactError::NoTravelingProfile { v: spec.velocity });
    }
    let n = torus_grid.n;
    let values = torus_grid
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let b = if j == n / 2 {
                Complex64::new(1.0, 0.0)
            } else {
                let t = if theta > PI { theta - 2.0 * PI } else { theta };
                blaschke_product(spec, Complex64::new((0.5 * t).tan(), 0.0))
            };
            profile_point(spec, b)
        })
        .collect();
    Ok(SphereField::new(torus_grid.clone(), values)?)
}

/// Single-frequency traveling wave on the circle, translated by `v*t`:
/// `theta -> (a cos m(theta - v t), a sin m(theta - v t), -v)`.
pub fn circle_wave(
    m: usize,
    v: f64,
    t: f64,
    torus_grid: &Grid1D,
) -> Result<SphereField, ExactError> {
    torus_grid.require_kind(GridKind::Torus)?;
    if m < 1 {
        return Err(ExactError::BadCircleDegree { m });
    }
    if v.abs() >= 1.0 {
        return Err(ExactError::NoTravelingProfile { v });
    }
    let a = (1.0 - v * v).sqrt();
    let values = torus_grid
        .nodes
        .iter()
        .map(|&theta| {
            let phase = m as f64 * (theta - v * t);
            [a * phase.cos(), a * phase.sin(), -v]
        })
        .collect();
    Ok(SphereField::new(torus_grid.clone(), values)?)
}

/// The rotating rational half-circle
/// `u(t,x) = (cos(t/sqrt2) a(x), sin(t/sqrt2) a(x), c(x))` with
/// `a = 2x^2/(x^4+1)`, `c = (x^4-1)/(x^4+1)`. Its claimed period is
/// `2 pi sqrt 2`; whether it solves the equation exactly is measured by the
/// residual diagnostics, not assumed here.
pub fn periodic_orbit_field(t: f64, window_grid: &Grid1D) -> Result<SphereField, ExactError> {
    window_grid.require_kind(GridKind::Window)?;
    let omega = 1.0 / 2.0_f64.sqrt();
    let (cos_t, sin_t) = ((omega * t).cos(), (omega * t).sin());
    let values = window_grid
        .nodes
        .iter()
        .map(|&x| {
            let x4 = x.powi(4);
            let a = 2.0 * x * x / (x4 + 1.0);
            let c = (x4 - 1.0) / (x4 + 1.0);
            [cos_t * a, sin_t * a, c]
        })
        .collect();
    Ok(SphereField::new(window_grid.clone(), values)?)
}

/// Analytic time derivative of [`periodic_orbit_field`], used by the
/// exactness diagnostics.
pub fn periodic_orbit_time_derivative(t: f64, window_grid: &Grid1D) -> VectorField3 {
    let omega = 1.0 / 2.0_f64.sqrt();
    let (cos_t, sin_t) = ((omega * t).cos(), (omega * t).sin());
    VectorField3::from_fn(window_grid.clone(), |x| {
        let a = 2.0 * x * x / (x.powi(4) + 1.0);
        [-omega * sin_t * a, omega * cos_t * a, 0.0]
    })
}

/// Claimed period of the rotating rational solution.
pub fn periodic_orbit_period() -> f64 {
    2.0 * PI * 2.0_f64.sqrt()
}

// ---------------------------------------------------------------------------
// Moebius reparametrization
// ---------------------------------------------------------------------------

/// A conformal reparametrization of the domain: `(a x + b)/(c x + d)` on the
/// line, a rotation plus disk-automorphism boundary map on the circle.
#[derive(Debug, Clone)]
pub enum MobiusMap {
    Line { a: f64, b: f64, c: f64, d: f64 },
    Torus { rotation: f64, disk_point: Complex64 },
}

impl MobiusMap {
    pub fn line(a: f64, b: f64, c: f64, d: f64) -> Result<Self, ExactError> {
        let defect = (a * d - b * c - 1.0).abs();
        if defect > 1e-12 {
            return Err(ExactError::BadLineMap { defect });
        }
        Ok(MobiusMap::Line { a, b, c, d })
    }

    pub fn torus(rotation: f64, disk_point: Complex64) -> Result<Self, ExactError> {
        let modulus = disk_point.norm();
        if !(modulus < 1.0) {
            return Err(ExactError::BadDiskPoint { modulus });
        }
        Ok(MobiusMap::Torus {
            rotation,
            disk_point,
        })
    }

    pub fn identity(kind: GridKind) -> Self {
        match kind {
            GridKind::Torus => MobiusMap::Torus {
                rotation: 0.0,
                disk_point: Complex64::new(0.0, 0.0),
            },
            GridKind::Window => MobiusMap::Line {
                a: 1.0,
                b: 0.0,
                c: 0.0,
                d: 1.0,
            },
        }
    }

    fn is_identity(&self) -> bool {
        match *self {
            MobiusMap::Line { a, b, c, d } => a == 1.0 && b == 0.0 && c == 0.0 && d == 1.0,
            MobiusMap::Torus {
                rotation,
                disk_point,
            } => rotation == 0.0 && disk_point == Complex64::new(0.0, 0.0),
        }
    }

    /// Boundary action on a point of the domain (an angle on the torus).
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            MobiusMap::Line { a, b, c, d } => (a * x + b) / (c * x + d),
            MobiusMap::Torus {
                rotation,
                disk_point,
            } => {
                let z = Complex64::from_polar(1.0, x);
                let w = Complex64::from_polar(1.0, rotation) * (z - disk_point)
                    / (Complex64::new(1.0, 0.0) - disk_point.conj() * z);
                w.arg().rem_euclid(2.0 * PI)
            }
        }
    }
}

/// Resample `u . phi` onto the grid of `u` by trigonometric interpolation at
/// the mapped nodes.
pub fn mobius_reparam(u: &SphereField, map: &MobiusMap) -> Result<SphereField, ExactError> {
    let g = &u.grid;
    let kinds_match = matches!(
        (g.kind, map),
        (GridKind::Torus, MobiusMap::Torus { .. }) | (GridKind::Window, MobiusMap::Line { .. })
    );
    if !kinds_match {
        return Err(ExactError::MapKindMismatch);
    }
    if map.is_identity() {
        return Ok(u.clone());
    }
    let mapped: Vec<f64> = g.nodes.iter().map(|&x| map.apply(x)).collect();
    if g.kind == GridKind::Window {
        let half = g.half_width;
        let outside: Vec<f64> = mapped
            .iter()
            .copied()
            .filter(|x| !x.is_finite() || x.abs() >= half)
            .collect();
        if !outside.is_empty() {
            let max_abs = outside.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            return Err(ExactError::UnresolvableImage {
                outside: outside.len(),
                max_abs,
                half_width: half,
            });
        }
    }
    let values = grid::interpolate_vec3(g, u.values(), &mapped);
    Ok(SphereField::new(g.clone(), values)?)
}

// ---------------------------------------------------------------------------
// Reference data generators and residual diagnostics
// ---------------------------------------------------------------------------

/// The unit-speed equator map `theta -> (cos theta, sin theta, 0)`, a static
/// solution on the circle.
pub fn equator(torus_grid: &Grid1D) -> Result<SphereField, ExactError> {
    torus_grid.require_kind(GridKind::Torus)?;
    let values = torus_grid
        .nodes
        .iter()
        .map(|&theta| [theta.cos(), theta.sin(), 0.0])
        .collect();
    Ok(SphereField::new(torus_grid.clone(), values)?)
}

/// Smooth seeded perturbation of the equator: low-frequency trigonometric
/// noise of the given amplitude added to the equator map, renormalized
/// pointwise. Deterministic for a fixed seed.
pub fn perturbed_equator(
    torus_grid: &Grid1D,
    amplitude: f64,
    max_mode: usize,
    seed: u64,
) -> Result<SphereField, ExactError> {
    torus_grid.require_kind(GridKind::Torus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // coeffs[c][k]: (cos, sin) amplitudes of mode k+1 in component c.
    let coeffs: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|_| {
            (0..max_mode)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(torus_grid.n);
    for (node, &theta) in torus_grid.nodes.iter().enumerate() {
        let mut w = [theta.cos(), theta.sin(), 0.0];
        for (c, comp) in coeffs.iter().enumerate() {
            for (k, &(ca, sa)) in comp.iter().enumerate() {
                let freq = (k + 1) as f64;
                w[c] += amplitude * (ca * (freq * theta).cos() + sa * (freq * theta).sin()) / freq;
            }
        }
        let norm = vec3::norm(w);
        if norm < 0.1 {
            return Err(ExactError::DegeneratePerturbation { node });
        }
        values.push(vec3::scale(w, 1.0 / norm));
    }
    Ok(SphereField::new(torus_grid.clone(), values)?)
}

/// Sup-norm of the traveling-profile residual `u x |D|u + v du/dx`.
pub fn profile_residual(u: &SphereField, v: f64) -> f64 {
    let rhs = grid::hwm_rhs(u);
    let du = u.to_vector_field().apply_multiplier(Symbol::Derivative);
    rhs.values
        .iter()
        .zip(&du.values)
        .map(|(&r, &d)| vec3::norm(vec3::add_scaled(r, d, v)))
        .fold(0.0, f64::max)
}

/// Velocity minimizing the profile residual in the least-squares sense,
/// together with the sup-residual attained there. `None` when the field has
/// no translation direction (constant fields).
pub fn best_fit_velocity(u: &SphereField) -> Option<(f64, f64)> {
    let rhs = grid::hwm_rhs(u);
    let du = u.to_vector_field().apply_multiplier(Symbol::Derivative);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&r, &d) in rhs.values.iter().zip(&du.values) {
        num += vec3::dot(r, d);
        den += vec3::dot(d, d);
    }
    if den <= 1e-28 {
        return None;
    }
    let v_star = -num / den;
    Some((v_star, profile_residual(u, v_star)))
}

/// Total winding of the horizontal component `u1 + i u2` around the origin,
/// by discrete phase unwinding including the wrap-around pair. Meaningful
/// for curves whose horizontal part stays away from zero.
pub fn horizontal_winding(u: &SphereField) -> f64 {
    let vals = u.values();
    let n = vals.len();
    let mut total = 0.0;
    for j in 0..n {
        let a = Complex64::new(vals[j][0], vals[j][1]);
        let b = Complex64::new(vals[(j + 1) % n][0], vals[(j + 1) % n][1]);
        total += (b / a).arg();
    }
    total / (2.0 * PI)
}
