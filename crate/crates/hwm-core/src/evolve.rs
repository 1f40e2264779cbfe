//! Time integration of `du/dt = u x |D|u` preserving the pointwise sphere
//! constraint.
//!
//! The default scheme is the implicit midpoint rule: the update
//! `u+ = u + dt * (w x |D|w)` with `w = (u + u+)/2` keeps `|u+| = |u|`
//! exactly for the exact stage solution, because the increment is
//! orthogonal to `u + u+`. The stage equation is solved by fixed-point
//! iteration, which contracts when `dt <= 0.5 / k_max`; violating that
//! bound is a configuration error, not a runtime surprise. A projected
//! classical RK4 step is kept as a cheap cross-check.

use thiserror::Error;

use crate::grid::{self, Grid1D, GridError, SphereField, VectorField3};
use crate::vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitMidpoint,
    Rk4Projected,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    /// Sup-norm stop for the midpoint fixed-point iteration.
    pub fp_tolerance: f64,
    pub fp_max_iter: usize,
    /// Snapshot stride in steps.
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn midpoint(dt: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::ImplicitMidpoint,
            dt,
            fp_tolerance: 1e-13,
            fp_max_iter: 100,
            record_every: 1,
        }
    }

    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk4Projected,
            ..Self::midpoint(dt)
        }
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    fn validate(&self, grid: &Grid1D) -> Result<(), EvolveError> {
        if !(self.dt > 0.0) || !(self.fp_tolerance > 0.0) || self.fp_max_iter == 0 {
            return Err(EvolveError::BadConfig(
                "dt, fp_tolerance must be positive and fp_max_iter >= 1".into(),
            ));
        }
        if self.record_every == 0 {
            return Err(EvolveError::BadConfig("record_every must be >= 1".into()));
        }
        if self.scheme == Scheme::ImplicitMidpoint {
            let bound = 0.5 / grid.k_max();
            if self.dt > bound {
                return Err(EvolveError::DtBound {
                    dt: self.dt,
                    bound,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("configuration: {0}")]
    BadConfig(String),
    #[error(
        "dt = {dt:.3e} violates the fixed-point contraction bound 0.5/k_max = {bound:.3e}"
    )]
    DtBound { dt: f64, bound: f64 },
    #[error(
        "midpoint iteration did not converge in {iterations} iterations \
         (last increment {last_increment:.3e}, contraction estimate {contraction:.3}); \
         dt is likely too large"
    )]
    FixedPointDiverged {
        iterations: usize,
        last_increment: f64,
        contraction: f64,
    },
    #[error("norm collapsed to {norm:.3e} at node {node} before projection")]
    VanishingNorm { node: usize, norm: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("step at t = {time} failed: {source}")]
    Aborted {
        time: f64,
        /// Snapshots recorded before the failure, flagged incomplete.
        partial: Trajectory,
        #[source]
        source: Box<EvolveError>,
    },
}

/// Recorded evolution: strictly increasing times, validated snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub snapshots: Vec<SphereField>,
    /// False when the run aborted and the trajectory is partial.
    pub complete: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_field(&self) -> &SphereField {
        self.snapshots.last().expect("non-empty trajectory")
    }

    /// Uniform snapshot spacing, when there is one.
    pub fn snapshot_spacing(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let h = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0));
        uniform.then_some(h)
    }
}

/// One implicit-midpoint step, solved by fixed-point iteration started from
/// an explicit Euler predictor. The result is re-validated against the unit
/// sphere, never re-normalized. Negative `dt` steps backward (the scheme is
/// time-symmetric).
pub fn step_midpoint(
    u: &SphereField,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<SphereField, EvolveError> {
    let grid = &u.grid;
    let bound = 0.5 / grid.k_max();
    if dt.abs() > bound {
        return Err(EvolveError::DtBound { dt, bound });
    }
    let n = grid.n;
    let u_vals = u.values();

    let rhs0 = grid::hwm_rhs(u);
    let mut candidate: Vec<vec3::Vec3> = (0..n)
        .map(|j| vec3::add_scaled(u_vals[j], rhs0.values[j], dt))
        .collect();

    let mut prev_increment = f64::INFINITY;
    let mut contraction = 0.0;
    for iteration in 0..cfg.fp_max_iter {
        let mid = VectorField3::new(
            grid.clone(),
            (0..n)
                .map(|j| vec3::scale(vec3::add(u_vals[j], candidate[j]), 0.5))
                .collect(),
        )?;
        let rhs = grid::hwm_rhs_raw(&mid);
        let mut increment = 0.0_f64;
        for j in 0..n {
            let next = vec3::add_scaled(u_vals[j], rhs.values[j], dt);
            increment = increment.max(vec3::norm(vec3::sub(next, candidate[j])));
            candidate[j] = next;
        }
        contraction = increment / prev_increment;
        if increment <= cfg.fp_tolerance {
            return Ok(SphereField::new(grid.clone(), candidate)?);
        }
        prev_increment = increment;
        if iteration + 1 == cfg.fp_max_iter {
            return Err(EvolveError::FixedPointDiverged {
                iterations: cfg.fp_max_iter,
                last_increment: increment,
                contraction,
            });
        }
    }
    unreachable!("loop returns or errors");
}

/// One classical RK4 step followed by pointwise renormalization.
pub fn step_rk4_projected(u: &SphereField, dt: f64) -> Result<SphereField, EvolveError> {
    let grid = &u.grid;
    let n = grid.n;
    let uv = u.values();

    let stage = |base: &[vec3::Vec3], k: &VectorField3, h: f64| -> VectorField3 {
        VectorField3::new(
            grid.clone(),
            (0..n)
                .map(|j| vec3::add_scaled(base[j], k.values[j], h))
                .collect(),
        )
        .expect("length preserved")
    };

    let k1 = grid::hwm_rhs(u);
    let k2 = grid::hwm_rhs_raw(&stage(uv, &k1, 0.5 * dt));
    let k3 = grid::hwm_rhs_raw(&stage(uv, &k2, 0.5 * dt));
    let k4 = grid::hwm_rhs_raw(&stage(uv, &k3, dt));

    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = uv[j];
        v = vec3::add_scaled(v, k1.values[j], dt / 6.0);
        v = vec3::add_scaled(v, k2.values[j], dt / 3.0);
        v = vec3::add_scaled(v, k3.values[j], dt / 3.0);
        v = vec3::add_scaled(v, k4.values[j], dt / 6.0);
        let norm = vec3::norm(v);
        if norm < 0.5 {
            return Err(EvolveError::VanishingNorm { node: j, norm });
        }
        values.push(vec3::scale(v, 1.0 / norm));
    }
    Ok(SphereField::new(grid.clone(), values)?)
}

/// Integrate to `t_end` (which must be an integer multiple of `dt`),
/// recording a snapshot every `record_every` steps plus the initial and
/// final states. Deterministic given the configuration.
pub fn evolve(
    u0: &SphereField,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, EvolveError> {
    cfg.validate(&u0.grid)?;
    if !(t_end > 0.0) {
        return Err(EvolveError::BadConfig("t_end must be positive".into()));
    }
    let steps_f = t_end / cfg.dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(EvolveError::BadConfig(format!(
            "t_end = {t_end} is not an integer multiple of dt = {}",
            cfg.dt
        )));
    }

    let mut times = vec![0.0];
    let mut snapshots = vec![u0.clone()];
    let mut current = u0.clone();
    for step in 1..=steps {
        let result = match cfg.scheme {
            Scheme::ImplicitMidpoint => step_midpoint(&current, cfg.dt, cfg),
            Scheme::Rk4Projected => step_rk4_projected(&current, cfg.dt),
        };
        let time = step as f64 * cfg.dt;
        match result {
            Ok(next) => current = next,
            Err(source) => {
                let partial = Trajectory {
                    grid: u0.grid.clone(),
                    times,
                    snapshots,
                    complete: false,
                };
                return Err(EvolveError::Aborted {
                    time,
                    partial,
                    source: Box::new(source),
                });
            }
        }
        if step % cfg.record_every == 0 || step == steps {
            times.push(time);
            snapshots.push(current.clone());
        }
    }
    Ok(Trajectory {
        grid: u0.grid.clone(),
        times,
        snapshots,
        complete: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;

    #[test]
    fn constant_field_is_a_fixed_point() {
        let g = Grid1D::torus(64).unwrap();
        let u = SphereField::constant(g, [0.0, 0.0, 1.0]).unwrap();
        let cfg = IntegratorConfig::midpoint(1e-2);
        let next = step_midpoint(&u, 1e-2, &cfg).unwrap();
        assert_eq!(u.sup_distance(&next).unwrap(), 0.0);
        let rk = step_rk4_projected(&u, 1e-2).unwrap();
        assert_eq!(u.sup_distance(&rk).unwrap(), 0.0);
    }

    #[test]
    fn equator_is_static_under_both_schemes() {
        let g = Grid1D::torus(64).unwrap();
        let u = exact::equator(&g).unwrap();
        let cfg = IntegratorConfig::midpoint(1e-2);
        let next = step_midpoint(&u, 1e-2, &cfg).unwrap();
        assert!(u.sup_distance(&next).unwrap() <= 1e-12);
        let rk = step_rk4_projected(&u, 1e-2).unwrap();
        assert!(u.sup_distance(&rk).unwrap() <= 1e-13);
    }

    #[test]
    fn midpoint_tracks_the_circle_wave() {
        let g = Grid1D::torus(128).unwrap();
        let dt = 1e-3;
        let u0 = exact::circle_wave(2, 0.5, 0.0, &g).unwrap();
        let cfg = IntegratorConfig::midpoint(dt);
        let u1 = step_midpoint(&u0, dt, &cfg).unwrap();
        let exact1 = exact::circle_wave(2, 0.5, dt, &g).unwrap();
        let err = u1.sup_distance(&exact1).unwrap();
        assert!(err <= 1e-9, "one-step error {err}");
    }

    #[test]
    fn rk4_tracks_the_circle_wave() {
        let g = Grid1D::torus(128).unwrap();
        let dt = 1e-3;
        let u0 = exact::circle_wave(1, 0.5, 0.0, &g).unwrap();
        let u1 = step_rk4_projected(&u0, dt).unwrap();
        let exact1 = exact::circle_wave(1, 0.5, dt, &g).unwrap();
        let err = u1.sup_distance(&exact1).unwrap();
        assert!(err <= 1e-11, "one-step error {err}");
    }

    #[test]
    fn midpoint_is_time_reversible() {
        let g = Grid1D::torus(64).unwrap();
        let u0 = exact::perturbed_equator(&g, 0.05, 4, 7).unwrap();
        let dt = 2e-3;
        let mut cfg = IntegratorConfig::midpoint(dt);
        cfg.fp_tolerance = 1e-15;
        let forward = step_midpoint(&u0, dt, &cfg).unwrap();
        let back = step_midpoint(&forward, -dt, &cfg).unwrap();
        assert!(u0.sup_distance(&back).unwrap() <= 1e-11);
    }

    #[test]
    fn midpoint_norm_drift_is_at_solver_tolerance() {
        let g = Grid1D::torus(64).unwrap();
        let u0 = exact::perturbed_equator(&g, 0.1, 4, 3).unwrap();
        let cfg = IntegratorConfig::midpoint(2e-3).with_record_every(10);
        let traj = evolve(&u0, 0.2, &cfg).unwrap();
        for snap in &traj.snapshots {
            // | |u|^2 - 1 | <= 1e-12 corresponds to | |u| - 1 | <= 5e-13,
            // well within ten times the fixed-point tolerance.
            assert!(snap.norm_defect() <= 10.0 * cfg.fp_tolerance * 2.0);
        }
        assert!(traj.complete);
    }

    #[test]
    fn evolve_constant_gives_identical_snapshots() {
        let g = Grid1D::torus(32).unwrap();
        let u0 = SphereField::constant(g, [1.0, 0.0, 0.0]).unwrap();
        let cfg = IntegratorConfig::midpoint(1e-2).with_record_every(25);
        let traj = evolve(&u0, 1.0, &cfg).unwrap();
        assert!(traj.complete);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        for snap in &traj.snapshots {
            assert_eq!(u0.sup_distance(snap).unwrap(), 0.0);
        }
        assert_eq!(traj.snapshot_spacing(), Some(0.25));
    }

    #[test]
    fn evolve_tracks_circle_wave_over_unit_time() {
        let g = Grid1D::torus(128).unwrap();
        let u0 = exact::circle_wave(2, 0.5, 0.0, &g).unwrap();
        let cfg = IntegratorConfig::midpoint(1e-3).with_record_every(250);
        let traj = evolve(&u0, 1.0, &cfg).unwrap();
        let exact_final = exact::circle_wave(2, 0.5, 1.0, &g).unwrap();
        let err = traj.final_field().sup_distance(&exact_final).unwrap();
        assert!(err <= 1e-4, "final error {err}");
    }

    #[test]
    fn evolve_keeps_static_soliton_fixed() {
        let g = Grid1D::torus(128).unwrap();
        let q = exact::stereographic_pullback(&exact::BlaschkeSpec::pure(1, 0.0), &g).unwrap();
        let cfg = IntegratorConfig::midpoint(2e-3).with_record_every(100);
        let traj = evolve(&q, 0.5, &cfg).unwrap();
        for snap in &traj.snapshots {
            assert!(q.sup_distance(snap).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn dt_bound_is_enforced() {
        let g = Grid1D::torus(256).unwrap(); // k_max = 128, bound ~ 3.9e-3
        let u = exact::equator(&g).unwrap();
        let cfg = IntegratorConfig::midpoint(1e-2);
        assert!(matches!(
            step_midpoint(&u, 1e-2, &cfg),
            Err(EvolveError::DtBound { .. })
        ));
        assert!(matches!(
            evolve(&u, 1.0, &cfg),
            Err(EvolveError::DtBound { .. })
        ));
    }

    #[test]
    fn non_convergence_reports_contraction() {
        let g = Grid1D::torus(64).unwrap();
        let u = exact::perturbed_equator(&g, 0.2, 4, 11).unwrap();
        let mut cfg = IntegratorConfig::midpoint(1e-2);
        cfg.fp_tolerance = 1e-30; // unreachable
        cfg.fp_max_iter = 5;
        match step_midpoint(&u, 1e-2, &cfg) {
            Err(EvolveError::FixedPointDiverged {
                iterations,
                contraction,
                ..
            }) => {
                assert_eq!(iterations, 5);
                assert!(contraction.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn aborted_run_returns_partial_trajectory() {
        let g = Grid1D::torus(64).unwrap();
        let u = exact::perturbed_equator(&g, 0.2, 4, 11).unwrap();
        let mut cfg = IntegratorConfig::midpoint(1e-2);
        cfg.fp_tolerance = 1e-30;
        cfg.fp_max_iter = 3;
        match evolve(&u, 0.1, &cfg) {
            Err(EvolveError::Aborted { partial, time, .. }) => {
                assert!(!partial.complete);
                assert_eq!(partial.len(), 1); // only the initial snapshot
                assert_eq!(time, 1e-2);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn t_end_must_divide() {
        let g = Grid1D::torus(32).unwrap();
        let u = SphereField::constant(g, [0.0, 0.0, 1.0]).unwrap();
        let cfg = IntegratorConfig::midpoint(3e-3);
        assert!(matches!(
            evolve(&u, 1e-2, &cfg),
            Err(EvolveError::BadConfig(_))
        ));
    }
}
