//! Numerical laboratory for the one-dimensional half-wave maps equation
//!
//! ```text
//!     du/dt = u x |D| u,      u : R (or T) -> S^2,
//! ```
//!
//! where `|D|` is the square root of the Laplacian. The crate provides
//!
//! * [`grid`] — pseudospectral discretizations of the circle and of a large
//!   symmetric window, with exact Fourier-multiplier calculus,
//! * [`exact`] — closed-form solutions: Blaschke traveling-wave profiles,
//!   circle waves, the rational rotating half-circle, Moebius domain maps,
//! * [`evolve`] — structure-preserving time integration (implicit midpoint,
//!   projected RK4),
//! * [`invariants`] — conserved quantities and drift reports,
//! * [`lax`] — the commutator operator `L = [H, U]`, Schatten norms,
//!   numerical Kronecker rank and the Lax-equation residual,
//! * [`linspec`] — discretization and classified eigenanalysis of the
//!   linearized operators around half-harmonic maps.

pub mod evolve;
pub mod exact;
pub mod grid;
pub mod invariants;
pub mod lapack;
pub mod lax;
pub mod linspec;
pub mod vec3;
