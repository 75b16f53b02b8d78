//! Finite-difference toolkit for the 2D convective Brinkman–Forchheimer
//! equations on the unit square:
//!
//! ```text
//! u_t - mu Lap(u) + (u.grad)u + alpha u + beta |u|^(r-1) u + grad p = f(t) g(x, t)
//! div u = 0,   u = 0 on the boundary,   u(0) = u0
//! ```
//!
//! Three capabilities share one staggered-grid discretisation:
//!
//! * **Direct solver** — semi-implicit Euler with a pressure projection;
//!   linear terms implicit, convection and damping explicit.
//! * **Source recovery** — given the scalar observation
//!   `phi(t) = <u(t), omega>`, reconstruct the amplitude `f(t)` either by
//!   fixed-point (Picard) iteration on the associated operator equation or by
//!   time-marching elimination, both consistent with the direct scheme to
//!   round-off at the fixed point.
//! * **Estimate verification** — evaluate both sides of the a priori energy,
//!   stability, and monotonicity inequalities that underpin well-posedness of
//!   the recovery problem, on actual computed trajectories.
//!
//! Exact discrete identities (adjoint gradient/divergence, energy-neutral
//! convection, `<|v|^(r-1) v, v> = lp_norm(v, r+1)^(r+1)`) are maintained so
//! that the verification layer tests the inequalities themselves rather than
//! discretisation slack.

pub mod admissibility;
pub mod config;
pub mod direct;
pub mod error;
pub mod estimates;
pub mod field;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod manufactured;
pub mod ops;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use field::{ScalarField, TimeSeries, VelocityField};
pub use grid::Grid;
