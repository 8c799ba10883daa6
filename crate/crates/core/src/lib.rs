//! 1D exogenous chemotaxis system with physical mixed boundary conditions.
//!
//! The system on the unit interval is
//!
//! ```text
//! u_t = u_xx - (u v_x)_x        (cell density, zero total flux at x = 0, 1)
//! v_t = D v_xx - u v            (chemical, pinned to v* at x = 0, 1 when D > 0)
//! ```
//!
//! Cells consume the chemical but do not produce it; total cell mass
//! `M = ∫ u dx` is conserved. For `D > 0` the system has a unique
//! non-constant stationary state `(ū, v̄)` with `ū = λ e^v̄`; for `D = 0`
//! the steady state is the constant `(M, 0)`. Small perturbations decay
//! exponentially in both regimes.
//!
//! The crate provides, module by module:
//!
//! - [`field`]: uniform grids on `[0, 1]`, nodal fields, and the discrete
//!   calculus (trapezoid integral, derivative, cumulative antiderivative,
//!   norms) every other module is built on;
//! - [`stationary`]: a damped-Newton / fixed-point solver for the
//!   stationary boundary value problem and structural verification of the
//!   computed profiles;
//! - [`evolution`]: conservative IMEX time stepping for `D > 0` and the
//!   PDE-ODE system at `D = 0`, with per-sample diagnostics;
//! - [`energy`]: the antiderivative reformulation, weighted energy
//!   functionals, and a direct solver for the perturbation system that
//!   serves as an independent oracle;
//! - [`diagnostics`]: exponential decay-rate fitting, mass audits, and
//!   self-convergence studies;
//! - [`export`]: CSV and JSON artifact writers with stable column
//!   contracts.

pub mod diagnostics;
pub mod energy;
mod error;
pub mod evolution;
pub mod export;
pub mod field;
pub mod model;
pub mod stationary;
pub mod tridiag;

pub use error::Error;
pub use field::{Field, Grid, Norms};
pub use model::ModelParams;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
