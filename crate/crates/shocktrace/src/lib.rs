//! Certified solver for 1D scalar conservation laws `u_t + A(u)_x = 0`.
//!
//! The solver evolves a glued multi-piece numerical approximation: the initial
//! data is split into nearly non-decreasing and rapidly decreasing pieces,
//! each piece is extended to a global Lipschitz function and simulated
//! independently with a monotone finite-volume scheme, and the pieces are
//! joined along shock curves driven by Rankine-Hugoniot ODEs.  On top of the
//! solution the crate computes fully a posteriori error bounds: per-shock
//! position uncertainty intervals, collision certificates, front-tracking
//! stability budgets, and assembled L1/L2 error bounds on the cone of
//! information.
//!
//! Modules follow the pipeline order:
//! - [`model`]: flux/entropy algebra, relative quantities, derived constants;
//! - [`preprocess`]: piece classification, staircase discretization, global
//!   Lipschitz extensions;
//! - [`solver`]: finite-volume evolution, space-time reconstruction, residual
//!   quadrature, analytic decay bounds;
//! - [`shocks`]: shock-curve ODEs with merge-on-contact and the scalar
//!   front-tracking engine;
//! - [`estimator`]: uncertainty accumulators, certificates and the assembled
//!   error report;
//! - [`harness`]: experiment orchestration, convergence tables, CLI backend.

pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod preprocess;
pub mod shocks;
pub mod solver;

pub use error::Error;
