//! Numerics for the fourth-order mean field equation
//!
//!     Delta^2 u = rho e^u / integral(e^u),   u = du/dn = 0 on the boundary,
//!
//! posed on the unit ball of R^4 and reduced to radial profiles. The crate
//! provides the radial calculus (grids, 4-ball quadrature, clamped
//! biharmonic solves), the closed-form Boggio Green function with its
//! Robin function and attainment indicator, the standard concentration
//! bubble with its clamped projection and energy expansions, damped-Newton
//! and energy-descent solvers with continuation in rho toward the Adams
//! threshold 64 pi^2, and diagnostics that test computed or synthetic
//! fields against the blow-up picture: Pohozaev balance, local mass
//! quantization, bubble rescaling and far-field Green profiles.

pub mod banded;
pub mod bubble;
pub mod cli;
mod dd;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod green;
pub mod grid;
pub mod interp;
pub mod io;
pub mod operators;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{RadialField, RadialGrid};
pub use solver::adams_threshold;
