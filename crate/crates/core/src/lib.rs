//! Numerical laboratory for degenerate and singular parabolic equations:
//! regularized p-Laplace and fully nonlinear evolutions, their closed-form
//! solutions, exponent measurement, and pointwise checks of the Bernstein
//! machinery behind the time-derivative bounds.

pub mod bernstein;
pub mod coefficients;
pub mod error;
pub mod exact;
pub mod exec;
pub mod grid;
pub mod linalg;
pub mod regularity;
pub mod solver;
pub mod stencil;

pub use error::{Error, Result};
pub use exec::Exec;
