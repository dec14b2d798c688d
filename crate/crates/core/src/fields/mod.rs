//! Grid, grid functions, finite-difference operators, discrete norms and the
//! screened Poisson solver.

mod grid;
pub mod helmholtz;
pub mod norms;
pub mod ops;

use thiserror::Error;

pub use grid::{Grid, ScalarField, VectorField};
pub use helmholtz::{helmholtz_solve, HelmholtzOperator, LinearSolveConfig, Preconditioner, SolveReport};
pub use norms::Norms;
pub use ops::{curl2d, d_dx, d_dy, divergence, gradient, inner, laplacian, EdgeRule, Reflection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid needs at least 4 cells per side, got {0}")]
    GridTooSmall(usize),
    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid operator: {0}")]
    InvalidOperator(&'static str),
    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(&'static str),
    #[error("linear solve did not converge after {iterations} iterations (relative residual {relative_residual:e})")]
    NotConverged { iterations: usize, relative_residual: f64 },
}
