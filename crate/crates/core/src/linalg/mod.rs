//! Linear algebra used across the crate: dense complex LU, exact Bareiss
//! determinants, a conjugate-gradient normal-equation solver and small fits.

pub mod dense;
pub mod exact;
pub mod iterative;
pub mod fit;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} below threshold at column {column})")]
    Singular { pivot: f64, column: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("ill-conditioned system (condition estimate {0:e})")]
    IllConditioned(f64),
}
