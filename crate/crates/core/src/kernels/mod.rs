//! Inverse Kasteleyn kernels: full-plane, half-plane, monodromy-twisted inverses, and the
//! closed-form references they are checked against.

pub mod checks;
mod fullplane;
mod monodromy;
pub mod reference;
mod solve;
pub mod special;

use thiserror::Error;

pub use fullplane::{fullplane_kinv, fullplane_kinv_scaled, halfplane_kinv, halfplane_kinv_scaled, kinv_main_term};
pub use monodromy::{BaseKernel, CutResolvent, ResolventColumn};
pub use solve::{edge_phase, solve_kernel_column, BoundaryData, KernelColumn, KernelMethod};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("linear system is singular")]
    SingularSystem,
    #[error("linear system is ill-conditioned (estimate {0:e})")]
    IllConditioned(f64),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("parametrix regime undefined: {0}")]
    RegimeUndefined(String),
    #[error("invalid kernel request: {0}")]
    Invalid(String),
}
