//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shooting bracket failed: {0}")]
    BracketFailure(String),

    #[error("profile is not decaying: {0}")]
    NotDecaying(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fixed point diverged (measured contraction factor {factor:.3})")]
    Divergence { factor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
