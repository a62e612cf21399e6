use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("node ({i}, {j}) outside the {nx}x{ny} grid")]
    Index { i: usize, j: usize, nx: usize, ny: usize },

    #[error("fields are defined on different domains")]
    DomainMismatch,

    #[error("linear solve did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("eigen solve stagnated after {iterations} iterations (last relative change {change:.3e})")]
    EigenSolve { iterations: usize, change: f64 },

    #[error("nonlinear solve failed after {iterations} iterations: {reason} (residual {residual:.3e})")]
    NonlinearSolve { iterations: usize, residual: f64, reason: String, history: Vec<f64> },

    #[error("supersolution unavailable: lambda {lambda} does not exceed the principal eigenvalue {lambda1} of the domain")]
    PhiUnavailable { lambda: f64, lambda1: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
