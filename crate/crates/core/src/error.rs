use thiserror::Error;

/// Errors raised by instance construction, evaluation, projection and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("deviation bound rho = {0} must lie in [0, 1)")]
    InvalidRho(f64),
    #[error("subspace specification inconsistent with dimensions: {0}")]
    Subspace(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("vector must be nonzero")]
    ZeroVector,
    #[error("matrix is not column-orthonormal (residual {0:e})")]
    NotOrthonormal(f64),
    #[error("vector is not unit-norm (norm {0})")]
    NonUnit(f64),
    #[error("projection did not converge after {sweeps} sweeps (residual {residual:e})")]
    ProjectionFailure { sweeps: usize, residual: f64 },
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("dense matrix of order {0} exceeds the desk-scale guard")]
    TooLarge(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
