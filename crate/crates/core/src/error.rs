use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported finite element combination: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("factorization of {block} failed: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { block: String, row: usize, pivot: f64 },

    #[error("zero pivot at row {row} while factorizing {block}")]
    SingularPivot { block: String, row: usize },

    #[error("Lanczos breakdown at step {step} with unconverged residual {residual:e}")]
    Breakdown { step: usize, residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("preconditioner is not positive definite (B-inner product {0:e})")]
    IndefinitePreconditioner(f64),

    #[error("spectral estimate did not converge within {0} Lanczos steps")]
    NoConvergence(usize),

    #[error("dense oracle limited to dimension {cap}, got {got}")]
    DimensionCap { cap: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
