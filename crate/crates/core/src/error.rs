use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch between tensors or network stages.
    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite values or numerically invalid state.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// API misuse, e.g. a backward pass with a stale cache.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration or data.
    #[error("validation error: {0}")]
    Validation(String),

    /// A training run failed (e.g. diverged).
    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A conditional cell required by an empirical oracle is empty.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// The normalized-MSE denominator MSE(M, M_cf) is zero.
    #[error("degenerate normalizer: MSE(M, M_cf) is zero")]
    DegenerateNormalizer,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
