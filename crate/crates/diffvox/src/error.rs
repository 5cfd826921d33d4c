use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffVoxError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("numerical divergence: non-finite {quantity} at epoch {epoch}, batch {batch}")]
    Divergence {
        quantity: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("non-finite value in {0}; refusing to write")]
    NonFiniteData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DiffVoxError>;
