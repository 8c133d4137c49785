use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    #[error("column '{column}' has a missing or non-finite value at row {row}")]
    NonFiniteColumn { column: String, row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("split produced a half with {size} rows; at least {min} are required")]
    SplitTooSmall { size: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("graphical lasso did not converge within {sweeps} sweeps (lambda = {lambda:e}, last change {change:e})")]
    NoConvergence { sweeps: usize, lambda: f64, change: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
