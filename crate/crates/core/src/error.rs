use thiserror::Error;

/// Errors produced by the model, solvers, samplers and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability {value} at ({row}, {col}); entries must lie in [0, 1)")]
    InvalidProbability { row: usize, col: usize, value: f64 },
    #[error("matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("matrix must be square with k = {k} rows of length {k}")]
    BadShape { k: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector component {index} is {value}; components must be finite and nonnegative")]
    NegativeComponent { index: usize, value: f64 },
    #[error("vector component {index} is {value}; expected a nonnegative integer")]
    NotInteger { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instance too large for exact search: {0}")]
    TooLarge(String),
    #[error("node budget exhausted; chromatic number lies in [{lower}, {upper}]")]
    BudgetExceeded { lower: usize, upper: usize },
    #[error("graph structures differ: {0}")]
    StructureMismatch(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
