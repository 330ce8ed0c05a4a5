use thiserror::Error;

/// Errors raised by matrix construction, solving and reduction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("index ({i}, {j}) out of range for dimension {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("entry ({i}, {j}) lies below the diagonal")]
    LowerTriangular { i: usize, j: usize },
    #[error("duplicate entry ({i}, {j})")]
    DuplicateEntry { i: usize, j: usize },
    #[error("non-finite value {value} at ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },
    #[error("non-finite update value {0}")]
    NonFiniteUpdate(f64),
    #[error("dimension {n} exceeds the exhaustive enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("degenerate instance: fewer than two distinct values")]
    Degenerate,
    #[error("all matrix entries are zero")]
    AllZero,
    #[error("not enough distinct values ({values}) for {changes} changes")]
    InsufficientValues { values: usize, changes: usize },
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = QuboError> = std::result::Result<T, E>;

impl From<std::io::Error> for QuboError {
    fn from(e: std::io::Error) -> Self {
        QuboError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for QuboError {
    fn from(e: serde_json::Error) -> Self {
        QuboError::Parse(e.to_string())
    }
}
