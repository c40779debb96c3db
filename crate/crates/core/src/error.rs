use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpcrError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is rank deficient (smallest singular value {min_singular_value:e})")]
    RankDeficient { min_singular_value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{0} did not converge")]
    Decomposition(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training fold has {train_size} rows, need at least {required}")]
    FoldTooSmall { train_size: usize, required: usize },

    #[error("parse error at row {row}, column \"{column}\": {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("invalid simulation case {0} (expected 1..=5)")]
    InvalidCase(u32),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SpcrError {
    fn from(e: std::io::Error) -> Self {
        SpcrError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SpcrError>;
