//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LapError {
    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("not a permutation matrix: {0}")]
    NotAPermutation(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("problem size {n} exceeds the exhaustive-search limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("unsupported format version {found:?} (expected {expected:?})")]
    Version { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LapError {
    /// Process exit code for the CLI: 2 for data problems, 3 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            LapError::NonFinite { .. }
            | LapError::Degenerate(_)
            | LapError::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, LapError>;
