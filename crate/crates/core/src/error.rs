use thiserror::Error;

use crate::manifold::ProductPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Dimension {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is numerically rank deficient (column {column})")]
    NumericalRank { column: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A run produced a non-finite objective or gradient. Carries the last
    /// iterate at which everything was still finite.
    #[error("run diverged at step {step}: {message}")]
    Diverged {
        step: usize,
        message: String,
        last_finite: Box<ProductPoint>,
    },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
