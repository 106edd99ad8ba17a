//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by detectors, estimators and the ingestion layer.
#[derive(Debug, Error)]
pub enum Error {
    /// CSV ingestion failed; positions are 1-based.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    /// An index, segment or lag fell outside the data it refers to.
    #[error("range error: {0}")]
    Range(String),

    /// A matrix that must be positive definite is not.
    #[error("singular matrix: smallest eigenvalue {eigenvalue:e} below tolerance")]
    Singular { eigenvalue: f64 },

    /// A monitor could not be trained on the given window.
    #[error("untrainable {variant} monitor: {msg}")]
    Untrainable { variant: &'static str, msg: String },

    /// Invalid configuration or observation values.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// API misuse, e.g. asking for a change point before a stop occurred.
    #[error("logic error: {0}")]
    Logic(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
