//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix or vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input that makes the requested quantity undefined,
    /// e.g. a compatibility ratio with a vanishing denominator.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A dense factorization (SVD, eigensolver, Cholesky) failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed text input (CSV matrices, edge lists, config files).
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
