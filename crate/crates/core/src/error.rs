//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside its declared domain (e.g. a calibration factor
    /// outside the prior support).
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violates a precondition (shape mismatch, empty input, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A numeric operation failed (non-PSD covariance, degenerate warping,
    /// failed factorization).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Surrogate training diverged or failed to make progress.
    #[error("training error: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A pipeline stage was invoked before its upstream stage produced a
    /// manifest.
    #[error("dependency error: {0}")]
    Dependency(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }
}
