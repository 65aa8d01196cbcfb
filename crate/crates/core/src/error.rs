//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by mechanisms, instance loaders and the auditor.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A caller-side precondition does not hold (e.g. empty candidate set).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An adaptive oracle broke one of its declared contracts at runtime.
    #[error("oracle contract violated: {0}")]
    ContractViolation(String),

    /// An exact enumeration would exceed the configured support cap.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// A problem instance fails validation (unsolvable, malformed, ...).
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
