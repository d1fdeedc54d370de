use thiserror::Error;

use crate::linalg::LinalgError;

/// Crate-wide error type. The CLI maps categories to exit codes
/// (config -> 1, numerical/contract -> 2, io -> 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

impl From<LinalgError> for Error {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Contract(m) => Error::Contract(m),
            LinalgError::DimensionMismatch(m) => Error::Contract(m),
            other => Error::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
