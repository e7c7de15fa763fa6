use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A serialized instance set is missing a key or holds a value of the wrong shape.
    #[error("format error in `{key}`: {message}")]
    Format { key: String, message: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("illegal action {action}: {reason}")]
    IllegalAction { action: usize, reason: String },

    #[error("missing type: {0}")]
    MissingType(String),

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("oracle inconsistency: candidate {candidate} beats oracle {oracle}")]
    OracleInconsistency { oracle: i64, candidate: i64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("state error: {0}")]
    State(String),
}

impl Error {
    pub(crate) fn format(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
