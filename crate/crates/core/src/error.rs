use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// The last component of a learned sphere vector is zero, so it cannot be
    /// point-normalized (hyperplane limit).
    #[error("degenerate sphere: scale factor is zero")]
    DegenerateSphere,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, message: impl ToString) -> Self {
        Error::Format {
            what,
            message: message.to_string(),
        }
    }
}
