use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or file.
    #[error("configuration error: {0}")]
    Config(String),

    /// A precondition of an operation was violated by the caller.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A result file exists but does not follow the documented schema.
    #[error("malformed file {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    /// A non-finite value showed up in the learned weights or influence matrix.
    #[error("numerical fault: {0}")]
    NumericalFault(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Schema { .. } => 2,
            Error::Io { .. } => 3,
            Error::NumericalFault(_) => 4,
        }
    }
}
