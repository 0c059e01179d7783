use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("replay buffer not ready: {have} transitions, need {need}")]
    NotReady { have: usize, need: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("network error: {0}")]
    Net(String),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting and FFI
    /// status codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Init(_) => "init",
            Error::Protocol(_) => "protocol",
            Error::Shape(_) => "shape",
            Error::NotReady { .. } => "not_ready",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Net(_) => "net",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
