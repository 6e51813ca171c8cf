use std::path::PathBuf;

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content at a specific line.
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// File-level content problem (empty file, bad magic, invalid UTF-8).
    #[error("{path}: {msg}")]
    InvalidData { path: PathBuf, msg: String },

    /// Invalid argument or parameter combination.
    #[error("{0}")]
    InvalidInput(String),

    #[error("training diverged at update {update} (loss {loss:e}); try a smaller learning rate")]
    Divergence { update: u64, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 1 for input/validation errors, 2 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Divergence { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::InvalidData {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
