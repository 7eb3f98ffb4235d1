use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report, grouped so that the CLI can map
/// each class onto its exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration. `key` is the dotted path of the
    /// offending field (e.g. `model.mu1`).
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Argument outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("tape is empty")]
    EmptyTape,

    /// Expected trade rate is zero, so the event loop would never advance.
    #[error("runaway simulation: {0}")]
    Runaway(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 1 config, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Domain(_) | Error::Runaway(_) => 1,
            Error::Io { .. } | Error::Parse { .. } | Error::EmptyTape => 2,
            Error::Numerical(_) | Error::InsufficientData(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
