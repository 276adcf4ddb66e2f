//! Error type shared across the crate, with a mapping to CLI exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed user input: shapes, ranges, unsupported combinations.
    #[error("{0}")]
    Input(String),

    /// Dataset loading or validation failure.
    #[error("{0}")]
    Data(String),

    /// Model file or network validation failure.
    #[error("{0}")]
    Model(String),

    /// LP solver could not run (distinct exit code).
    #[error("{0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for usage errors, 3 for data/model
    /// errors, 4 when the solver is unavailable.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 2,
            Error::Solver(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
