use std::path::PathBuf;

use thiserror::Error;

use crate::eigensolver::Extremal;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is malformed or inconsistent with the grid.
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    /// A model parameter lies outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("shape error: expected {expected} cell values, found {found}")]
    Shape { expected: usize, found: usize },

    /// The obstacle or potential violates the problem constraints.
    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("solver did not converge: {message}")]
    NonConvergence {
        message: String,
        last: Option<Box<Extremal>>,
    },

    #[error("combinatorial budget exceeded: {count} designs to enumerate, limit is {limit}")]
    Budget { count: u128, limit: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record file {path}: {message}")]
    Records { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
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

    /// Process exit code for the CLI: 1 for user/validation errors, 2 for
    /// numerical non-convergence, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 2,
            Error::Io { .. } | Error::Records { .. } => 3,
            _ => 1,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
