//! Error classification for process exit codes.
//!
//! The binary distinguishes three failure classes: usage errors (exit 1),
//! configuration or data errors (exit 2), and numeric failures inside the
//! computation (exit 3). Library errors are classified by whether they
//! report a numeric-backend failure or a bad input.

use std::fmt;
use std::path::Path;

use thiserror::Error;

/// A failure surfaced to the user, tagged with its exit code class.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combinations or invalid flag values; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed configs and data files; exit code 2.
    #[error("{0}")]
    Data(String),
    /// Failures of the numeric computation itself; exit code 3.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    /// Data error prefixed with the offending file path.
    pub fn in_file(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Data(format!("{}: {}", path.display(), err))
    }
}

impl From<iokr::Error> for CliError {
    fn from(err: iokr::Error) -> Self {
        if err.is_numeric() {
            CliError::Numeric(err.to_string())
        } else {
            CliError::Data(err.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
