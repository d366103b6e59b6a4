use std::io;
use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the command-line tool, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or bad input data; exit status 2.
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] spreaddetect::Error),
    /// Anything else, such as a failed write; exit status 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Core(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn invalid(flag: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("invalid {flag}: {reason}"))
}

pub fn read_failed(path: &Path, err: io::Error) -> CliError {
    CliError::Invalid(format!("cannot read {}: {err}", path.display()))
}

pub fn write_failed(path: Option<&Path>, err: impl std::fmt::Display) -> CliError {
    match path {
        Some(p) => CliError::Internal(format!("cannot write {}: {err}", p.display())),
        None => CliError::Internal(format!("cannot write to stdout: {err}")),
    }
}
