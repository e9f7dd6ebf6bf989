use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or an inconsistent configuration. Exit code 1.
    #[error("{0}")]
    Usage(String),

    /// A file that is missing, unreadable or malformed. Exit code 2.
    #[error("{}", with_path(path, message))]
    Data { path: String, message: String },

    /// Data problems that are not tied to a single file. Exit code 2.
    #[error("{0}")]
    Invalid(String),
}

/// Messages from the library often name the file already.
fn with_path(path: &str, message: &str) -> String {
    if message.contains(path) {
        message.to_string()
    } else {
        format!("{path}: {message}")
    }
}

impl CliError {
    pub fn data(path: &Path, err: impl Display) -> Self {
        CliError::Data {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn invalid(err: impl Display) -> Self {
        CliError::Invalid(err.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } | CliError::Invalid(_) => 2,
        }
    }
}
