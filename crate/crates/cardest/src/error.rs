use std::path::PathBuf;

use thiserror::Error;

use crate::remote::RemoteError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(cardest_core::Error),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    /// A backend failed while answering (remote failures inside a pipeline).
    #[error("backend: {0}")]
    Backend(String),
}

impl CliError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Format { .. } => 5,
            CliError::Core(_) => 6,
            CliError::Remote(_) | CliError::Backend(_) => 7,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl std::fmt::Display) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}

impl From<cardest_core::Error> for CliError {
    fn from(e: cardest_core::Error) -> Self {
        match e {
            cardest_core::Error::Backend(m) => CliError::Backend(m),
            e => CliError::Core(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
