use std::path::PathBuf;

use rampmerge_sac::SacError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Process exit codes by error category.
pub mod exit {
    pub const USAGE: u8 = 2;
    pub const CHECKPOINT: u8 = 3;
    pub const RUNTIME: u8 = 4;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("checkpoint refused: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] rampmerge_core::Error),

    #[error("training failed: {0}")]
    Training(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Format { path: path.into(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> u8 {
        use rampmerge_core::Error as Core;
        match self {
            Self::Config(_) | Self::Usage(_) => exit::USAGE,
            Self::Model(Core::InvalidParam { .. } | Core::Parse(_) | Core::Usage(_)) => exit::USAGE,
            Self::Checkpoint(_) => exit::CHECKPOINT,
            Self::Io { .. } | Self::Format { .. } | Self::Model(_) | Self::Training(_) => exit::RUNTIME,
        }
    }
}

impl From<SacError> for HarnessError {
    fn from(e: SacError) -> Self {
        match e {
            SacError::InvalidConfig(msg) => Self::Config(format!("sac: {msg}")),
            SacError::Checkpoint(_) | SacError::Mismatch(_) => Self::Checkpoint(e.to_string()),
            other => Self::Training(other.to_string()),
        }
    }
}
