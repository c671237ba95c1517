use thiserror::Error;

pub type Result<T> = std::result::Result<T, SacError>;

#[derive(Debug, Error)]
pub enum SacError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),
    #[error("environment: {0}")]
    Env(String),
    #[error("non-finite {what} after update {update}")]
    NonFinite { update: u64, what: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
