use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("constraint violated: {limit} (value {value})")]
    Constraint { limit: &'static str, value: f64 },

    #[error("battery cannot deliver {requested} W (max feasible {max_feasible} W)")]
    Saturation { requested: f64, max_feasible: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("usage error: {0}")]
    Usage(String),
}
