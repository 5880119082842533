use thiserror::Error;

/// Errors raised by the analysis kernels.
#[derive(Debug, Error)]
pub enum CspError {
    #[error("value out of range: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// A request would exceed a configured size cap (nodes, assignments, ...).
    #[error("size cap exceeded: {what} needs {requested}, cap is {cap}")]
    SizeCap { what: &'static str, requested: f64, cap: f64 },

    #[error("numerical routes disagree: {what} ({first} vs {second})")]
    Disagreement { what: &'static str, first: f64, second: f64 },

    #[error("instance has no solutions")]
    NoSolutions,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CspError>;
