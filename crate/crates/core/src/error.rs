use thiserror::Error;

use crate::model::ConstraintViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    InvalidSpec { what: &'static str, reason: String },

    #[error("invalid grid {x}x{y}: both dimensions must be at least 1")]
    InvalidGrid { x: u64, y: u64 },

    #[error("{what} exceeds capacity: {requested} > {limit}")]
    Capacity {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("plan violates {} constraint(s): {}", .0.len(), summarize(.0))]
    InvalidPlan(Vec<ConstraintViolation>),

    #[error("no valid parallelization plan exists for this model and cluster")]
    NoValidPlan,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec { .. } => "invalid_spec",
            Error::InvalidGrid { .. } => "invalid_grid",
            Error::Capacity { .. } => "capacity",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::NoValidPlan => "no_valid_plan",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn spec(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            what,
            reason: reason.into(),
        }
    }
}

fn summarize(violations: &[ConstraintViolation]) -> String {
    violations
        .iter()
        .map(|v| v.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}
