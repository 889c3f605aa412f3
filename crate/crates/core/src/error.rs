use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("path loss undefined for distance {0} km (must be > 0)")]
    Domain(f64),

    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),

    #[error("hop {hop} of task {task} has zero rate")]
    Unreachable { task: u64, hop: usize },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
