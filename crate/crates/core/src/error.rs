use thiserror::Error;

use crate::model::TaskId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("task {id}: snr must be positive and finite, got {snr}")]
    NonPositiveSnr { id: TaskId, snr: f64 },
    #[error("exit point {exit} outside 1..={depth}")]
    ExitOutOfRange { exit: usize, depth: usize },
    #[error("accuracy {requested} exceeds the best available exit ({best})")]
    UnattainableAccuracy { requested: f64, best: f64 },
    #[error("duplicate task id {0}")]
    DuplicateTask(TaskId),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed input: {0}")]
    Json(#[from] serde_json::Error),
    #[error("task {id}: {reason}")]
    Task { id: TaskId, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}
