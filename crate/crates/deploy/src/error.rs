use std::collections::BTreeMap;

use thiserror::Error;

use crate::job::JobState;

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("validation failed: {0:?}")]
    Validation(BTreeMap<String, String>),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("illegal state transition {from:?} -> {to:?}")]
    InvalidTransition { from: JobState, to: JobState },
    #[error("job store: {0}")]
    Store(#[from] std::io::Error),
    #[error("job record: {0}")]
    Record(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("agent io: {0}")]
    Io(#[from] std::io::Error),
}
