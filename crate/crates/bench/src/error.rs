use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("cell ({devices} devices, {sensors} sensors) has {n} records; at least 2 are needed")]
    InsufficientReplications {
        devices: usize,
        sensors: usize,
        n: usize,
    },
    #[error("no records")]
    NoRecords,
    #[error("not enough remote endpoints: {available} given, {needed} needed")]
    NotEnoughEndpoints { needed: usize, available: usize },
    #[error(transparent)]
    Deploy(#[from] sensedeploy_deploy::DeployError),
    #[error(transparent)]
    Agent(#[from] sensedeploy_deploy::AgentError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
