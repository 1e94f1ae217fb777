//! Deployment side: the orchestrator that turns a region and a sensor
//! count into per-device descriptor archives, its HTTP API, and the device
//! agents that install those archives.

pub mod agent;
pub mod api;
pub mod error;
pub mod job;
pub mod manifest;
pub mod orchestrator;
pub mod partition;
pub mod store;

pub use agent::{spawn_fleet, DeviceAgent, Fleet};
pub use api::{serve, ServerHandle};
pub use error::{AgentError, DeployError};
pub use job::{AckState, DeployJob, JobRequest, JobState, JobView, PhaseTimings};
pub use manifest::{Ack, DeployManifest, FailureReason};
pub use orchestrator::{Orchestrator, OrchestratorConfig};
pub use partition::{partition, Partition};
