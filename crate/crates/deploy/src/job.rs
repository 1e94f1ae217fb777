//! Deploy jobs: request validation, lifecycle states and per-phase timings.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use sensedeploy_core::marshal::MarshalOptions;
use sensedeploy_core::model::ContextVector;
use sensedeploy_core::selector::{default_criteria, SelectorKind};
use sensedeploy_core::topsis::CriterionSpec;
use sensedeploy_core::Region;

use crate::error::DeployError;

fn default_source() -> String {
    "synthetic".into()
}

/// Body of `POST /jobs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub region: Region,
    /// Number of sensors to select and deploy.
    pub count: usize,
    #[serde(default)]
    pub per_device_limit: Option<usize>,
    #[serde(default)]
    pub selector: SelectorKind,
    /// Defaults to all six context properties.
    #[serde(default)]
    pub criteria: Option<Vec<CriterionSpec>>,
    /// Device agent base URLs.
    pub targets: Vec<String>,
    #[serde(default = "default_source")]
    pub source: String,
    /// Upper bound on sensors fetched from the repository. Generating
    /// sources default to `count`.
    #[serde(default)]
    pub fetch_limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub marshal: MarshalOptions,
}

impl JobRequest {
    pub fn new(region: Region, count: usize, targets: Vec<String>) -> Self {
        JobRequest {
            region,
            count,
            per_device_limit: None,
            selector: SelectorKind::Topsis,
            criteria: None,
            targets,
            source: default_source(),
            fetch_limit: None,
            seed: 0,
            marshal: MarshalOptions::default(),
        }
    }

    pub fn criteria(&self) -> Vec<CriterionSpec> {
        self.criteria.clone().unwrap_or_else(default_criteria)
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self, known_sources: &[String]) -> Result<(), DeployError> {
        let mut fields = BTreeMap::new();
        if self.count == 0 {
            fields.insert("count".to_string(), "must be at least 1".to_string());
        }
        if self.targets.is_empty() {
            fields.insert(
                "targets".into(),
                "at least one target device is required".into(),
            );
        }
        for t in &self.targets {
            if !(t.starts_with("http://") || t.starts_with("https://")) {
                fields.insert("targets".into(), format!("`{t}` is not an http(s) url"));
            }
        }
        if self.per_device_limit == Some(0) {
            fields.insert("per_device_limit".into(), "must be at least 1".into());
        }
        if self.fetch_limit == Some(0) {
            fields.insert("fetch_limit".into(), "must be at least 1".into());
        }
        if !known_sources.iter().any(|s| s == &self.source) {
            fields.insert("source".into(), format!("unknown source `{}`", self.source));
        }
        if let Some(criteria) = &self.criteria {
            let mut seen = HashSet::new();
            if criteria.is_empty() {
                fields.insert("criteria".into(), "must not be empty".into());
            }
            for c in criteria {
                if !ContextVector::FIELDS.contains(&c.name.as_str()) {
                    fields.insert("criteria".into(), format!("unknown criterion `{}`", c.name));
                } else if !seen.insert(c.name.as_str()) {
                    fields.insert(
                        "criteria".into(),
                        format!("duplicate criterion `{}`", c.name),
                    );
                }
            }
        }
        if self.marshal.history_hours == 0 {
            fields.insert("marshal.history_hours".into(), "must be at least 1".into());
        }
        if fields.is_empty() {
            Ok(())
        } else {
            Err(DeployError::Validation(fields))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Created,
    Fetching,
    Selecting,
    Marshaling,
    Deploying,
    Complete,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Complete | JobState::Failed)
    }

    fn ordinal(self) -> u8 {
        match self {
            JobState::Created => 0,
            JobState::Fetching => 1,
            JobState::Selecting => 2,
            JobState::Marshaling => 3,
            JobState::Deploying => 4,
            JobState::Complete => 5,
            JobState::Failed => u8::MAX,
        }
    }

    /// Only the next state in line, or `Failed` from any active state.
    pub fn can_transition(self, to: JobState) -> bool {
        if self.is_terminal() {
            return false;
        }
        to == JobState::Failed || to.ordinal() == self.ordinal() + 1
    }
}

/// Phase durations in milliseconds; `None` until the phase finishes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub unmarshal_ms: Option<f64>,
    pub select_ms: Option<f64>,
    pub marshal_ms: Option<f64>,
    pub deploy_ms: Option<f64>,
}

impl PhaseTimings {
    pub fn is_empty(&self) -> bool {
        *self == PhaseTimings::default()
    }

    /// Sum of the four phases once all have finished.
    pub fn setup_ms(&self) -> Option<f64> {
        Some(self.unmarshal_ms? + self.select_ms? + self.marshal_ms? + self.deploy_ms?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AckState {
    Pending,
    Ok { files: usize, elapsed_ms: f64 },
    Failed { reason: String },
}

impl AckState {
    pub fn is_ok(&self) -> bool {
        matches!(self, AckState::Ok { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStatus {
    pub endpoint: String,
    pub descriptor_count: usize,
    #[serde(default)]
    pub archive_uri: Option<String>,
    #[serde(default)]
    pub archive_digest: Option<String>,
    #[serde(default)]
    pub archive_bytes: u64,
    pub ack: AckState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub phase: String,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployJob {
    pub id: String,
    pub request: JobRequest,
    pub state: JobState,
    #[serde(default)]
    pub failure: Option<JobFailure>,
    pub timings: PhaseTimings,
    /// Repository fetch time; recorded but not part of setup time.
    #[serde(default)]
    pub fetch_ms: Option<f64>,
    /// Sensors decoded from the repository response.
    #[serde(default)]
    pub available: Option<usize>,
    #[serde(default)]
    pub skipped: usize,
    #[serde(default)]
    pub selected: Option<usize>,
    /// Descriptors left out by the per-device limit.
    #[serde(default)]
    pub dropped: usize,
    pub devices: Vec<DeviceStatus>,
}

impl DeployJob {
    pub fn new(id: String, request: JobRequest) -> Self {
        let devices = request
            .targets
            .iter()
            .map(|endpoint| DeviceStatus {
                endpoint: endpoint.clone(),
                descriptor_count: 0,
                archive_uri: None,
                archive_digest: None,
                archive_bytes: 0,
                ack: AckState::Pending,
            })
            .collect();
        DeployJob {
            id,
            request,
            state: JobState::Created,
            failure: None,
            timings: PhaseTimings::default(),
            fetch_ms: None,
            available: None,
            skipped: 0,
            selected: None,
            dropped: 0,
            devices,
        }
    }

    pub fn transition(&mut self, to: JobState) -> Result<(), DeployError> {
        if !self.state.can_transition(to) {
            return Err(DeployError::InvalidTransition {
                from: self.state,
                to,
            });
        }
        if to == JobState::Complete && !self.devices.iter().all(|d| d.ack.is_ok()) {
            return Err(DeployError::InvalidTransition {
                from: self.state,
                to,
            });
        }
        self.state = to;
        Ok(())
    }

    pub fn fail(&mut self, phase: &str, cause: impl Into<String>) {
        if !self.state.is_terminal() {
            self.state = JobState::Failed;
        }
        self.failure = Some(JobFailure {
            phase: phase.into(),
            cause: cause.into(),
        });
    }

    pub fn deployed_descriptors(&self) -> usize {
        self.devices.iter().map(|d| d.descriptor_count).sum()
    }
}

/// Response body of `GET /jobs/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    #[serde(flatten)]
    pub job: DeployJob,
    pub setup_ms: Option<f64>,
}

impl From<DeployJob> for JobView {
    fn from(job: DeployJob) -> Self {
        JobView {
            setup_ms: job.timings.setup_ms(),
            job,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> JobRequest {
        JobRequest::new(Region::europe(), 130, vec!["http://127.0.0.1:9000".into()])
    }

    #[test]
    fn valid_request_passes() {
        request().validate(&["synthetic".into()]).unwrap();
    }

    #[test]
    fn zero_count_fails_validation() {
        let mut r = request();
        r.count = 0;
        r.targets.clear();
        match r.validate(&["synthetic".into()]) {
            Err(DeployError::Validation(fields)) => {
                assert!(fields.contains_key("count"));
                assert!(fields.contains_key("targets"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_source_and_criterion() {
        let mut r = request();
        r.source = "nowhere".into();
        r.criteria = Some(vec![CriterionSpec::maximize("colour")]);
        let Err(DeployError::Validation(fields)) = r.validate(&["synthetic".into()]) else {
            panic!("expected validation failure");
        };
        assert!(fields.contains_key("source"));
        assert!(fields.contains_key("criteria"));
    }

    #[test]
    fn request_json_defaults() {
        let json = serde_json::json!({
            "region": Region::europe(),
            "count": 5,
            "targets": ["http://a"],
        });
        let r: JobRequest = serde_json::from_value(json).unwrap();
        assert_eq!(r.selector, SelectorKind::Topsis);
        assert_eq!(r.source, "synthetic");
        assert_eq!(r.marshal.history_hours, 168);
        assert_eq!(r.criteria().len(), 6);
    }

    #[test]
    fn states_advance_in_order() {
        use JobState::*;
        let path = [
            Created, Fetching, Selecting, Marshaling, Deploying, Complete,
        ];
        for w in path.windows(2) {
            assert!(w[0].can_transition(w[1]));
        }
        assert!(!Created.can_transition(Selecting));
        assert!(!Marshaling.can_transition(Fetching));
        for s in &path[..5] {
            assert!(s.can_transition(Failed));
        }
        assert!(!Complete.can_transition(Failed));
        assert!(!Failed.can_transition(Fetching));
    }

    #[test]
    fn complete_requires_every_ack() {
        let mut job = DeployJob::new("j".into(), request());
        for s in [
            JobState::Fetching,
            JobState::Selecting,
            JobState::Marshaling,
            JobState::Deploying,
        ] {
            job.transition(s).unwrap();
        }
        assert!(job.transition(JobState::Complete).is_err());
        job.devices[0].ack = AckState::Ok {
            files: 1,
            elapsed_ms: 1.0,
        };
        job.transition(JobState::Complete).unwrap();
    }

    #[test]
    fn setup_is_sum_of_phases() {
        let mut t = PhaseTimings::default();
        assert!(t.is_empty());
        t.unmarshal_ms = Some(1.5);
        t.select_ms = Some(2.0);
        t.marshal_ms = Some(3.25);
        assert_eq!(t.setup_ms(), None);
        t.deploy_ms = Some(4.0);
        assert_eq!(t.setup_ms(), Some(10.75));
    }

    #[test]
    fn ack_state_json() {
        let ok = serde_json::to_value(AckState::Ok {
            files: 3,
            elapsed_ms: 1.0,
        })
        .unwrap();
        assert_eq!(ok["status"], "ok");
        let failed = serde_json::to_value(AckState::Failed {
            reason: "timeout".into(),
        })
        .unwrap();
        assert_eq!(
            failed,
            serde_json::json!({"status": "failed", "reason": "timeout"})
        );
    }
}
