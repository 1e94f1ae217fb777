//! Executes an experiment design trial by trial against a local orchestrator.

use std::fs;
use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::info;

use sensedeploy_core::Region;
use sensedeploy_deploy::{
    serve, spawn_fleet, DeployJob, JobRequest, JobState, Orchestrator, OrchestratorConfig,
};

use crate::design::{ExperimentDesign, Trial};
use crate::error::BenchError;

/// One row of the output CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub devices: usize,
    pub sensors: usize,
    pub rep: usize,
    pub unmarshal_ms: f64,
    pub select_ms: f64,
    pub marshal_ms: f64,
    pub deploy_ms: f64,
    pub setup_ms: f64,
    /// Archive bytes sent, averaged over the devices.
    pub bytes_per_device: f64,
    /// Per-device archive digests; not written to CSV.
    #[serde(skip)]
    pub digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub devices: usize,
    pub sensors: usize,
    pub rep: usize,
    pub phase: String,
    pub cause: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignRun {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    /// Scratch space; every trial cleans up after itself.
    pub work_dir: PathBuf,
    pub bind: SocketAddr,
    /// Archive URI base reachable from remote agents.
    pub public_base_url: Option<String>,
    /// Use these agents instead of spawning local fleets.
    pub remote_targets: Option<Vec<String>>,
    pub ack_timeout: Duration,
}

impl HarnessConfig {
    pub fn local(work_dir: impl Into<PathBuf>) -> Self {
        HarnessConfig {
            work_dir: work_dir.into(),
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            public_base_url: None,
            remote_targets: None,
            ack_timeout: sensedeploy_deploy::orchestrator::DEFAULT_ACK_TIMEOUT,
        }
    }
}

/// Where trial scratch directories should live.
///
/// `SENSEDEPLOY_SCRATCH` wins; otherwise `/dev/shm` when it is a writable
/// directory, else the system temp dir. Trials write and delete hundreds of
/// thousands of small files, which some disk-backed filesystems handle far
/// slower than the pipeline itself and would swamp the timings.
pub fn scratch_root() -> PathBuf {
    if let Some(dir) = std::env::var_os("SENSEDEPLOY_SCRATCH") {
        return PathBuf::from(dir);
    }
    let shm = PathBuf::from("/dev/shm");
    let writable = fs::metadata(&shm)
        .map(|m| m.is_dir() && !m.permissions().readonly())
        .unwrap_or(false);
    if writable && tempfile_probe(&shm) {
        return shm;
    }
    std::env::temp_dir()
}

fn tempfile_probe(dir: &std::path::Path) -> bool {
    let probe = dir.join(format!(".sensedeploy-probe-{}", std::process::id()));
    let ok = fs::write(&probe, b"").is_ok();
    let _ = fs::remove_file(&probe);
    ok
}

fn to_record(trial: &Trial, job: &DeployJob) -> Result<TrialRecord, TrialFailure> {
    let failure = |phase: &str, cause: String| TrialFailure {
        devices: trial.devices,
        sensors: trial.sensors,
        rep: trial.rep,
        phase: phase.into(),
        cause,
    };
    if job.state != JobState::Complete {
        return Err(match &job.failure {
            Some(f) => failure(&f.phase, f.cause.clone()),
            None => failure("unknown", format!("ended in {:?}", job.state)),
        });
    }
    let t = job.timings;
    let (Some(u), Some(s), Some(m), Some(d)) =
        (t.unmarshal_ms, t.select_ms, t.marshal_ms, t.deploy_ms)
    else {
        return Err(failure(
            "timing",
            "complete job without all phase timings".into(),
        ));
    };
    let total: u64 = job.devices.iter().map(|d| d.archive_bytes).sum();
    Ok(TrialRecord {
        devices: trial.devices,
        sensors: trial.sensors,
        rep: trial.rep,
        unmarshal_ms: u,
        select_ms: s,
        marshal_ms: m,
        deploy_ms: d,
        setup_ms: u + s + m + d,
        bytes_per_device: total as f64 / trial.devices as f64,
        digests: job
            .devices
            .iter()
            .filter_map(|d| d.archive_digest.clone())
            .collect(),
    })
}

/// Runs every trial sequentially, each against a fresh agent fleet, and
/// calls `on_trial` after each one.
pub async fn run_design(
    design: &ExperimentDesign,
    config: &HarnessConfig,
    mut on_trial: impl FnMut(&Trial, &Result<TrialRecord, TrialFailure>),
) -> Result<DesignRun, BenchError> {
    design.validate().map_err(BenchError::InvalidDesign)?;
    let max_devices = design.device_levels.iter().copied().max().unwrap_or(1);
    if let Some(remote) = &config.remote_targets {
        if remote.len() < max_devices {
            return Err(BenchError::NotEnoughEndpoints {
                needed: max_devices,
                available: remote.len(),
            });
        }
    }
    fs::create_dir_all(&config.work_dir)?;
    let mut orch_config = OrchestratorConfig::new(config.work_dir.join("orchestrator"));
    orch_config.public_base_url = config.public_base_url.clone();
    orch_config.ack_timeout = config.ack_timeout;
    orch_config.keep_descriptors = false;
    let server = serve(Orchestrator::new(orch_config)?, config.bind).await?;
    let orch = server.orchestrator.clone();

    let mut run = DesignRun::default();
    for trial in design.trials() {
        let fleet_dir = config.work_dir.join(format!(
            "fleet-{}-{}-{}",
            trial.devices, trial.sensors, trial.rep
        ));
        let fleet = match &config.remote_targets {
            Some(_) => None,
            None => Some(spawn_fleet(trial.devices, 0, &fleet_dir).await?),
        };
        let targets = match (&fleet, &config.remote_targets) {
            (Some(f), _) => f.endpoints(),
            (None, Some(remote)) => remote[..trial.devices].to_vec(),
            (None, None) => unreachable!(),
        };
        let mut request = JobRequest::new(Region::world(), trial.sensors, targets);
        request.seed = trial.seed;
        let job = orch.run(request).await?;

        drop(fleet);
        let _ = fs::remove_dir_all(&fleet_dir);
        let _ = fs::remove_dir_all(orch.artifacts_dir().join(&job.id));

        let outcome = to_record(&trial, &job);
        on_trial(&trial, &outcome);
        match outcome {
            Ok(r) => {
                info!(
                    devices = r.devices,
                    sensors = r.sensors,
                    rep = r.rep,
                    setup_ms = r.setup_ms,
                    "trial"
                );
                run.records.push(r);
            }
            Err(f) => run.failures.push(f),
        }
    }
    server.shutdown();
    Ok(run)
}

/// `run_design` on a private runtime.
pub fn run_design_blocking(
    design: &ExperimentDesign,
    config: &HarnessConfig,
    on_trial: impl FnMut(&Trial, &Result<TrialRecord, TrialFailure>),
) -> Result<DesignRun, BenchError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(run_design(design, config, on_trial))
}

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_failures<W: Write>(out: W, failures: &[TrialFailure]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for f in failures {
        w.serialize(f)?;
    }
    w.flush()?;
    Ok(())
}
