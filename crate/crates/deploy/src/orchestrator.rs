//! Runs deploy jobs: fetch, unmarshal, select, marshal, then compress one
//! archive per device, publish it and collect acknowledgements.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use futures::future::join_all;
use tracing::{info, warn};

use sensedeploy_core::archive::compress;
use sensedeploy_core::marshal::{marshal_batch_into, ArtifactStore, VirtualSensorDescriptor};
use sensedeploy_core::repository::{
    unmarshal, FixtureRepository, RawBatch, RepositoryQuery, RepositorySource, SyntheticRepository,
};
use sensedeploy_core::selector::{select_random_indices, select_top_indices, SelectorKind};
use sensedeploy_core::GenericSensor;

use crate::error::DeployError;
use crate::job::{AckState, DeployJob, JobRequest, JobState};
use crate::manifest::{Ack, DeployManifest};
use crate::partition::partition;
use crate::store::JobStore;

pub const DEFAULT_ACK_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct OrchestratorConfig {
    /// Holds `jobs/`, `descriptors/` and `artifacts/`.
    pub data_dir: PathBuf,
    /// Registers the `fixture` source when set.
    pub fixture_dir: Option<PathBuf>,
    /// Base of archive URIs handed to devices. Filled in by `api::serve`
    /// when left empty.
    pub public_base_url: Option<String>,
    pub ack_timeout: Duration,
    /// Keep `descriptors/<job>/` after the job ends.
    pub keep_descriptors: bool,
}

impl OrchestratorConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        OrchestratorConfig {
            data_dir: data_dir.into(),
            fixture_dir: None,
            public_base_url: None,
            ack_timeout: DEFAULT_ACK_TIMEOUT,
            keep_descriptors: true,
        }
    }
}

pub struct Orchestrator {
    config: OrchestratorConfig,
    store: JobStore,
    sources: BTreeMap<String, Arc<dyn RepositorySource>>,
    descriptors: ArtifactStore,
    artifacts_dir: PathBuf,
    base_url: OnceLock<String>,
    client: reqwest::Client,
}

struct PhaseError {
    phase: &'static str,
    cause: String,
}

impl PhaseError {
    fn new(phase: &'static str, cause: impl ToString) -> Self {
        PhaseError {
            phase,
            cause: cause.to_string(),
        }
    }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let started = Instant::now();
    let out = f();
    (out, started.elapsed().as_secs_f64() * 1000.0)
}

async fn blocking<R: Send + 'static>(
    phase: &'static str,
    f: impl FnOnce() -> R + Send + 'static,
) -> Result<R, PhaseError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| PhaseError::new(phase, e))
}

impl Orchestrator {
    pub fn new(config: OrchestratorConfig) -> Result<Arc<Self>, DeployError> {
        let store = JobStore::open(&config.data_dir.join("jobs"))?;
        let artifacts_dir = config.data_dir.join("artifacts");
        fs::create_dir_all(&artifacts_dir)?;
        let mut sources: BTreeMap<String, Arc<dyn RepositorySource>> = BTreeMap::new();
        sources.insert("synthetic".into(), Arc::new(SyntheticRepository::default()));
        if let Some(dir) = &config.fixture_dir {
            sources.insert("fixture".into(), Arc::new(FixtureRepository::new(dir)));
        }
        let base_url = OnceLock::new();
        if let Some(url) = &config.public_base_url {
            let _ = base_url.set(url.trim_end_matches('/').to_string());
        }
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| DeployError::Store(std::io::Error::other(e)))?;
        Ok(Arc::new(Orchestrator {
            descriptors: ArtifactStore::new(config.data_dir.join("descriptors")),
            config,
            store,
            sources,
            artifacts_dir,
            base_url,
            client,
        }))
    }

    /// Like `new` with extra sources registered under their own names.
    pub fn with_sources(
        config: OrchestratorConfig,
        extra: Vec<Arc<dyn RepositorySource>>,
    ) -> Result<Arc<Self>, DeployError> {
        let mut orchestrator = Orchestrator::new(config)?;
        let inner = Arc::get_mut(&mut orchestrator).expect("fresh orchestrator is unshared");
        for source in extra {
            inner.sources.insert(source.name().to_string(), source);
        }
        Ok(orchestrator)
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn store(&self) -> &JobStore {
        &self.store
    }

    pub fn source_names(&self) -> Vec<String> {
        self.sources.keys().cloned().collect()
    }

    pub fn source(&self, name: &str) -> Option<Arc<dyn RepositorySource>> {
        self.sources.get(name).cloned()
    }

    /// Sets the archive URI base once; later calls are ignored.
    pub fn set_public_base_url(&self, url: &str) {
        let _ = self.base_url.set(url.trim_end_matches('/').to_string());
    }

    pub fn public_base_url(&self) -> Option<&str> {
        self.base_url.get().map(String::as_str)
    }

    pub fn artifact_path(&self, job_id: &str, device: usize) -> PathBuf {
        self.artifacts_dir
            .join(job_id)
            .join(format!("{device}.tar.gz"))
    }

    pub fn artifacts_dir(&self) -> &Path {
        &self.artifacts_dir
    }

    pub fn descriptor_dir(&self, job_id: &str) -> PathBuf {
        self.descriptors.job_dir(job_id)
    }

    /// Validates and records a job in the `created` state.
    pub fn create_job(&self, request: JobRequest) -> Result<DeployJob, DeployError> {
        request.validate(&self.source_names())?;
        let job = DeployJob::new(uuid::Uuid::new_v4().to_string(), request);
        self.store.insert(job.clone())?;
        info!(job = %job.id, "created");
        Ok(job)
    }

    /// Creates a job and runs it in the background.
    pub fn submit(self: &Arc<Self>, request: JobRequest) -> Result<String, DeployError> {
        let job = self.create_job(request)?;
        let me = Arc::clone(self);
        let id = job.id.clone();
        tokio::spawn(async move {
            me.run_pipeline(&id).await;
        });
        Ok(job.id)
    }

    pub fn status(&self, id: &str) -> Result<DeployJob, DeployError> {
        self.store.get(id)
    }

    /// Polls until the job reaches a terminal state.
    pub async fn wait(&self, id: &str, poll: Duration) -> Result<DeployJob, DeployError> {
        loop {
            let job = self.store.get(id)?;
            if job.state.is_terminal() {
                return Ok(job);
            }
            tokio::time::sleep(poll).await;
        }
    }

    /// Creates a job and runs it to completion on the current task.
    pub async fn run(&self, request: JobRequest) -> Result<DeployJob, DeployError> {
        let job = self.create_job(request)?;
        Ok(self.run_pipeline(&job.id).await)
    }

    /// Drives a `created` job to `complete` or `failed` and returns the
    /// final record.
    pub async fn run_pipeline(&self, id: &str) -> DeployJob {
        if let Err(e) = self.execute(id).await {
            warn!(job = %id, phase = e.phase, cause = %e.cause, "failed");
            let _ = self.store.update(id, |j| {
                j.fail(e.phase, e.cause);
                Ok(())
            });
        }
        if !self.config.keep_descriptors {
            let _ = self.descriptors.remove(id);
        }
        self.store
            .get(id)
            .expect("job exists while its pipeline runs")
    }

    fn advance(
        &self,
        id: &str,
        phase: &'static str,
        to: JobState,
    ) -> Result<DeployJob, PhaseError> {
        self.store
            .update(id, |j| {
                j.transition(to)?;
                Ok(j.clone())
            })
            .map_err(|e| PhaseError::new(phase, e))
    }

    fn record(
        &self,
        id: &str,
        phase: &'static str,
        f: impl FnOnce(&mut DeployJob),
    ) -> Result<(), PhaseError> {
        self.store
            .update(id, |j| {
                f(j);
                Ok(())
            })
            .map_err(|e| PhaseError::new(phase, e))
    }

    async fn execute(&self, id: &str) -> Result<(), PhaseError> {
        let job = self.advance(id, "fetch", JobState::Fetching)?;
        let request = job.request.clone();

        let batch = self.fetch(&request).await?;
        self.record(id, "fetch", |j| j.fetch_ms = Some(batch.1))?;
        let batch = batch.0;

        let (decoded, unmarshal_ms) =
            blocking("unmarshal", move || timed(|| unmarshal(&batch))).await?;
        let decoded = decoded.map_err(|e| PhaseError::new("unmarshal", e))?;
        let available = decoded.sensors.len();
        self.record(id, "unmarshal", |j| {
            j.timings.unmarshal_ms = Some(unmarshal_ms);
            j.available = Some(available);
            j.skipped = decoded.skipped;
        })?;

        self.advance(id, "select", JobState::Selecting)?;
        let sensors = decoded.sensors;
        let req = request.clone();
        let (selected, select_ms) =
            blocking("select", move || timed(|| select(&sensors, &req))).await?;
        let selected = selected.map_err(|e| PhaseError::new("select", e))?;
        let selected_count = selected.len();
        self.record(id, "select", |j| {
            j.timings.select_ms = Some(select_ms);
            j.selected = Some(selected_count);
        })?;

        self.advance(id, "marshal", JobState::Marshaling)?;
        let store = self.descriptors.clone();
        let job_id = id.to_string();
        let opts = request.marshal.clone();
        let (descriptors, marshal_ms) = blocking("marshal", move || {
            timed(|| marshal_batch_into(&store, &job_id, &selected, &opts))
        })
        .await?;
        let descriptors = descriptors.map_err(|e| PhaseError::new("marshal", e))?;
        self.record(id, "marshal", |j| j.timings.marshal_ms = Some(marshal_ms))?;

        self.advance(id, "deploy", JobState::Deploying)?;
        self.deploy(id, &request, descriptors).await
    }

    async fn fetch(&self, request: &JobRequest) -> Result<(RawBatch, f64), PhaseError> {
        let source = self.source(&request.source).ok_or_else(|| {
            PhaseError::new("fetch", format!("unknown source `{}`", request.source))
        })?;
        let mut query =
            RepositoryQuery::new(request.region, request.source.clone()).with_seed(request.seed);
        // a generating source would otherwise invent its default count
        query.limit = request
            .fetch_limit
            .or((request.source == "synthetic").then_some(request.count));
        let (batch, ms) = blocking("fetch", move || timed(|| source.send(&query))).await?;
        Ok((batch.map_err(|e| PhaseError::new("fetch", e))?, ms))
    }

    async fn deploy(
        &self,
        id: &str,
        request: &JobRequest,
        descriptors: Vec<VirtualSensorDescriptor>,
    ) -> Result<(), PhaseError> {
        let base_url = self
            .public_base_url()
            .ok_or_else(|| PhaseError::new("deploy", "no public base url for archives"))?
            .to_string();
        let started = Instant::now();

        let split = partition(descriptors, request.targets.len(), request.per_device_limit);
        let dropped = split.dropped;
        let dir = self.artifacts_dir.join(id);
        let job_id = id.to_string();
        // (descriptor count, digest, bytes) per device; `None` for empty shares
        let published: Vec<Option<(usize, String, u64)>> = blocking("deploy", move || {
            fs::create_dir_all(&dir)?;
            split
                .shares
                .iter()
                .enumerate()
                .map(|(k, share)| {
                    if share.is_empty() {
                        return Ok(None);
                    }
                    let archive = compress(share).map_err(std::io::Error::other)?;
                    fs::write(dir.join(format!("{k}.tar.gz")), &archive.bytes)?;
                    Ok(Some((
                        archive.entries,
                        archive.digest,
                        archive.bytes.len() as u64,
                    )))
                })
                .collect::<std::io::Result<Vec<_>>>()
        })
        .await?
        .map_err(|e: std::io::Error| PhaseError::new("deploy", format!("{job_id}: {e}")))?;

        let manifests: Vec<Option<DeployManifest>> = published
            .iter()
            .zip(&request.targets)
            .enumerate()
            .map(|(k, (p, endpoint))| {
                p.as_ref().map(|(count, digest, _)| DeployManifest {
                    job_id: id.to_string(),
                    device: endpoint.clone(),
                    archive_uri: format!("{base_url}/artifacts/{id}/{k}.tar.gz"),
                    archive_digest: digest.clone(),
                    descriptor_count: *count,
                })
            })
            .collect();
        self.record(id, "deploy", |j| {
            j.dropped = dropped;
            for ((device, p), m) in j.devices.iter_mut().zip(&published).zip(&manifests) {
                if let (Some((count, digest, bytes)), Some(m)) = (p, m) {
                    device.descriptor_count = *count;
                    device.archive_digest = Some(digest.clone());
                    device.archive_bytes = *bytes;
                    device.archive_uri = Some(m.archive_uri.clone());
                }
            }
        })?;

        let acks = join_all(manifests.into_iter().map(|m| self.notify(m))).await;
        let deploy_ms = started.elapsed().as_secs_f64() * 1000.0;

        let failed = acks.iter().filter(|a| !a.is_ok()).count();
        self.record(id, "deploy", |j| {
            j.timings.deploy_ms = Some(deploy_ms);
            for (device, ack) in j.devices.iter_mut().zip(acks) {
                device.ack = ack;
            }
        })?;
        if failed > 0 {
            return Err(PhaseError::new(
                "deploy",
                format!(
                    "{failed} of {} devices did not acknowledge",
                    request.targets.len()
                ),
            ));
        }
        self.advance(id, "deploy", JobState::Complete)?;
        info!(job = %id, deploy_ms, "complete");
        Ok(())
    }

    async fn notify(&self, manifest: Option<DeployManifest>) -> AckState {
        let Some(manifest) = manifest else {
            return AckState::Ok {
                files: 0,
                elapsed_ms: 0.0,
            };
        };
        let url = format!("{}/deploy", manifest.device.trim_end_matches('/'));
        let exchange = async {
            let resp = self.client.post(&url).json(&manifest).send().await?;
            resp.error_for_status()?.json::<Ack>().await
        };
        match tokio::time::timeout(self.config.ack_timeout, exchange).await {
            Err(_) => AckState::Failed {
                reason: "timeout".into(),
            },
            Ok(Err(e)) => AckState::Failed {
                reason: format!("unreachable: {e}"),
            },
            Ok(Ok(Ack::Failed { reason, .. })) => AckState::Failed {
                reason: reason.as_str().into(),
            },
            Ok(Ok(Ack::Ok { files, elapsed_ms })) if files == manifest.descriptor_count => {
                AckState::Ok { files, elapsed_ms }
            }
            Ok(Ok(Ack::Ok { files, .. })) => AckState::Failed {
                reason: format!(
                    "count-mismatch: acknowledged {files} of {}",
                    manifest.descriptor_count
                ),
            },
        }
    }
}

/// Picks up to `request.count` sensors, best first for TOPSIS.
pub fn select(
    sensors: &[GenericSensor],
    request: &JobRequest,
) -> Result<Vec<GenericSensor>, sensedeploy_core::SelectError> {
    let indices = match request.selector {
        SelectorKind::Topsis => select_top_indices(sensors, &request.criteria(), request.count)?,
        SelectorKind::Random => select_random_indices(sensors.len(), request.count, request.seed)?,
    };
    Ok(indices.into_iter().map(|i| sensors[i].clone()).collect())
}
