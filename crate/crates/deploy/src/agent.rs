//! Device agent: stands in for a target middleware host. It downloads a
//! descriptor archive named in a manifest, verifies it, installs the files
//! under `<deploy_dir>/<job_id>/` and acknowledges.
//!
//! Deployments run one at a time per agent, in arrival order. Files are
//! extracted into a staging directory and renamed into place only after
//! every check passes, so a failed deployment leaves no job directory.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tracing::{info, warn};

use sensedeploy_core::archive::{read_entries, sha256_hex};
use sensedeploy_core::marshal::check_well_formed;

use crate::error::AgentError;
use crate::manifest::{Ack, DeployManifest, FailureReason};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub deployed_jobs: BTreeMap<String, usize>,
    pub deploy_dir: PathBuf,
    pub busy: bool,
}

pub struct DeviceAgent {
    state: Mutex<AgentState>,
    turn: tokio::sync::Mutex<()>,
    client: reqwest::Client,
}

impl DeviceAgent {
    pub fn new(
        deploy_dir: impl Into<PathBuf>,
        download_timeout: Duration,
    ) -> Result<Self, AgentError> {
        let deploy_dir = deploy_dir.into();
        fs::create_dir_all(&deploy_dir)?;
        let client = reqwest::Client::builder()
            .timeout(download_timeout)
            .build()
            .map_err(|e| AgentError::Io(std::io::Error::other(e)))?;
        Ok(DeviceAgent {
            state: Mutex::new(AgentState {
                deploy_dir,
                ..AgentState::default()
            }),
            turn: tokio::sync::Mutex::new(()),
            client,
        })
    }

    pub fn state(&self) -> AgentState {
        self.state.lock().unwrap().clone()
    }

    pub fn deploy_dir(&self) -> PathBuf {
        self.state.lock().unwrap().deploy_dir.clone()
    }

    /// Handles one manifest end to end and returns the acknowledgement.
    pub async fn receive_manifest(&self, manifest: DeployManifest) -> Ack {
        // tokio's mutex is fair, so queued manifests are served FIFO
        let _turn = self.turn.lock().await;
        self.state.lock().unwrap().busy = true;
        let started = Instant::now();
        let result = self.deploy(&manifest).await;
        let elapsed_ms = started.elapsed().as_secs_f64() * 1000.0;
        let mut state = self.state.lock().unwrap();
        state.busy = false;
        match result {
            Ok(files) => {
                state.deployed_jobs.insert(manifest.job_id.clone(), files);
                info!(job = %manifest.job_id, files, "deployed");
                Ack::Ok { files, elapsed_ms }
            }
            Err((reason, detail)) => {
                state.deployed_jobs.remove(&manifest.job_id);
                warn!(job = %manifest.job_id, reason = reason.as_str(), %detail, "deployment failed");
                Ack::failed(reason, detail)
            }
        }
    }

    async fn deploy(&self, manifest: &DeployManifest) -> Result<usize, (FailureReason, String)> {
        if !is_safe_component(&manifest.job_id) {
            return Err((
                FailureReason::InvalidManifest,
                format!("bad job id `{}`", manifest.job_id),
            ));
        }
        let deploy_dir = self.deploy_dir();
        let target = deploy_dir.join(&manifest.job_id);
        let staging = deploy_dir.join(format!(".staging-{}", manifest.job_id));

        let bytes = match self.download(&manifest.archive_uri).await {
            Ok(b) => b,
            Err(detail) => {
                discard(&target);
                return Err((FailureReason::DownloadFailed, detail));
            }
        };
        let digest = sha256_hex(&bytes);
        if !digest.eq_ignore_ascii_case(&manifest.archive_digest) {
            discard(&target);
            return Err((
                FailureReason::DigestMismatch,
                format!("expected {}, got {digest}", manifest.archive_digest),
            ));
        }

        let expected = manifest.descriptor_count;
        tokio::task::spawn_blocking(move || {
            let result = install(&bytes, &staging, &target, expected);
            if result.is_err() {
                discard(&staging);
                discard(&target);
            }
            result
        })
        .await
        .map_err(|e| (FailureReason::ExtractionFailed, e.to_string()))?
    }

    async fn download(&self, uri: &str) -> Result<Vec<u8>, String> {
        let resp = self
            .client
            .get(uri)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("GET {uri}: {}", resp.status()));
        }
        Ok(resp.bytes().await.map_err(|e| e.to_string())?.to_vec())
    }
}

fn is_safe_component(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn discard(dir: &Path) {
    if dir.exists() {
        let _ = fs::remove_dir_all(dir);
    }
}

fn install(
    bytes: &[u8],
    staging: &Path,
    target: &Path,
    expected: usize,
) -> Result<usize, (FailureReason, String)> {
    let extraction = |e: std::io::Error| (FailureReason::ExtractionFailed, e.to_string());
    let entries =
        read_entries(bytes).map_err(|e| (FailureReason::ExtractionFailed, e.to_string()))?;
    if entries.len() != expected {
        return Err((
            FailureReason::CountMismatch,
            format!(
                "manifest lists {expected} descriptors, archive holds {}",
                entries.len()
            ),
        ));
    }
    for (name, content) in &entries {
        let text = std::str::from_utf8(content)
            .map_err(|e| (FailureReason::XmlInvalid, format!("{name}: {e}")))?;
        check_well_formed(text).map_err(|e| (FailureReason::XmlInvalid, format!("{name}: {e}")))?;
    }
    discard(staging);
    fs::create_dir_all(staging).map_err(extraction)?;
    for (name, content) in &entries {
        fs::write(staging.join(name), content).map_err(extraction)?;
    }
    let written = fs::read_dir(staging).map_err(extraction)?.count();
    if written != expected {
        return Err((
            FailureReason::CountMismatch,
            format!("{written} files on disk, expected {expected}"),
        ));
    }
    discard(target);
    fs::rename(staging, target).map_err(extraction)?;
    Ok(written)
}

async fn deploy_handler(
    State(agent): State<Arc<DeviceAgent>>,
    Json(manifest): Json<DeployManifest>,
) -> Json<Ack> {
    Json(agent.receive_manifest(manifest).await)
}

async fn health_handler(State(agent): State<Arc<DeviceAgent>>) -> Json<AgentState> {
    Json(agent.state())
}

pub fn router(agent: Arc<DeviceAgent>) -> Router {
    Router::new()
        .route("/deploy", post(deploy_handler))
        .route("/health", get(health_handler))
        .with_state(agent)
}

/// A running agent; stops serving when dropped.
pub struct AgentHandle {
    pub endpoint: String,
    pub addr: SocketAddr,
    pub agent: Arc<DeviceAgent>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl Drop for AgentHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

pub async fn bind(port: u16) -> Result<TcpListener, AgentError> {
    TcpListener::bind(("127.0.0.1", port)).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            AgentError::PortInUse(port)
        } else {
            AgentError::Io(e)
        }
    })
}

/// Serves `agent` on an already bound listener.
pub fn serve_agent(
    listener: TcpListener,
    agent: Arc<DeviceAgent>,
) -> Result<AgentHandle, AgentError> {
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel();
    let app = router(agent.clone());
    tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(AgentHandle {
        endpoint: format!("http://{addr}"),
        addr,
        agent,
        shutdown: Some(tx),
    })
}

pub async fn spawn_agent(
    port: u16,
    deploy_dir: impl Into<PathBuf>,
    download_timeout: Duration,
) -> Result<AgentHandle, AgentError> {
    let listener = bind(port).await?;
    serve_agent(
        listener,
        Arc::new(DeviceAgent::new(deploy_dir, download_timeout)?),
    )
}

/// Independent agents, each with its own deploy directory under `root`.
pub struct Fleet {
    pub agents: Vec<AgentHandle>,
}

impl Fleet {
    pub fn endpoints(&self) -> Vec<String> {
        self.agents.iter().map(|a| a.endpoint.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// Starts `count` agents on consecutive ports from `base_port`
/// (`0` picks free ports).
pub async fn spawn_fleet(count: usize, base_port: u16, root: &Path) -> Result<Fleet, AgentError> {
    let mut agents = Vec::with_capacity(count);
    for k in 0..count {
        let port = if base_port == 0 {
            0
        } else {
            base_port + k as u16
        };
        let dir = root.join(format!("agent-{k:02}"));
        agents.push(spawn_agent(port, dir, Duration::from_secs(120)).await?);
    }
    Ok(Fleet { agents })
}
