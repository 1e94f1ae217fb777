//! HTTP interface of the orchestrator.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use sensedeploy_core::repository::{unmarshal, RepositoryQuery};
use sensedeploy_core::{GenericSensor, Region, RepositoryError};

use crate::error::DeployError;
use crate::job::{JobRequest, JobView};
use crate::orchestrator::Orchestrator;

pub const GZIP_MEDIA_TYPE: &str = "application/gzip";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedJob {
    pub id: String,
}

/// Query string of `GET /regions/sensors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewQuery {
    pub min_lon: f64,
    pub max_lon: f64,
    pub min_lat: f64,
    pub max_lat: f64,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub source: Option<String>,
}

impl PreviewQuery {
    pub fn for_region(region: &Region) -> Self {
        PreviewQuery {
            min_lon: region.min_lon(),
            max_lon: region.max_lon(),
            min_lat: region.min_lat(),
            max_lat: region.max_lat(),
            limit: None,
            source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPreview {
    pub available: usize,
    pub skipped: usize,
    pub sensors: Vec<GenericSensor>,
}

fn error(status: StatusCode, code: &str, detail: serde_json::Value) -> Response {
    (status, Json(json!({ "error": code, "detail": detail }))).into_response()
}

impl IntoResponse for DeployError {
    fn into_response(self) -> Response {
        match self {
            DeployError::Validation(fields) => {
                error(StatusCode::BAD_REQUEST, "validation-failed", json!(fields))
            }
            DeployError::UnknownJob(id) => error(StatusCode::NOT_FOUND, "unknown-job", json!(id)),
            other => error(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                json!(other.to_string()),
            ),
        }
    }
}

async fn create_job(
    State(orch): State<Arc<Orchestrator>>,
    Json(request): Json<JobRequest>,
) -> Result<(StatusCode, Json<CreatedJob>), DeployError> {
    let id = orch.submit(request)?;
    Ok((StatusCode::CREATED, Json(CreatedJob { id })))
}

async fn job_status(
    State(orch): State<Arc<Orchestrator>>,
    Path(id): Path<String>,
) -> Result<Json<JobView>, DeployError> {
    Ok(Json(orch.status(&id)?.into()))
}

async fn preview(State(orch): State<Arc<Orchestrator>>, Query(q): Query<PreviewQuery>) -> Response {
    let region = match Region::from_bounds(q.min_lon, q.max_lon, q.min_lat, q.max_lat) {
        Ok(r) => r,
        Err(e) => {
            return error(
                StatusCode::BAD_REQUEST,
                "invalid-region",
                json!(e.to_string()),
            )
        }
    };
    let name = q.source.unwrap_or_else(|| {
        if orch.source("fixture").is_some() {
            "fixture"
        } else {
            "synthetic"
        }
        .to_string()
    });
    let Some(source) = orch.source(&name) else {
        return error(StatusCode::BAD_REQUEST, "unknown-source", json!(name));
    };
    let mut query = RepositoryQuery::new(region, name);
    query.limit = q.limit;
    let result =
        tokio::task::spawn_blocking(move || source.send(&query).and_then(|b| unmarshal(&b))).await;
    match result {
        Ok(Ok(decoded)) => Json(SensorPreview {
            available: decoded.sensors.len(),
            skipped: decoded.skipped,
            sensors: decoded.sensors,
        })
        .into_response(),
        Ok(Err(RepositoryError::NoFixtureForRegion)) => error(
            StatusCode::NOT_FOUND,
            "no-fixture-for-region",
            serde_json::Value::Null,
        ),
        Ok(Err(RepositoryError::InvalidQuery(m))) => {
            error(StatusCode::BAD_REQUEST, "invalid-query", json!(m))
        }
        Ok(Err(e)) => error(StatusCode::BAD_GATEWAY, "repository", json!(e.to_string())),
        Err(e) => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            json!(e.to_string()),
        ),
    }
}

fn plain(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn artifact(
    State(orch): State<Arc<Orchestrator>>,
    Path((job, file)): Path<(String, String)>,
) -> Response {
    let device = file
        .strip_suffix(".tar.gz")
        .and_then(|d| d.parse::<usize>().ok());
    let (true, Some(device)) = (plain(&job), device) else {
        return error(
            StatusCode::NOT_FOUND,
            "unknown-artifact",
            json!(format!("{job}/{file}")),
        );
    };
    match tokio::fs::read(orch.artifact_path(&job, device)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, GZIP_MEDIA_TYPE)], bytes).into_response(),
        Err(_) => error(
            StatusCode::NOT_FOUND,
            "unknown-artifact",
            json!(format!("{job}/{file}")),
        ),
    }
}

pub fn router(orch: Arc<Orchestrator>) -> Router {
    Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(job_status))
        .route("/regions/sensors", get(preview))
        .route("/artifacts/{job}/{file}", get(artifact))
        .with_state(orch)
}

/// A running orchestrator API; stops serving when dropped.
pub struct ServerHandle {
    pub base_url: String,
    pub addr: SocketAddr,
    pub orchestrator: Arc<Orchestrator>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Binds `addr` (port 0 for any free port), starts serving and, unless
/// one was configured, publishes archives under the bound address.
pub async fn serve(orch: Arc<Orchestrator>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let base_url = format!("http://{addr}");
    orch.set_public_base_url(&base_url);
    let (tx, rx) = oneshot::channel();
    let app = router(orch.clone());
    tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(ServerHandle {
        base_url,
        addr,
        orchestrator: orch,
        shutdown: Some(tx),
    })
}
