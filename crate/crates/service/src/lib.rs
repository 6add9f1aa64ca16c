//! Live annotation sessions over HTTP.
//!
//! ```text
//! POST /sessions                      create; 201 with id, first query, metrics
//! GET  /sessions                      list ids and status
//! GET  /sessions/{id}/query           current query document
//! POST /sessions/{id}/annotations     label + ranking; 200 with metrics
//! GET  /sessions/{id}/metrics         progress and learning curve
//! ```
//!
//! Each session has a single writer. A post that arrives while another one
//! for the same session is still being processed gets 409. Reads go to a
//! cached view and never wait on the writer.

mod error;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use alpp_core::dataset::{load_dataset, TabularDataset};
use alpp_core::{ExperimentConfig, Strategy};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub use error::ApiError;
pub use session::{
    read_snapshots, snapshot_path, write_snapshot, AnnotationPayload, CurvePoint, FeatureValue, LabelNames,
    MetricsDocument, QueryDocument, RecordedAnnotation, Session, Snapshot, Status, SNAPSHOT_VERSION,
};

/// Body of `POST /sessions`. Every field is optional; anything missing comes
/// from the server's configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: String,
    pub query: Option<QueryDocument>,
    pub metrics: MetricsDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionListing {
    pub id: String,
    pub status: Status,
    pub queries_done: usize,
}

#[derive(Debug, Clone)]
struct View {
    query: Option<QueryDocument>,
    metrics: MetricsDocument,
}

impl View {
    fn of(session: &Session) -> Self {
        Self {
            query: session.query_document().ok(),
            metrics: session.metrics_document(),
        }
    }
}

struct Entry {
    writer: Arc<tokio::sync::Mutex<Session>>,
    view: RwLock<View>,
}

impl Entry {
    fn new(session: Session) -> Self {
        let view = RwLock::new(View::of(&session));
        Self {
            writer: Arc::new(tokio::sync::Mutex::new(session)),
            view,
        }
    }

    fn view(&self) -> View {
        self.view.read().expect("view lock poisoned").clone()
    }

    fn set_view(&self, view: View) {
        *self.view.write().expect("view lock poisoned") = view;
    }
}

type DatasetKey = (PathBuf, String);

struct Inner {
    base: ExperimentConfig,
    state_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    datasets: Mutex<HashMap<DatasetKey, Arc<TabularDataset>>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Empty state with no persistence.
    pub fn in_memory(base: ExperimentConfig) -> Self {
        Self::build(base, None)
    }

    fn build(base: ExperimentConfig, state_dir: Option<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                base,
                state_dir,
                sessions: RwLock::new(HashMap::new()),
                datasets: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// Persist sessions under `state_dir`, restoring any snapshots already
    /// there. Snapshots that fail to restore are logged and skipped.
    /// Blocking: replays every recorded annotation.
    pub fn open(base: ExperimentConfig, state_dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        base.validate()?;
        let dir = state_dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| ApiError::internal(format!("cannot create state dir {}: {e}", dir.display())))?;
        let state = Self::build(base, Some(dir.clone()));
        let snapshots = read_snapshots(&dir)
            .map_err(|e| ApiError::internal(format!("cannot read state dir {}: {e}", dir.display())))?;
        for snapshot in snapshots {
            let id = snapshot.id.clone();
            let restored = state
                .dataset(&snapshot.config)
                .and_then(|ds| Session::restore(snapshot, &ds));
            match restored {
                Ok(session) => {
                    tracing::info!(session = %id, queries = session.run().queries_done(), "restored session");
                    state.insert(session);
                }
                Err(e) => tracing::warn!(session = %id, "cannot restore session: {}", e.message),
            }
        }
        Ok(state)
    }

    pub fn base_config(&self) -> &ExperimentConfig {
        &self.inner.base
    }

    pub fn state_dir(&self) -> Option<&Path> {
        self.inner.state_dir.as_deref()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.sessions.read().expect("sessions lock poisoned").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("sessions lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    fn insert(&self, session: Session) -> Arc<Entry> {
        let id = session.id().to_string();
        let entry = Arc::new(Entry::new(session));
        self.inner
            .sessions
            .write()
            .expect("sessions lock poisoned")
            .insert(id, entry.clone());
        entry
    }

    /// Load (or reuse) the dataset a config points at.
    fn dataset(&self, config: &ExperimentConfig) -> Result<Arc<TabularDataset>, ApiError> {
        let schema_key = serde_json::to_string(&config.dataset.schema).map_err(|e| ApiError::internal(e.to_string()))?;
        let key = (config.dataset.path.clone(), schema_key);
        if let Some(ds) = self.inner.datasets.lock().expect("dataset lock poisoned").get(&key) {
            return Ok(ds.clone());
        }
        let (ds, _) = load_dataset(&config.dataset.path, &config.dataset.schema)?;
        let ds = Arc::new(ds);
        self.inner
            .datasets
            .lock()
            .expect("dataset lock poisoned")
            .insert(key, ds.clone());
        Ok(ds)
    }

    fn persist(&self, session: &Session) -> Result<(), ApiError> {
        if let Some(dir) = &self.inner.state_dir {
            write_snapshot(dir, &session.snapshot()).map_err(|e| {
                ApiError::internal(format!("annotation applied but snapshot write failed: {e}"))
            })?;
        }
        Ok(())
    }

    /// Create a session. Blocking: loads data and trains the first committee.
    pub fn create_session(&self, request: CreateSessionRequest) -> Result<CreatedSession, ApiError> {
        let mut config = request.config.unwrap_or_else(|| self.inner.base.clone());
        if let Some(path) = request.dataset_path {
            config.dataset.path = path;
        }
        if let Some(q) = request.queries {
            config.queries = q;
        }
        let strategy = request.strategy.unwrap_or(Strategy::Alpp);
        config.strategies = vec![strategy];
        config.repetitions = 1;
        let seed = match request.seed {
            Some(s) => s,
            None => config.seeds()[0],
        };
        config.seeds = Some(vec![seed]);
        config.validate()?;

        let dataset = self.dataset(&config)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::create(id.clone(), config, &dataset, strategy, seed)?;
        self.persist(&session)?;
        let view = View::of(&session);
        self.insert(session);
        tracing::info!(session = %id, %strategy, seed, "created session");
        Ok(CreatedSession {
            id,
            query: view.query,
            metrics: view.metrics,
        })
    }

    pub fn query(&self, id: &str) -> Result<QueryDocument, ApiError> {
        let view = self.entry(id)?.view();
        match view.query {
            Some(q) => Ok(q),
            None if view.metrics.status == Status::Finished => Err(ApiError::conflict("session is finished")),
            None => Err(ApiError::conflict("session is selecting the next query")),
        }
    }

    pub fn metrics(&self, id: &str) -> Result<MetricsDocument, ApiError> {
        Ok(self.entry(id)?.view().metrics)
    }

    pub fn list(&self) -> Vec<SessionListing> {
        let sessions = self.inner.sessions.read().expect("sessions lock poisoned");
        let mut out: Vec<SessionListing> = sessions
            .iter()
            .map(|(id, e)| {
                let v = e.view();
                SessionListing {
                    id: id.clone(),
                    status: v.metrics.status,
                    queries_done: v.metrics.queries_done,
                }
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    /// Apply an annotation. Returns 409 at once if another annotation for
    /// the same session is in flight; the heavy work runs off the runtime.
    pub async fn annotate(&self, id: &str, payload: AnnotationPayload) -> Result<MetricsDocument, ApiError> {
        let entry = self.entry(id)?;
        let mut guard = entry
            .writer
            .clone()
            .try_lock_owned()
            .map_err(|_| ApiError::conflict("another annotation for this session is being processed"))?;
        guard.check_annotation(&payload)?;

        let before = entry.view();
        let mut selecting = before.clone();
        selecting.query = None;
        selecting.metrics.status = Status::Selecting;
        selecting.metrics.next_query_number = None;
        entry.set_view(selecting);

        let state = self.clone();
        let task = tokio::task::spawn_blocking(move || {
            let result = guard.annotate(payload);
            let persisted = result.as_ref().ok().map(|_| state.persist(&guard));
            (View::of(&guard), result, persisted)
        });
        match task.await {
            Ok((view, result, persisted)) => {
                entry.set_view(view);
                let metrics = result?;
                if let Some(Err(e)) = persisted {
                    tracing::error!(session = %id, "{}", e.message);
                    return Err(e);
                }
                Ok(metrics)
            }
            Err(join) => {
                entry.set_view(before);
                Err(ApiError::internal(format!("annotation task failed: {join}")))
            }
        }
    }
}

async fn create_handler(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let request: CreateSessionRequest = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSessionRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?
    };
    let created = tokio::task::spawn_blocking(move || state.create_session(request))
        .await
        .map_err(|e| ApiError::internal(format!("session creation failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_handler(State(state): State<AppState>) -> Json<Vec<SessionListing>> {
    Json(state.list())
}

async fn query_handler(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<QueryDocument>, ApiError> {
    state.query(&id).map(Json)
}

async fn metrics_handler(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<MetricsDocument>, ApiError> {
    state.metrics(&id).map(Json)
}

async fn annotation_handler(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<MetricsDocument>, ApiError> {
    let payload: AnnotationPayload =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid annotation: {e}")))?;
    state.annotate(&id, payload).await.map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_handler).get(list_handler))
        .route("/sessions/{id}/query", get(query_handler))
        .route("/sessions/{id}/metrics", get(metrics_handler))
        .route("/sessions/{id}/annotations", post(annotation_handler))
        .with_state(state)
}

/// Serve on an already-bound listener until the task is dropped.
pub async fn serve_listener(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve_listener(listener, state).await
}
