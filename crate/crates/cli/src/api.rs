//! The session service over HTTP/JSON.
//!
//! Every response body carries `"v": 1`. Errors are
//! `{"v": 1, "error": {"code": ..., "message": ...}}` with a status derived
//! from the session error. Store calls can run the whole recommendation
//! pipeline, so they run on the blocking pool.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use editprop::generator::EditCandidate;
use editprop::model::{split_lines, ModelError};
use editprop::session::{parse_region_ref, Feedback, LocationReport, SessionError, SessionStore};
use editprop::{Edit, ProjectSnapshot, Prompt};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const API_VERSION: u32 = 1;

/// Candidates returned when the request does not say.
pub const DEFAULT_K: usize = 5;
/// Upper bound on `k` per request.
pub const MAX_K: usize = 50;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::UnknownRegion(_) => (StatusCode::NOT_FOUND, "unknown_region"),
            SessionError::RevisionMismatch { .. } => (StatusCode::CONFLICT, "revision_mismatch"),
            SessionError::Model(ModelError::StaleEdit { .. }) => (StatusCode::CONFLICT, "stale_edit"),
            SessionError::NoEdits => (StatusCode::PRECONDITION_FAILED, "no_edits"),
            SessionError::Model(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit"),
            SessionError::Locator(_) => (StatusCode::UNPROCESSABLE_ENTITY, "locator"),
            SessionError::Generate(_) => (StatusCode::UNPROCESSABLE_ENTITY, "generator"),
            SessionError::Backend(_) => (StatusCode::BAD_GATEWAY, "backend"),
            SessionError::Log(_) => (StatusCode::INTERNAL_SERVER_ERROR, "log"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        let body = json!({ "v": API_VERSION, "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateSession {
    /// A complete snapshot; alternatively `files` maps paths to file text.
    #[serde(default)]
    pub snapshot: Option<ProjectSnapshot>,
    #[serde(default)]
    pub files: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub prompt: Option<String>,
    #[serde(default)]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditEvent {
    pub edit: Edit,
    #[serde(default)]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionBody {
    pub v: u32,
    pub session_id: String,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionBody {
    pub v: u32,
    pub session_id: String,
    pub revision: u64,
    pub snapshot: ProjectSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesBody {
    pub v: u32,
    pub session_id: String,
    pub revision: u64,
    pub region_ref: String,
    pub candidates: Vec<EditCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub v: u32,
    pub status: String,
    pub sessions: usize,
    pub config_hash: String,
}

#[derive(Debug, Deserialize)]
struct KParam {
    k: Option<usize>,
}

/// Builds the router over a shared store.
pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/events", post(event))
        .route("/sessions/{id}/locations", get(locations))
        .route("/sessions/{id}/regions/{region}/candidates", post(candidates))
        .route("/sessions/{id}/regions/{region}/feedback", post(feedback))
        .with_state(store)
}

/// Runs a store call on the blocking pool.
async fn blocking<T, F>(store: &Arc<SessionStore>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> Result<T, SessionError> + Send + 'static,
{
    let store = Arc::clone(store);
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn health(State(store): State<Arc<SessionStore>>) -> Json<Health> {
    Json(Health {
        v: API_VERSION,
        status: "ok".into(),
        sessions: store.session_ids().len(),
        config_hash: store.engine().config.hash(),
    })
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn create(
    State(store): State<Arc<SessionStore>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<RevisionBody>)> {
    let Json(req) = body?;
    let snapshot = match (req.snapshot, req.files) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either snapshot or files, not both")),
        (Some(s), None) => s,
        (None, files) => {
            let mut s = ProjectSnapshot::new("");
            for (path, text) in files.unwrap_or_default() {
                s.insert_file(&path, split_lines(&text))
                    .map_err(|e| ApiError::bad_request(e.to_string()))?;
            }
            s
        }
    };
    if let Some(id) = &req.session_id {
        if !valid_session_id(id) {
            return Err(ApiError::bad_request(format!("invalid session id {id:?}")));
        }
        if store.session_ids().iter().any(|x| x == id) {
            return Err(ApiError::new(StatusCode::CONFLICT, "session_exists", format!("session {id} already exists")));
        }
    }
    let prompt = Prompt::new(req.prompt.unwrap_or_default());
    let session_id = blocking(&store, move |s| s.create(snapshot, prompt, req.session_id)).await?;
    let body = RevisionBody {
        v: API_VERSION,
        session_id,
        revision: 0,
    };
    Ok((StatusCode::CREATED, Json(body)))
}

async fn session(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Json<SessionBody>> {
    let sid = id.clone();
    let (revision, snapshot) = blocking(&store, move |s| s.snapshot(&sid)).await?;
    Ok(Json(SessionBody {
        v: API_VERSION,
        session_id: id,
        revision,
        snapshot,
    }))
}

async fn event(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Result<Json<EditEvent>, JsonRejection>,
) -> ApiResult<Json<RevisionBody>> {
    let Json(req) = body?;
    let sid = id.clone();
    let revision = blocking(&store, move |s| s.record_edit(&sid, req.edit, req.prompt.map(Prompt::new))).await?;
    Ok(Json(RevisionBody {
        v: API_VERSION,
        session_id: id,
        revision,
    }))
}

async fn locations(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Json<LocationReport>> {
    Ok(Json(blocking(&store, move |s| s.recommend_locations(&id)).await?))
}

async fn candidates(
    State(store): State<Arc<SessionStore>>,
    Path((id, region)): Path<(String, String)>,
    Query(q): Query<KParam>,
) -> ApiResult<Json<CandidatesBody>> {
    let k = q.k.unwrap_or(DEFAULT_K);
    if !(1..=MAX_K).contains(&k) {
        return Err(ApiError::bad_request(format!("k must be between 1 and {MAX_K}")));
    }
    let (sid, r) = (id.clone(), region.clone());
    let candidates = blocking(&store, move |s| s.recommend_edits(&sid, &r, k)).await?;
    // a ref only resolves at the revision it names
    let (revision, _) = parse_region_ref(&region)?;
    Ok(Json(CandidatesBody {
        v: API_VERSION,
        session_id: id,
        revision,
        region_ref: region,
        candidates,
    }))
}

async fn feedback(
    State(store): State<Arc<SessionStore>>,
    Path((id, region)): Path<(String, String)>,
    body: Result<Json<Feedback>, JsonRejection>,
) -> ApiResult<Json<RevisionBody>> {
    let Json(fb) = body?;
    let sid = id.clone();
    let revision = blocking(&store, move |s| s.apply_feedback(&sid, &region, fb)).await?;
    Ok(Json(RevisionBody {
        v: API_VERSION,
        session_id: id,
        revision,
    }))
}
