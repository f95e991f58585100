//! JSON endpoints over one live session.
//!
//! Every response is an object carrying `schema_version`. Mutations go
//! through a single mutex, so concurrent posts are applied in a total order.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gdr_core::consistency::Feedback;
use gdr_core::generator::UpdateId;
use gdr_core::orchestrator::Session;
use gdr_core::Error;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub type Shared = Arc<Mutex<Session>>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::StaleUpdate(_) | Error::UntrainedModel(_) => StatusCode::CONFLICT,
            Error::UnknownGroup(_) => StatusCode::NOT_FOUND,
            Error::InvalidFeedback(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn lock(state: &Shared) -> MutexGuard<'_, Session> {
    state.lock().unwrap_or_else(|p| p.into_inner())
}

fn ok(mut body: Value) -> ApiResult {
    body["schema_version"] = json!(SCHEMA_VERSION);
    Ok(Json(body))
}

pub fn router(session: Session) -> Router {
    router_shared(Arc::new(Mutex::new(session)))
}

pub fn router_shared(state: Shared) -> Router {
    Router::new()
        .route("/api/session", get(session_info))
        .route("/api/groups", get(groups))
        .route("/api/groups/{id}/select", post(select))
        .route("/api/groups/{id}/updates", get(group_updates))
        .route("/api/groups/{id}/delegate", post(delegate))
        .route("/api/feedback", post(feedback))
        .route("/api/events", get(events))
        .with_state(state)
}

async fn session_info(State(state): State<Shared>) -> ApiResult {
    let s = lock(&state);
    ok(json!({ "session": s.summary() }))
}

async fn groups(State(state): State<Shared>) -> ApiResult {
    let mut s = lock(&state);
    let groups = s.groups()?;
    ok(json!({ "groups": groups }))
}

async fn select(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let mut s = lock(&state);
    let group = s.select(&id)?;
    ok(json!({ "group": group }))
}

async fn group_updates(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let s = lock(&state);
    let updates = s.group_updates(&id)?;
    ok(json!({ "group": id, "updates": updates }))
}

async fn delegate(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let mut s = lock(&state);
    let delta = s.live_delegate(&id)?;
    ok(json!({ "delta": delta }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackBody {
    update_id: String,
    kind: String,
    #[serde(default)]
    new_value: Option<String>,
}

/// Validates a feedback body without touching the session.
pub fn parse_feedback(body: &[u8]) -> Result<(UpdateId, Feedback), ApiError> {
    let b: FeedbackBody =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed feedback body: {e}")))?;
    let id: UpdateId = b
        .update_id
        .parse()
        .map_err(|e| ApiError::bad_request(format!("update_id: {e}")))?;
    let fb = match (b.kind.as_str(), b.new_value) {
        ("replace", Some(v)) if !v.is_empty() => Feedback::Replace(v),
        ("replace", _) => return Err(ApiError::bad_request("replace needs a non-empty new_value")),
        (_, Some(_)) => return Err(ApiError::bad_request("new_value is only allowed with kind `replace`")),
        ("confirm", None) => Feedback::Confirm,
        ("reject", None) => Feedback::Reject,
        ("retain", None) => Feedback::Retain,
        (k, None) => return Err(ApiError::bad_request(format!("unknown feedback kind `{k}`"))),
    };
    Ok((id, fb))
}

async fn feedback(State(state): State<Shared>, body: Bytes) -> ApiResult {
    let (id, fb) = parse_feedback(&body)?;
    let mut s = lock(&state);
    let delta = s.live_feedback(id, fb)?;
    ok(json!({ "delta": delta }))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: usize,
}

async fn events(State(state): State<Shared>, q: Result<Query<EventsQuery>, QueryRejection>) -> ApiResult {
    let Query(q) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let s = lock(&state);
    let events = s.events_since(q.since);
    ok(json!({ "since": q.since, "next": s.events().len(), "events": events }))
}

pub async fn serve(session: Session, port: u16) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr}");
    log::info!("serving {} tuples on {addr}", session.state().data().len());
    axum::serve(listener, router(session))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
