//! HTTP facade over [`narrow_core::consult::Consult`].
//!
//! Every error is a JSON body `{code, message, detail}`. Session work is
//! synchronous and runs on the blocking pool; the per-session lock lives in
//! the core.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use narrow_core::consult::{Consult, FindingsDelta};
use narrow_core::{Error, Policy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

/// Origin of the consult UI's dev server.
pub const DEFAULT_UI_ORIGIN: &str = "http://localhost:5173";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub detail: Value,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> Self {
        ApiError {
            code: code.into(),
            message: message.into(),
            detail,
            status: status.as_u16(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message, Value::Null)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (status, code, detail) = match &e {
            Error::UnknownSession(id) => (StatusCode::NOT_FOUND, "unknown_session", json!({ "session": id })),
            Error::UnknownId { kind, id } => (StatusCode::BAD_REQUEST, "unknown_id", json!({ "kind": kind, "id": id })),
            Error::ConflictingFinding(id) => (StatusCode::CONFLICT, "conflicting_finding", json!({ "id": id })),
            Error::ZeroLikelihood => (StatusCode::UNPROCESSABLE_ENTITY, "zero_likelihood", Value::Null),
            Error::CapExceeded { what, limit, actual } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "cap_exceeded",
                json!({ "what": what, "limit": limit, "actual": actual }),
            ),
            Error::Component { component, .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "component_failed", json!({ "component": component }))
            }
            Error::UnsafeMethod => (StatusCode::BAD_REQUEST, "unsafe_method", Value::Null),
            Error::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument", Value::Null),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", Value::Null),
        };
        ApiError::new(status, code, message, detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> narrow_core::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), Value::Null))?
        .map_err(ApiError::from)
}

type Shared = Arc<Consult>;

async fn healthz(State(c): State<Shared>) -> Json<Value> {
    Json(json!({ "status": "ok", "kb_hash": c.network().kb_hash() }))
}

async fn kb_stats(State(c): State<Shared>) -> Json<Value> {
    let mut v = serde_json::to_value(c.stats()).expect("stats serialize");
    v["kb_hash"] = json!(c.network().kb_hash());
    Json(v)
}

async fn kb_thresholds(State(c): State<Shared>) -> Json<Value> {
    Json(serde_json::to_value(c.thresholds()).expect("thresholds serialize"))
}

async fn create_session(State(c): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let policy: Policy = parse_body(&body)?;
    let view = blocking(move || c.create_session(policy)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(c): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || c.get(&id)).await?).into_response())
}

async fn update_findings(State(c): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let delta: FindingsDelta = parse_body(&body)?;
    Ok(Json(blocking(move || c.update_findings(&id, delta)).await?).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WhatIfRequest {
    assignment: BTreeMap<String, bool>,
}

async fn what_if(State(c): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: WhatIfRequest = parse_body(&body)?;
    Ok(Json(blocking(move || c.what_if(&id, req.assignment)).await?).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route", Value::Null)
}

/// Allowed browser origins; `["*"]` allows any.
pub fn cors_layer(origins: &[String]) -> anyhow::Result<CorsLayer> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    if origins.iter().any(|o| o == "*") {
        return Ok(layer.allow_origin(Any));
    }
    let values = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|e| anyhow::anyhow!("bad CORS origin `{o}`: {e}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(layer.allow_origin(AllowOrigin::list(values)))
}

pub fn router(consult: Shared, cors: CorsLayer) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/kb/stats", get(kb_stats))
        .route("/kb/thresholds", get(kb_thresholds))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/findings", post(update_findings))
        .route("/sessions/{id}/whatif", post(what_if))
        .fallback(not_found)
        .layer(cors)
        .with_state(consult)
}

pub async fn serve(consult: Consult, addr: SocketAddr, origins: &[String]) -> anyhow::Result<()> {
    let app = router(Arc::new(consult), cors_layer(origins)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
