//! HTTP service over an [`Engine`].
//!
//! | Method | Path | Result |
//! |---|---|---|
//! | POST | `/beads` | `{"id": ...}`, 201 when new, 200 when already stored |
//! | GET | `/beads?id=` | the stored bead, re-verified on read |
//! | GET | `/beads/context?id=&depth=&role=&format=json\|text&direction=` | causal context |
//! | GET | `/patients` | patient root summaries |
//! | GET | `/patients/{id}/beads?include_administrative=&role=&limit=` | a patient's record with edges |
//! | GET | `/health` | store and index status |
//!
//! Errors are JSON `{"status", "code", "message"}`. The `role` parameter is
//! trusted as given; there is no authentication.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::bead::{BeadError, BeadId, Role};
use crate::engine::{Engine, RecordQuery};
use crate::index::IndexError;
use crate::store::StoreError;
use crate::traversal::{serialize_context, TraversalError};
use crate::Error;

pub const ADDR_ENV: &str = "MEDBEADS_ADDR";
pub const DATA_DIR_ENV: &str = "MEDBEADS_DATA_DIR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Clone, Debug, Default)]
pub struct ApiConfig {
    /// Allowed CORS origin; `None` allows any origin.
    pub cors_origin: Option<String>,
    /// Directory of static UI assets served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
        }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn store_error(e: &StoreError) -> (StatusCode, &'static str) {
    match e {
        StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        StoreError::MissingParent(_) => (StatusCode::CONFLICT, "missing_parent"),
        StoreError::InvalidDraft(_) | StoreError::Bead(_) => (StatusCode::BAD_REQUEST, "invalid_draft"),
        StoreError::IntegrityViolation { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "tampered"),
        StoreError::StorageConflict(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_conflict"),
        StoreError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
    }
}

fn index_error(e: &IndexError) -> (StatusCode, &'static str) {
    match e {
        IndexError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        IndexError::Store(s) => store_error(s),
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "index"),
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        let (status, code) = match &e {
            Error::Validation(_) => (StatusCode::BAD_REQUEST, "invalid_draft"),
            Error::Bead(BeadError::KeyFormat(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "keyring"),
            Error::Bead(_) => (StatusCode::BAD_REQUEST, "invalid_draft"),
            Error::Store(s) => store_error(s),
            Error::Index(i) => index_error(i),
            Error::Traversal(t) => match t {
                TraversalError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
                TraversalError::DepthOutOfRange { .. } => (StatusCode::BAD_REQUEST, "bad_depth"),
                TraversalError::Index(i) => index_error(i),
                TraversalError::Store(s) => store_error(s),
            },
            Error::NotPatientRoot(_) => (StatusCode::NOT_FOUND, "not_patient_root"),
            Error::Fhir(_) => (StatusCode::BAD_REQUEST, "fhir"),
        };
        if status.is_server_error() {
            tracing::error!(error = %e, code, "request failed");
        }
        ApiError::new(status, code, e.to_string())
    }
}

type Shared = Arc<Engine>;

async fn blocking<T, F>(engine: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, Error> + Send + 'static,
{
    let engine = Arc::clone(engine);
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn parse_id(raw: Option<&str>) -> Result<BeadId, ApiError> {
    let raw = raw.ok_or_else(|| ApiError::bad_request("missing_id", "query parameter `id` is required"))?;
    BeadId::parse(raw).map_err(|e| ApiError::bad_request("bad_id", e.to_string()))
}

fn parse_role(raw: Option<&str>) -> Result<Option<Role>, ApiError> {
    raw.filter(|r| !r.is_empty())
        .map(|r| r.parse::<Role>().map_err(|e| ApiError::bad_request("bad_role", e.to_string())))
        .transpose()
}

fn parse_bool(name: &str, raw: Option<&str>) -> Result<bool, ApiError> {
    match raw {
        None | Some("") | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some(other) => Err(ApiError::bad_request(
            "bad_parameter",
            format!("`{name}` must be true or false, got {other:?}"),
        )),
    }
}

fn parse_number<T: std::str::FromStr>(name: &str, code: &str, raw: Option<&str>) -> Result<Option<T>, ApiError> {
    raw.filter(|r| !r.is_empty())
        .map(|r| {
            r.parse::<T>()
                .map_err(|_| ApiError::bad_request(code, format!("`{name}` must be a non-negative integer, got {r:?}")))
        })
        .transpose()
}

async fn post_bead(State(engine): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let doc: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))?;
    let receipt = blocking(&engine, move |e| e.submit(&doc)).await?;
    let status = if receipt.created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(json!({"id": receipt.id}))).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct IdQuery {
    id: Option<String>,
}

async fn get_bead(State(engine): State<Shared>, Query(q): Query<IdQuery>) -> Result<Response, ApiError> {
    let id = parse_id(q.id.as_deref())?;
    let bead = blocking(&engine, move |e| e.get(&id)).await?;
    Ok(Json(bead).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct ContextQuery {
    id: Option<String>,
    depth: Option<String>,
    role: Option<String>,
    format: Option<String>,
    direction: Option<String>,
}

async fn get_context(State(engine): State<Shared>, Query(q): Query<ContextQuery>) -> Result<Response, ApiError> {
    let id = parse_id(q.id.as_deref())?;
    let depth = parse_number::<u32>("depth", "bad_depth", q.depth.as_deref())?;
    let role = parse_role(q.role.as_deref())?;
    let text = match q.format.as_deref() {
        None | Some("") | Some("json") => false,
        Some("text") => true,
        Some(other) => {
            return Err(ApiError::bad_request(
                "bad_format",
                format!("`format` must be json or text, got {other:?}"),
            ))
        }
    };
    let descendants = match q.direction.as_deref() {
        None | Some("") | Some("ancestors") => false,
        Some("descendants") => true,
        Some(other) => {
            return Err(ApiError::bad_request(
                "bad_direction",
                format!("`direction` must be ancestors or descendants, got {other:?}"),
            ))
        }
    };
    let result = blocking(&engine, move |e| {
        if descendants {
            e.get_descendants(&id, depth, role)
        } else {
            e.get_context(&id, depth, role)
        }
    })
    .await?;
    if text {
        let body = serialize_context(&result);
        Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response())
    } else {
        Ok(Json(result).into_response())
    }
}

async fn list_patients(State(engine): State<Shared>) -> Result<Response, ApiError> {
    let patients = blocking(&engine, |e| e.patients()).await?;
    Ok(Json(patients).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct RecordParams {
    include_administrative: Option<String>,
    role: Option<String>,
    limit: Option<String>,
}

async fn patient_beads(
    State(engine): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<RecordParams>,
) -> Result<Response, ApiError> {
    let id = parse_id(Some(&id))?;
    let query = RecordQuery {
        include_administrative: parse_bool("include_administrative", q.include_administrative.as_deref())?,
        role: parse_role(q.role.as_deref())?,
        limit: parse_number::<usize>("limit", "bad_limit", q.limit.as_deref())?,
    };
    let record = blocking(&engine, move |e| e.patient_record(&id, query)).await?;
    Ok(Json(record).into_response())
}

async fn health(State(engine): State<Shared>) -> Result<Response, ApiError> {
    let h = blocking(&engine, |e| e.health()).await?;
    Ok(Json(h).into_response())
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint")
}

/// Builds the service router.
pub fn router(engine: Arc<Engine>, config: &ApiConfig) -> Router {
    let origin = match &config.cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                tracing::warn!(origin = %o, "invalid CORS origin, allowing none");
                AllowOrigin::list([])
            }
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    let mut app = Router::new()
        .route("/beads", post(post_bead).get(get_bead))
        .route("/beads/context", get(get_context))
        .route("/patients", get(list_patients))
        .route("/patients/{id}/beads", get(patient_beads))
        .route("/health", get(health));
    if let Some(dir) = &config.ui_dir {
        let index = dir.join("index.html");
        app = app.nest_service(
            "/ui",
            ServeDir::new(dir).fallback(tower_http::services::ServeFile::new(index)),
        );
    }
    app.fallback(fallback).layer(cors).with_state(engine)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
