//! HTTP session service. One JSON document per request and per response.
//!
//! | method | path                    | body                         |
//! |--------|-------------------------|------------------------------|
//! | POST   | `/sessions`             | `{"user_id"?}`               |
//! | POST   | `/sessions/{id}/turns`  | [`TurnRequest`]              |
//! | POST   | `/sessions/{id}/rating` | `{"stars": 1..5}`            |
//! | GET    | `/metrics`              | `?format=tsv` for plain text |
//! | GET    | `/healthz`              |                              |

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use parley_core::context::Context;
use parley_core::engine::{Engine, EngineError};
use parley_core::metrics::LogError;
use parley_core::turn::TurnRequest;

type SessionSlot = Arc<tokio::sync::Mutex<Context>>;

pub struct AppState {
    engine: Arc<Engine>,
    // live sessions; others are restored from the snapshot store on demand
    sessions: Mutex<HashMap<String, SessionSlot>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Arc<Self> {
        Arc::new(Self { engine: Arc::new(engine), sessions: Mutex::new(HashMap::new()) })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn slot(&self, id: &str) -> Result<SessionSlot, ApiError> {
        if let Some(s) = self.sessions.lock().unwrap().get(id) {
            return Ok(s.clone());
        }
        let ctx = self.engine.open_session(id)?.ok_or_else(|| ApiError::NotFound(id.to_string()))?;
        let mut sessions = self.sessions.lock().unwrap();
        Ok(sessions.entry(id.to_string()).or_insert_with(|| Arc::new(tokio::sync::Mutex::new(ctx))).clone())
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/rating", post(submit_rating))
        .route("/metrics", get(metrics))
        .route("/healthz", get(healthz))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive()).layer(TraceLayer::new_for_http())
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Invalid(String),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("unknown session {id}")),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Invalid(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => {
                tracing::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, m)
            }
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Request(_) | EngineError::Analysis(_) | EngineError::Log(LogError::Stars(_)) => {
                ApiError::Invalid(e.to_string())
            }
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

/// An empty body reads as `{}`.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    user_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let engine = state.engine.clone();
    let session = id.clone();
    let ctx = tokio::task::spawn_blocking(move || engine.create_session(&session, req.user_id))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    state.sessions.lock().unwrap().insert(id.clone(), Arc::new(tokio::sync::Mutex::new(ctx)));
    tracing::info!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id })))
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let received = now_ms();
    let slot = state.slot(&id)?;
    let req: TurnRequest = parse_body(&body)?;
    req.hypotheses().map_err(|e| ApiError::Invalid(e.to_string()))?;
    // holding the session lock across the turn serializes posts per session
    let mut ctx = slot.lock_owned().await;
    let engine = state.engine.clone();
    let response = tokio::task::spawn_blocking(move || engine.post_turn(&mut ctx, &req, received))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    for w in &response.warnings {
        tracing::warn!(session = %id, "{w}");
    }
    Ok(Json(response))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingBody {
    stars: i64,
}

async fn submit_rating(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let slot = state.slot(&id)?;
    let req: RatingBody = parse_body(&body)?;
    let _guard = slot.lock().await;
    let record = state.engine.submit_rating(&id, req.stars, now_ms())?;
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Deserialize)]
struct MetricsQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn metrics(State(state): State<Arc<AppState>>, Query(q): Query<MetricsQuery>) -> Result<Response, ApiError> {
    let log = state.engine.log().ok_or_else(|| ApiError::Internal("engine has no data directory".into()))?;
    let report = log.metrics().map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(match q.format.as_deref() {
        Some("tsv") => ([(header::CONTENT_TYPE, "text/tab-separated-values")], report.to_tsv()).into_response(),
        Some("table") => report.to_table().into_response(),
        None | Some("json") => Json(report).into_response(),
        Some(other) => return Err(ApiError::BadRequest(format!("unknown format {other:?}"))),
    })
}

#[derive(Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub topics: Vec<String>,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health { status: "ok".into(), topics: state.engine.resources().dialogues.keys().cloned().collect() })
}
