//! HTTP/JSON front end. Every compute route runs on the blocking pool.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokprune_core::api::{
    CalibrateRequest, CalibrateResponse, ErrorBody, ForwardResponse, FrameRequest, FrameResponse, PenaltyRequest,
    PenaltyResponse, PruneVizResponse, RunRequest, ScheduleResponse, SessionRequest, SessionResponse, VerifyRequest,
    VerifyResponse,
};
use tokprune_core::policy::{hanning_penalty, DtUpdateState};
use tokprune_core::report::{forward_artifacts, prune_viz_artifacts, schedule_artifacts};
use tokprune_core::{verify, Error};

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, DtUpdateState>>>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => ApiError::Internal(m),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError::Internal(format!("worker failed: {e}"))),
    }
}

async fn health() -> &'static str {
    "ok"
}

async fn schedule(Json(req): Json<RunRequest>) -> ApiResult<ScheduleResponse> {
    blocking(move || {
        let cfg = req.resolve()?;
        let label = req.label();
        let (report, artifacts) = schedule_artifacts(&label, &cfg)?;
        Ok(ScheduleResponse { label, report, artifacts })
    })
    .await
}

async fn forward(Json(req): Json<RunRequest>) -> ApiResult<ForwardResponse> {
    blocking(move || {
        let cfg = req.resolve()?;
        let label = req.label();
        let (trace, artifacts) = forward_artifacts(&label, &cfg)?;
        Ok(ForwardResponse { label, trace, artifacts })
    })
    .await
}

async fn prune_viz(Json(req): Json<RunRequest>) -> ApiResult<PruneVizResponse> {
    blocking(move || {
        let cfg = req.resolve()?;
        let label = req.label();
        let artifacts = prune_viz_artifacts(&label, &cfg)?;
        Ok(PruneVizResponse { label, artifacts })
    })
    .await
}

async fn calibrate(Json(req): Json<CalibrateRequest>) -> ApiResult<CalibrateResponse> {
    blocking(move || req.run()).await
}

async fn verify_all(Json(req): Json<VerifyRequest>) -> ApiResult<VerifyResponse> {
    blocking(move || {
        let report = verify::run(&req.options);
        Ok(VerifyResponse { passed: report.passed(), report })
    })
    .await
}

async fn penalty(Json(req): Json<PenaltyRequest>) -> ApiResult<PenaltyResponse> {
    Ok(Json(PenaltyResponse { score_map: hanning_penalty(&req.score_map)? }))
}

async fn create_session(State(state): State<AppState>, Json(req): Json<SessionRequest>) -> ApiResult<SessionResponse> {
    let dt = DtUpdateState::new(req.update_interval, req.confidence_threshold)?;
    let id = uuid::Uuid::new_v4().to_string();
    state.sessions.lock().expect("session lock").insert(id.clone(), dt.clone());
    Ok(Json(SessionResponse { id, state: dt }))
}

async fn session_frame(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<FrameRequest>,
) -> ApiResult<FrameResponse> {
    let mut sessions = state.sessions.lock().expect("session lock");
    let dt = sessions.get_mut(&id).ok_or_else(|| ApiError::NotFound(format!("no session {id}")))?;
    let update = dt.decide(req.frame_index, req.confidence);
    Ok(Json(FrameResponse { update, state: dt.clone() }))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.lock().expect("session lock").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(format!("no session {id}"))),
    }
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/schedule", post(schedule))
        .route("/v1/forward", post(forward))
        .route("/v1/prune-viz", post(prune_viz))
        .route("/v1/calibrate", post(calibrate))
        .route("/v1/verify", post(verify_all))
        .route("/v1/penalty", post(penalty))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", axum::routing::delete(delete_session))
        .route("/v1/sessions/{id}/frames", post(session_frame))
        .with_state(AppState::default())
}

/// Serves until the listener fails or ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
