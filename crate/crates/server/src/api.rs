use std::path::Component;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bodyimage_core::corpus::{LIKERT_OPTIONS, QUESTIONNAIRE_INSTRUCTION, QUESTIONNAIRE_SETTINGS, QUESTIONNAIRE_STEM};
use serde::{Deserialize, Serialize};

use crate::store::Session;
use crate::{ApiError, AppState};

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/attitude", post(submit_attitude))
        .route("/api/session/{id}/association", post(submit_association))
        .route("/api/robots/{id}/image", get(robot_image))
        .route("/api/export", get(export))
        .with_state(state)
}

#[derive(Serialize)]
struct RobotView {
    id: String,
    name: String,
    image_url: String,
}

#[derive(Serialize)]
struct Questionnaire {
    instruction: &'static str,
    stem: &'static str,
    items: Vec<String>,
    options: &'static [&'static str],
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    participant_id: String,
    state: &'static str,
    answered: usize,
    total: usize,
    next_robot: Option<String>,
    robots: Vec<RobotView>,
}

#[derive(Serialize)]
struct Created {
    #[serde(flatten)]
    session: SessionView,
    questionnaire: Questionnaire,
}

fn view(state: &AppState, s: &Session) -> SessionView {
    SessionView {
        session_id: s.session_id.clone(),
        participant_id: s.participant_id.clone(),
        state: s.state.name(),
        answered: s.answered,
        total: s.robots.len(),
        next_robot: s.next_robot().map(str::to_string),
        robots: s
            .robots
            .iter()
            .map(|id| RobotView {
                id: id.clone(),
                name: state.manifest.display_name(id).to_string(),
                image_url: format!("/api/robots/{id}/image"),
            })
            .collect(),
    }
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, crate::Store> {
    // a panic while holding the lock cannot leave a half-written line behind
    // the in-memory state, so poisoning is safe to ignore
    state.store.lock().unwrap_or_else(|e| e.into_inner())
}

async fn create_session(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let session = lock(&state).create_session()?;
    let body = Created {
        session: view(&state, &session),
        questionnaire: Questionnaire {
            instruction: QUESTIONNAIRE_INSTRUCTION,
            stem: QUESTIONNAIRE_STEM,
            items: QUESTIONNAIRE_SETTINGS
                .iter()
                .map(|s| format!("{QUESTIONNAIRE_STEM} {s}."))
                .collect(),
            options: &LIKERT_OPTIONS,
        },
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = lock(&state);
    let s = store.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    Ok(Json(view(&state, s)).into_response())
}

#[derive(Deserialize)]
struct AttitudeBody {
    items: Vec<i64>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(b)| b)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn submit_attitude(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<AttitudeBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let b = body(payload)?;
    let s = lock(&state).submit_attitude(&id, &b.items)?;
    Ok(Json(view(&state, &s)).into_response())
}

#[derive(Deserialize)]
struct AssociationBody {
    robot: String,
    words: Vec<String>,
}

async fn submit_association(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<AssociationBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let b = body(payload)?;
    let s = lock(&state).submit_association(&id, &b.robot, &b.words)?;
    Ok(Json(view(&state, &s)).into_response())
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn robot_image(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = state
        .manifest
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown robot `{id}`")))?;
    let rel = std::path::Path::new(&entry.image_path);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(ApiError::not_found(format!("image path of `{id}` leaves the image root")));
    }
    let path = state.images_root.join(rel);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("image for `{id}` is not available")))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn export(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if token != Some(state.admin_token.as_str()) {
        return Err(ApiError::unauthorized());
    }
    let bytes = lock(&state).export()?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}
