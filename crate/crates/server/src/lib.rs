//! HTTP service for running the study: hands out sessions with a balanced
//! robot assignment, records questionnaire and association submissions in an
//! append-only JSON-lines log, serves robot images and exports the log.
//!
//! Routes:
//! - `POST /api/session`
//! - `POST /api/session/{id}/attitude` with `{"items": [12 ints in 0..=4]}`
//! - `POST /api/session/{id}/association` with `{"robot": id, "words": [6 strings]}`
//! - `GET /api/session/{id}`
//! - `GET /api/robots/{id}/image`
//! - `GET /api/export` with `Authorization: Bearer <admin token>`
//!
//! Errors are JSON: `{"error": {"code": "server.wrong_state", "message": "..."}}`.

mod api;
pub mod store;

use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use bodyimage_core::corpus::{CorpusError, RobotManifest};
use bodyimage_core::ErrorCode;
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::router;
pub use store::{Session, SessionState, Store, LOG_FILE};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("event log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl ServerError {
    fn io(path: &Path, source: io::Error) -> Self {
        ServerError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl ErrorCode for ServerError {
    fn code(&self) -> &'static str {
        match self {
            ServerError::Io { .. } => "server.io",
            ServerError::CorruptLog { .. } => "server.corrupt_log",
            ServerError::Corpus(e) => e.code(),
            ServerError::Config(_) => "server.config",
        }
    }
}

/// Request-level failure, rendered as a JSON error body.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn capacity(capacity: usize) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "server.capacity",
            format!("participant capacity of {capacity} reached"),
        )
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "server.unknown_session", format!("no session `{id}`"))
    }

    fn wrong_state(state: SessionState, what: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "server.wrong_state",
            format!("cannot accept {what} in state `{}`", state.name()),
        )
    }

    fn wrong_robot(got: &str, expected: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "server.wrong_robot",
            format!("expected words for robot `{expected}`, got `{got}`"),
        )
    }

    fn validation(code: &'static str, message: String) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn invalid(e: CorpusError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }

    fn internal(message: String) -> Self {
        log::error!("{message}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "server.internal", message)
    }

    fn not_found(what: String) -> Self {
        Self::new(StatusCode::NOT_FOUND, "server.not_found", what)
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "server.unauthorized", "bad or missing admin token")
    }

    fn bad_request(message: String) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "server.bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    /// `None` uses the bundled 30-robot manifest.
    pub manifest_path: Option<PathBuf>,
    /// Directory that manifest image paths are relative to. Defaults to the
    /// manifest's directory, or `data_dir` for the bundled manifest.
    pub images_root: Option<PathBuf>,
    pub capacity: usize,
    pub per_participant: usize,
    pub seed: u64,
    pub admin_token: String,
}

pub struct AppState {
    store: Mutex<Store>,
    manifest: RobotManifest,
    images_root: PathBuf,
    admin_token: String,
}

impl AppState {
    pub fn open(config: &ServerConfig) -> Result<Arc<Self>, ServerError> {
        if config.admin_token.is_empty() {
            return Err(ServerError::Config("admin token must not be empty".into()));
        }
        if config.capacity == 0 {
            return Err(ServerError::Config("capacity must be at least 1".into()));
        }
        let manifest = match &config.manifest_path {
            Some(p) => RobotManifest::load(p)?,
            None => RobotManifest::bundled(),
        };
        let images_root = config.images_root.clone().unwrap_or_else(|| match &config.manifest_path {
            Some(p) => p.parent().map(Path::to_path_buf).unwrap_or_default(),
            None => config.data_dir.clone(),
        });
        let store = Store::open(
            &config.data_dir,
            &manifest,
            config.capacity,
            config.per_participant,
            config.seed,
        )?;
        Ok(Arc::new(Self {
            store: Mutex::new(store),
            manifest,
            images_root,
            admin_token: config.admin_token.clone(),
        }))
    }

    pub fn manifest(&self) -> &RobotManifest {
        &self.manifest
    }
}

/// Serves until the process is stopped. `on_ready` receives the bound address.
pub async fn serve(
    config: &ServerConfig,
    addr: SocketAddr,
    on_ready: impl FnOnce(SocketAddr),
) -> Result<(), ServerError> {
    let state = AppState::open(config)?;
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|e| ServerError::Io {
            path: addr.to_string(),
            source: e,
        })?;
    let local = listener.local_addr().map_err(|e| ServerError::Io {
        path: addr.to_string(),
        source: e,
    })?;
    on_ready(local);
    axum::serve(listener, router(state))
        .await
        .map_err(|e| ServerError::Io {
            path: local.to_string(),
            source: e,
        })
}
