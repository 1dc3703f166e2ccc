//! JSON API over a [`LabelStore`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::Error;
use crate::pool::{LabelingTask, VoteSubmission, DEFAULT_MARGIN, DEFAULT_QUORUM};
use crate::store::LabelStore;

const PLACEHOLDER_INDEX: &str = include_str!("index.html");

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<LabelStore>,
    /// Target of `GET /api/export`.
    pub export_dir: PathBuf,
    /// Directory holding the UI bundle; a placeholder page is served when absent.
    pub static_dir: Option<PathBuf>,
}

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let status = match &self {
            Error::UnknownTask(_) => StatusCode::NOT_FOUND,
            Error::DuplicateSubmission { .. } => StatusCode::CONFLICT,
            Error::PoolExhausted | Error::NothingFinalized => StatusCode::CONFLICT,
            Error::UnknownItems(_) | Error::NoExemplars(_) | Error::Invalid(_) => StatusCode::BAD_REQUEST,
            Error::Core(htr_core::Error::UnknownSymbol(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

fn image_url(id: &str) -> String {
    format!("/img/{id}.png")
}

#[derive(Serialize)]
struct ImageRef {
    id: String,
    url: String,
}

impl ImageRef {
    fn new(id: &str) -> Self {
        Self { id: id.to_string(), url: image_url(id) }
    }
}

#[derive(Serialize)]
struct TaskView {
    task_id: String,
    target_symbol: String,
    positives: Vec<ImageRef>,
    negatives: Vec<ImageRef>,
    grid: Vec<ImageRef>,
    issued_at: u64,
}

impl From<LabelingTask> for TaskView {
    fn from(t: LabelingTask) -> Self {
        let refs = |ids: &[String]| ids.iter().map(|id| ImageRef::new(id)).collect();
        Self {
            positives: refs(&t.positives),
            negatives: refs(&t.negatives),
            grid: refs(&t.grid),
            task_id: t.task_id,
            target_symbol: t.target_symbol,
            issued_at: t.issued_at,
        }
    }
}

#[derive(Serialize)]
struct SymbolView {
    name: String,
    text: Option<char>,
    positives: Vec<String>,
    negatives: Vec<String>,
}

async fn symbols(State(app): State<AppState>) -> Json<Vec<SymbolView>> {
    let out = app
        .store
        .symbols()
        .into_iter()
        .map(|s| SymbolView {
            name: s.name,
            text: s.text,
            positives: s.positives.iter().map(|id| image_url(id)).collect(),
            negatives: s.negatives.iter().map(|id| image_url(id)).collect(),
        })
        .collect();
    Json(out)
}

#[derive(Deserialize)]
struct TaskQuery {
    symbol: String,
}

async fn create_task(State(app): State<AppState>, Query(q): Query<TaskQuery>) -> Result<Json<TaskView>, Error> {
    Ok(Json(app.store.create_task(&q.symbol)?.into()))
}

async fn get_task(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<TaskView>, Error> {
    app.store.task(&id).map(|t| Json(t.into())).ok_or(Error::UnknownTask(id))
}

#[derive(Deserialize)]
struct VoteBody {
    worker_id: String,
    selected: Vec<String>,
}

async fn submit_votes(
    State(app): State<AppState>,
    Path(task_id): Path<String>,
    Json(body): Json<VoteBody>,
) -> Result<Json<serde_json::Value>, Error> {
    let accepted = app.store.submit(VoteSubmission { task_id, worker_id: body.worker_id, selected: body.selected })?;
    Ok(Json(serde_json::json!({ "accepted": accepted })))
}

async fn pool_status(State(app): State<AppState>) -> Json<crate::store::PoolStatus> {
    Json(app.store.status())
}

#[derive(Deserialize)]
struct FinalizeQuery {
    quorum: Option<u32>,
    margin: Option<u32>,
}

async fn finalize(State(app): State<AppState>, Query(q): Query<FinalizeQuery>) -> Result<Json<serde_json::Value>, Error> {
    let out = app.store.finalize(q.quorum.unwrap_or(DEFAULT_QUORUM), q.margin.unwrap_or(DEFAULT_MARGIN))?;
    let labeled: Vec<_> = out.labeled.iter().map(|(id, label)| serde_json::json!({ "id": id, "label": label })).collect();
    Ok(Json(serde_json::json!({ "labeled": labeled, "pending": out.pending })))
}

async fn export(State(app): State<AppState>) -> Result<Response, Error> {
    let manifest = app.store.export(&app.export_dir)?;
    let body = std::fs::read(manifest)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn image(State(app): State<AppState>, Path(file): Path<String>) -> Result<Response, Error> {
    let id = file.strip_suffix(".png").unwrap_or(&file);
    let Some(img) = app.store.image(id) else {
        return Ok((StatusCode::NOT_FOUND, "no such image").into_response());
    };
    let bytes = img.png_bytes()?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER_INDEX)
}

pub fn router(app: AppState) -> Router {
    let api = Router::new()
        .route("/api/symbols", get(symbols))
        .route("/api/tasks", post(create_task))
        .route("/api/tasks/{id}", get(get_task))
        .route("/api/tasks/{id}/votes", post(submit_votes))
        .route("/api/pool/status", get(pool_status))
        .route("/api/finalize", post(finalize))
        .route("/api/export", get(export))
        .route("/img/{file}", get(image));
    let api = match &app.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    };
    api.with_state(app)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, app: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("labeling service on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app)).await
}
