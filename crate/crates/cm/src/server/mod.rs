//! The HTTP service: projects, asynchronous analysis jobs, coding sessions
//! and topic-model review over JSON.

pub mod jobs;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, FieldError};
pub use state::App;
use store::{JobKind, JobRequest, Store};

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            Error::Unprocessable(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable"),
            Error::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            Error::Io(_) | Error::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let fields: &[FieldError] = match &self {
            Error::Validation(f) => f,
            _ => &[],
        };
        let body = serde_json::json!({
            "error": { "code": code, "message": self.to_string(), "fields": fields }
        });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, Error>;

/// Parses a JSON body, naming the offending field on type errors.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let bytes = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { bytes };
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::BadRequest(format!("malformed JSON: {inner}"))
        } else {
            Error::Validation(vec![FieldError { path, message: inner.to_string() }])
        }
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(Error::internal)?
}

type AppState = State<Arc<App>>;

#[derive(Deserialize)]
struct NewProject {
    name: String,
}

async fn create_project(State(app): AppState, body: Bytes) -> ApiResult<Response> {
    let req: NewProject = parse_body(&body)?;
    let meta = blocking(move || app.create_project(&req.name)).await?;
    Ok((StatusCode::CREATED, Json(meta)).into_response())
}

async fn list_projects(State(app): AppState) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "projects": app.list_projects() }))
}

async fn get_project(State(app): AppState, Path(p): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.project_meta(&p)?).into_response())
}

fn accepted(record: store::JobRecord) -> Response {
    let location = format!("/projects/{}/jobs/{}", record.project, record.id);
    (StatusCode::ACCEPTED, [(header::LOCATION, location)], Json(record)).into_response()
}

async fn import(State(app): AppState, Path(p): Path<String>, body: Bytes) -> ApiResult<Response> {
    let options: serde_json::Value = parse_body(&body)?;
    let request = JobRequest {
        kind: JobKind::Import,
        snapshot: None,
        params: Default::default(),
        blacklist_entities: Default::default(),
        options,
    };
    Ok(accepted(blocking(move || app.submit(&p, request)).await?))
}

#[derive(Deserialize)]
struct SnapshotQuery {
    snapshot: Option<u32>,
}

async fn document(
    State(app): AppState,
    Path((p, id)): Path<(String, String)>,
    Query(q): Query<SnapshotQuery>,
) -> ApiResult<Response> {
    let doc = blocking(move || app.document(&p, &id, q.snapshot)).await?;
    Ok(Json(doc).into_response())
}

async fn submit_job(State(app): AppState, Path(p): Path<String>, body: Bytes) -> ApiResult<Response> {
    let request: JobRequest = parse_body(&body)?;
    Ok(accepted(blocking(move || app.submit(&p, request)).await?))
}

async fn list_jobs(State(app): AppState, Path(p): Path<String>) -> ApiResult<Response> {
    Ok(Json(serde_json::json!({ "jobs": app.jobs(&p)? })).into_response())
}

async fn get_job(State(app): AppState, Path((p, j)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(Json(app.job(&p, &j)?).into_response())
}

async fn cancel_job(State(app): AppState, Path((p, j)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(Json(blocking(move || app.cancel(&p, &j)).await?).into_response())
}

async fn get_result(State(app): AppState, Path((p, r)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(Json(blocking(move || app.result(&p, &r)).await?).into_response())
}

fn content_type(name: &str) -> &'static str {
    match name.rsplit('.').next() {
        Some("csv") => "text/csv; charset=utf-8",
        Some("json") => "application/json",
        Some("qdpx") => "application/zip",
        _ => "application/octet-stream",
    }
}

async fn result_file(
    State(app): AppState,
    Path((p, r, name)): Path<(String, String, String)>,
) -> ApiResult<Response> {
    let ct = content_type(&name);
    let bytes = blocking(move || app.result_file(&p, &r, &name)).await?;
    Ok(([(header::CONTENT_TYPE, ct)], bytes).into_response())
}

async fn create_session(State(app): AppState, Path(p): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: state::SessionRequest = parse_body(&body)?;
    let out = blocking(move || app.create_session(&p, req)).await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn get_session(State(app): AppState, Path(s): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.session_summary(&s)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    doc_id: String,
    code: String,
    #[serde(default)]
    author: String,
    #[serde(default)]
    overwrite: bool,
}

async fn add_label(State(app): AppState, Path(s): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: LabelRequest = parse_body(&body)?;
    let out = blocking(move || app.add_label(&s, &req.doc_id, &req.code, &req.author, req.overwrite)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    wait: bool,
}

async fn next_document(State(app): AppState, Path(s): Path<String>, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    Ok(Json(blocking(move || app.next_document(&s, q.wait)).await?).into_response())
}

#[derive(Deserialize)]
struct TopicsQuery {
    n: Option<usize>,
    lambda: Option<f64>,
}

async fn topics(
    State(app): AppState,
    Path((p, m)): Path<(String, String)>,
    Query(q): Query<TopicsQuery>,
) -> ApiResult<Response> {
    let lambda = q.lambda.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::field("lambda", "must lie in [0, 1]"));
    }
    let n = q.n.unwrap_or(10);
    Ok(Json(blocking(move || app.topics(&p, &m, n, lambda)).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicLabelRequest {
    label: String,
    #[serde(default)]
    author: String,
}

async fn label_topic(
    State(app): AppState,
    Path((p, m, k)): Path<(String, String, usize)>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: TopicLabelRequest = parse_body(&body)?;
    Ok(Json(blocking(move || app.label_topic(&p, &m, k, &req.label, &req.author)).await?).into_response())
}

#[derive(Deserialize)]
struct HighlightQuery {
    min_weight: Option<f64>,
}

async fn highlight(
    State(app): AppState,
    Path((p, m, k, doc)): Path<(String, String, usize, String)>,
    Query(q): Query<HighlightQuery>,
) -> ApiResult<Response> {
    let w = q.min_weight.unwrap_or(0.0);
    Ok(Json(blocking(move || app.highlight(&p, &m, k, &doc, w)).await?).into_response())
}

#[derive(Deserialize)]
struct ExportRequest {
    #[serde(default)]
    snapshot: Option<u32>,
    #[serde(flatten)]
    options: serde_json::Map<String, serde_json::Value>,
}

async fn export(State(app): AppState, Path((p, format)): Path<(String, String)>, body: Bytes) -> ApiResult<Response> {
    let format: jobs::ExportFormat = format.parse()?;
    let req: ExportRequest = parse_body(&body)?;
    let mut options = req.options;
    options.insert("format".into(), serde_json::to_value(format).map_err(Error::internal)?);
    let request = JobRequest {
        kind: JobKind::Export,
        snapshot: req.snapshot,
        params: Default::default(),
        blacklist_entities: Default::default(),
        options: serde_json::Value::Object(options),
    };
    Ok(accepted(blocking(move || app.submit(&p, request)).await?))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn fallback() -> Error {
    Error::NotFound("no such endpoint".into())
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{p}", get(get_project))
        .route("/projects/{p}/import", post(import))
        .route("/projects/{p}/documents/{id}", get(document))
        .route("/projects/{p}/jobs", post(submit_job).get(list_jobs))
        .route("/projects/{p}/jobs/{j}", get(get_job))
        .route("/projects/{p}/jobs/{j}/cancel", post(cancel_job))
        .route("/projects/{p}/results/{r}", get(get_result))
        .route("/projects/{p}/results/{r}/files/{name}", get(result_file))
        .route("/projects/{p}/sessions", post(create_session))
        .route("/projects/{p}/models/{m}/topics", get(topics))
        .route("/projects/{p}/models/{m}/topics/{k}/label", post(label_topic))
        .route("/projects/{p}/models/{m}/topics/{k}/highlight/{doc}", get(highlight))
        .route("/projects/{p}/export/{format}", post(export))
        .route("/sessions/{s}", get(get_session))
        .route("/sessions/{s}/labels", post(add_label))
        .route("/sessions/{s}/next", get(next_document))
        .fallback(fallback)
        .with_state(app)
}

/// Service settings.
#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub workers: usize,
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: ServeConfig) -> anyhow::Result<()> {
    let store = Store::open(&config.data_dir)?;
    let app = App::open(store, config.workers)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("cm: listening on http://{} (data in {})", listener.local_addr()?, config.data_dir.display());
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
