//! The JSON API. Every handler is a thin view over the experiment
//! directory; long stages run as jobs on the blocking pool.

use crate::jobs::{JobHandle, JobState, Jobs};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use helixforge_core::interpret::{ImportanceConfig, InterpretError};
use helixforge_core::preprocess::PreprocessConfig;
use helixforge_provenance::{
    is_locked, CreateRequest, Experiment, FiOptions, MlOptions, PreprocessingOptions, ProvenanceError, Stage, Workspace,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::net::SocketAddr;
use std::sync::Arc;

const MAX_UPLOAD: usize = 256 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    ws: Arc<Workspace>,
    jobs: Arc<Jobs>,
}

pub fn router(ws: Workspace) -> Router {
    let state = AppState { ws: Arc::new(ws), jobs: Arc::new(Jobs::default()) };
    Router::new()
        .route("/api/experiments", get(list).post(create))
        .route("/api/experiments/{name}", get(record))
        .route("/api/experiments/{name}/preprocess", post(preprocess))
        .route("/api/experiments/{name}/visualise", get(visualise))
        .route("/api/experiments/{name}/train", post(train))
        .route("/api/experiments/{name}/interpret", post(interpret))
        .route("/api/experiments/{name}/predict", post(predict))
        .route("/api/experiments/{name}/results", get(results))
        .route("/api/jobs/{id}", get(job))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(ws: Workspace, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on http://{}", ws.root().display(), listener.local_addr()?);
    axum::serve(listener, router(ws))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

impl ApiError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, error: "Invalid", message: message.into(), field: Some(field.into()) }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, error: "Internal", message: message.into(), field: None }
    }
}

/// Short name of the error variant, used as the `error` field.
pub fn error_kind(e: &ProvenanceError) -> &'static str {
    match e {
        ProvenanceError::InvalidName(_) => "InvalidName",
        ProvenanceError::NameCollision(_) => "NameCollision",
        ProvenanceError::NotFound(_) => "NotFound",
        ProvenanceError::CorruptLayout(_) => "CorruptLayout",
        ProvenanceError::VersionMismatch { .. } => "VersionMismatch",
        ProvenanceError::IllegalTransition { .. } => "IllegalTransition",
        ProvenanceError::Locked(_) => "Locked",
        ProvenanceError::Invalid(m) if m.starts_with("MissingFeature") => "MissingFeature",
        ProvenanceError::Invalid(_) => "Invalid",
        ProvenanceError::ReplayDivergence(_) => "ReplayDivergence",
        ProvenanceError::Io { .. } => "Io",
    }
}

impl From<ProvenanceError> for ApiError {
    fn from(e: ProvenanceError) -> Self {
        let status = match &e {
            ProvenanceError::Invalid(_) | ProvenanceError::InvalidName(_) => StatusCode::BAD_REQUEST,
            ProvenanceError::NotFound(_) => StatusCode::NOT_FOUND,
            ProvenanceError::NameCollision(_) | ProvenanceError::IllegalTransition { .. } => StatusCode::CONFLICT,
            ProvenanceError::Locked(_) => StatusCode::LOCKED,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &e {
            ProvenanceError::InvalidName(_) | ProvenanceError::NameCollision(_) => Some("name".to_string()),
            // "field: reason" messages name the offending field up front
            ProvenanceError::Invalid(m) => m.split_once(": ").filter(|(f, _)| !f.contains(' ')).map(|(f, _)| f.to_string()),
            _ => None,
        };
        Self { status, error: error_kind(&e), message: e.to_string(), field }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

/// Parses a JSON body; an empty body means all defaults.
fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let text = if bytes.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { bytes };
    let mut de = serde_json::Deserializer::from_slice(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::invalid(if path == "." { "body".to_string() } else { path }, e.inner().to_string())
    })
}

/// As `parse_body`, but errors are located against `Inner` first: serde
/// loses the field path inside flattened structs.
fn parse_flattened<Inner: DeserializeOwned, T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    parse_body::<Inner>(bytes)?;
    parse_body(bytes)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem_type: Option<helixforge_core::ProblemType>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dependent_variable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_state: Option<u64>,
}

fn summary(exp: &Experiment) -> Summary {
    let r = exp.record();
    Summary {
        name: r.name.clone(),
        status: r.status.to_string(),
        problem_type: Some(r.execution.problem_type),
        dependent_variable: Some(r.execution.dependent_variable.clone()),
        random_state: Some(r.execution.random_state),
    }
}

async fn list(State(s): State<AppState>) -> ApiResult<Json<Vec<Summary>>> {
    blocking(move || {
        let mut out = Vec::new();
        for name in s.ws.list()? {
            out.push(match s.ws.open(&name) {
                Ok(exp) => summary(&exp),
                Err(e) => Summary {
                    name,
                    status: format!("unreadable: {e}"),
                    problem_type: None,
                    dependent_variable: None,
                    random_state: None,
                },
            });
        }
        Ok(Json(out))
    })
    .await
}

fn multipart_err(e: axum::extract::multipart::MultipartError) -> ApiError {
    ApiError::invalid("body", e.body_text())
}

async fn create(State(s): State<AppState>, mut form: Multipart) -> ApiResult<(StatusCode, Json<Summary>)> {
    let (mut name, mut csv, mut options) = (None, None, None);
    while let Some(field) = form.next_field().await.map_err(multipart_err)? {
        match field.name().unwrap_or("") {
            "name" => name = Some(field.text().await.map_err(multipart_err)?),
            "csv" => csv = Some(field.bytes().await.map_err(multipart_err)?),
            "options" => options = Some(field.bytes().await.map_err(multipart_err)?),
            other => return Err(ApiError::invalid(other, "unexpected form field")),
        }
    }
    let mut req: CreateRequest = match options {
        Some(b) => parse_body(&b).map_err(|mut e| {
            e.field = e.field.map(|f| format!("options.{f}"));
            e
        })?,
        None => CreateRequest::default(),
    };
    if let Some(n) = name {
        req.name = n;
    }
    let csv = csv.ok_or_else(|| ApiError::invalid("csv", "a CSV file is required"))?;
    blocking(move || {
        let exp = s.ws.create(&req, &csv)?;
        Ok((StatusCode::CREATED, Json(summary(&exp))))
    })
    .await
}

async fn record(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let exp = s.ws.open(&name)?;
        serde_json::to_value(exp.record()).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

/// Validates the transition up front, then queues the stage behind any
/// other job for the same experiment.
async fn submit<F>(s: AppState, name: String, stage: Stage, run: F) -> ApiResult<(StatusCode, Json<JobHandle>)>
where
    F: FnOnce(&mut Experiment) -> Result<(), ProvenanceError> + Send + 'static,
{
    let (ws, jobs) = (s.ws.clone(), s.jobs.clone());
    let n = name.clone();
    blocking(move || {
        let exp = ws.open(&n)?;
        if jobs.active(&n) == 0 {
            exp.check(stage)?;
            if is_locked(exp.root()) {
                return Err(ProvenanceError::Locked(n).into());
            }
        }
        Ok(())
    })
    .await?;
    let handle = s.jobs.submit(&name, stage.as_str());
    let (ws, jobs, id) = (s.ws.clone(), s.jobs.clone(), handle.id.clone());
    let queue = jobs.queue(&name);
    tokio::task::spawn_blocking(move || {
        let _turn = queue.lock().unwrap_or_else(|p| p.into_inner());
        jobs.advance(&id, JobState::Running, 0.1, None);
        match ws.open(&name).and_then(|mut exp| run(&mut exp)) {
            Ok(()) => jobs.advance(&id, JobState::Done, 1.0, None),
            Err(e) => {
                log::warn!("job {id} ({name}) failed: {e}");
                jobs.advance(&id, JobState::Failed, 0.0, Some(format!("{}: {e}", error_kind(&e))));
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn preprocess(State(s): State<AppState>, Path(name): Path<String>, body: Bytes) -> ApiResult<(StatusCode, Json<JobHandle>)> {
    let opts: PreprocessingOptions = parse_flattened::<PreprocessConfig, _>(&body)?;
    submit(s, name, Stage::Preprocess, move |exp| exp.preprocess(opts)).await
}

async fn train(State(s): State<AppState>, Path(name): Path<String>, body: Bytes) -> ApiResult<(StatusCode, Json<JobHandle>)> {
    let opts: MlOptions = parse_body(&body)?;
    opts.train_options()?;
    submit(s, name, Stage::Train, move |exp| exp.train(opts)).await
}

async fn interpret(State(s): State<AppState>, Path(name): Path<String>, body: Bytes) -> ApiResult<(StatusCode, Json<JobHandle>)> {
    let opts: FiOptions = parse_flattened::<ImportanceConfig, _>(&body)?;
    opts.importance.validate().map_err(|e| match e {
        // config messages open with the field name
        InterpretError::InvalidConfig(m) => ApiError::invalid(m.split_whitespace().next().unwrap_or("body").to_string(), m),
        other => ApiError::invalid("body", other.to_string()),
    })?;
    submit(s, name, Stage::Interpret, move |exp| exp.interpret(opts)).await
}

/// Stored plots and summaries; the stage runs first if nothing is stored.
async fn visualise(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult<Json<Value>> {
    let queue = s.jobs.queue(&name);
    blocking(move || {
        let _turn = queue.lock().unwrap_or_else(|p| p.into_inner());
        let mut exp = s.ws.open(&name)?;
        if exp.stored_visualisation()?.is_none() {
            exp.visualise(None)?;
        }
        // always the read-back, so the first response equals later ones
        let view = exp.stored_visualisation()?.ok_or_else(|| ApiError::internal("visualisation produced no plots"))?;
        serde_json::to_value(view).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct PredictQuery {
    format: Option<String>,
}

async fn predict(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<PredictQuery>,
    mut form: Multipart,
) -> ApiResult<Response> {
    let (mut csv, mut models, mut format) = (None, Vec::new(), q.format);
    while let Some(field) = form.next_field().await.map_err(multipart_err)? {
        match field.name().unwrap_or("") {
            "csv" => csv = Some(field.bytes().await.map_err(multipart_err)?),
            "models" => {
                let text = field.text().await.map_err(multipart_err)?;
                models.extend(text.split(',').map(str::trim).filter(|m| !m.is_empty()).map(String::from));
            }
            "format" => format = Some(field.text().await.map_err(multipart_err)?),
            other => return Err(ApiError::invalid(other, "unexpected form field")),
        }
    }
    let csv = csv.ok_or_else(|| ApiError::invalid("csv", "a CSV file is required"))?;
    let as_csv = match format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => return Err(ApiError::invalid("format", format!("expected `json` or `csv`, got `{other}`"))),
    };
    let queue = s.jobs.queue(&name);
    let table = blocking(move || {
        let _turn = queue.lock().unwrap_or_else(|p| p.into_inner());
        Ok(s.ws.open(&name)?.predict(&csv, &models)?)
    })
    .await?;
    Ok(if as_csv {
        ([(header::CONTENT_TYPE, "text/csv")], table.to_csv_string()).into_response()
    } else {
        Json(json!({"header": table.header, "rows": table.rows})).into_response()
    })
}

async fn results(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let view = s.ws.open(&name)?.results()?;
        serde_json::to_value(view).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

async fn job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobHandle>> {
    s.jobs.get(&id).map(Json).ok_or(ApiError {
        status: StatusCode::NOT_FOUND,
        error: "NotFound",
        message: format!("no job with id `{id}`"),
        field: None,
    })
}

/// Every route, as (method, path), for checking the committed OpenAPI file.
pub const ROUTES: &[(&str, &str)] = &[
    ("get", "/api/experiments"),
    ("post", "/api/experiments"),
    ("get", "/api/experiments/{name}"),
    ("post", "/api/experiments/{name}/preprocess"),
    ("get", "/api/experiments/{name}/visualise"),
    ("post", "/api/experiments/{name}/train"),
    ("post", "/api/experiments/{name}/interpret"),
    ("post", "/api/experiments/{name}/predict"),
    ("get", "/api/experiments/{name}/results"),
    ("get", "/api/jobs/{id}"),
];
