//! HTTP routes under `/api/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fdscope_core::report::Report;
use fdscope_core::scenario::dedup::SessionError;
use fdscope_core::task::{AttrRef, TaskKind};
use fdscope_core::{AttrSet, CsvConfig, Error as CoreError, FieldError};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::query::{page, ResultsQuery, SortDir};
use crate::session::{Event, SessionFailure, SessionState};
use crate::tasks::{SubmitError, TaskStatus};
use crate::Service;

type AppState = Arc<Service>;

const MAX_UPLOAD: usize = 512 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    fields: Vec<FieldError>,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            fields: Vec::new(),
            details: None,
        }
    }

    fn invalid(fields: Vec<FieldError>) -> Self {
        let names: Vec<&str> = fields.iter().map(|f| f.field.as_str()).collect();
        ApiError {
            message: format!("invalid parameters: {}", names.join(", ")),
            fields,
            ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameters", "")
        }
    }

    fn field(field: &str, reason: impl Into<String>) -> Self {
        ApiError::invalid(vec![FieldError {
            field: field.to_owned(),
            reason: reason.into(),
        }])
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if !self.fields.is_empty() {
            body["fields"] = serde_json::to_value(&self.fields).expect("fields serialize");
        }
        if let Some(d) = self.details {
            body["details"] = d;
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/api/v1/datasets", post(upload_dataset))
        .route("/api/v1/datasets/{id}", get(get_dataset))
        .route("/api/v1/datasets/{id}/csv", get(get_dataset_csv))
        .route("/api/v1/tasks", post(submit_task).get(list_tasks))
        .route("/api/v1/tasks/{id}", get(get_task))
        .route("/api/v1/tasks/{id}/results", get(get_results))
        .route("/api/v1/tasks/{id}/report", get(get_report))
        .route("/api/v1/tasks/{id}/cancel", post(cancel_task))
        .route("/api/v1/dedup/{session}/state", get(session_state))
        .route("/api/v1/dedup/{session}/propose", post(session_state))
        .route("/api/v1/dedup/{session}/decide", post(session_decide))
        .route("/api/v1/dedup/{session}/skip", post(session_skip))
        .route("/api/v1/dedup/{session}/undo", post(session_undo))
        .route("/api/v1/dedup/{session}/finish", post(session_finish))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string()))
}

fn flag(q: &HashMap<String, String>, key: &str, default: bool) -> ApiResult<bool> {
    match q.get(key).map(String::as_str) {
        None => Ok(default),
        Some("true" | "1" | "yes") => Ok(true),
        Some("false" | "0" | "no") => Ok(false),
        Some(other) => Err(ApiError::field(key, format!("expected a boolean, got `{other}`"))),
    }
}

fn upload_config(q: &HashMap<String, String>) -> ApiResult<CsvConfig> {
    let mut cfg = CsvConfig::default();
    if let Some(sep) = q.get("separator") {
        cfg.separator = match sep.as_str() {
            "tab" | "\\t" => '\t',
            s if s.chars().count() == 1 => s.chars().next().expect("one char"),
            _ => return Err(ApiError::field("separator", "must be a single character")),
        };
    }
    cfg.has_header = flag(q, "header", true)?;
    cfg.nulls_distinct = flag(q, "nulls_distinct", false)?;
    if let Some(null) = q.get("null") {
        cfg.null_token = null.clone();
    }
    Ok(cfg)
}

fn parse_failure(e: CoreError) -> ApiError {
    match e {
        CoreError::RaggedRow { line, expected, found } => {
            ApiError::new(StatusCode::BAD_REQUEST, "ragged_row", format!("line {line}: expected {expected} fields, found {found}"))
                .with_details(json!({ "line": line, "expected": expected, "found": found }))
        }
        CoreError::Csv(ref c) => {
            let line = c.position().map(|p| p.line());
            ApiError::new(StatusCode::BAD_REQUEST, "malformed_csv", e.to_string()).with_details(json!({ "line": line }))
        }
        CoreError::EmptyInput => ApiError::new(StatusCode::BAD_REQUEST, "empty_input", e.to_string()),
        CoreError::Io(_) => ApiError::internal(e),
        other => ApiError::new(StatusCode::BAD_REQUEST, "invalid_dataset", other.to_string()),
    }
}

async fn upload_dataset(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Response> {
    if body.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_body", "request body is empty"));
    }
    let cfg = upload_config(&q)?;
    let name = q.get("name").cloned().unwrap_or_default();
    let store = s.store.clone();
    let (meta, fresh) = tokio::task::spawn_blocking(move || store.put_dataset(&body, &cfg, &name, None))
        .await
        .map_err(ApiError::internal)?
        .map_err(parse_failure)?;
    let status = if fresh { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(meta)).into_response())
}

fn unknown_dataset(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_dataset", format!("dataset `{id}` does not exist"))
        .with_details(json!({ "dataset": id }))
}

async fn get_dataset(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let meta = s.store.dataset_meta(&id).ok_or_else(|| unknown_dataset(&id))?;
    Ok(Json(meta).into_response())
}

async fn get_dataset_csv(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = s.store.dataset_bytes(&id).ok_or_else(|| unknown_dataset(&id))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], bytes).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitRequest {
    kind: String,
    #[serde(default)]
    dataset: Option<String>,
    /// Further partitions for the anomaly scenario.
    #[serde(default)]
    datasets: Vec<String>,
    #[serde(default)]
    params: Value,
}

async fn submit_task(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: SubmitRequest = parse_body(&body)?;
    let kind: TaskKind = req
        .kind
        .parse()
        .map_err(|_| ApiError::field("kind", format!("unknown task kind `{}`", req.kind)))?;
    let datasets: Vec<String> = req.dataset.into_iter().chain(req.datasets).collect();
    let tasks = s.tasks.clone();
    let record = tokio::task::spawn_blocking(move || tasks.submit(kind, datasets, req.params))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| match e {
            SubmitError::UnknownDataset(id) => unknown_dataset(&id),
            SubmitError::Invalid(fields) => ApiError::invalid(fields),
            SubmitError::Io(e) => ApiError::internal(e),
        })?;
    Ok((StatusCode::ACCEPTED, Json(record)).into_response())
}

async fn list_tasks(State(s): State<AppState>) -> Json<Value> {
    Json(json!({ "tasks": s.tasks.list() }))
}

fn unknown_task(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_task", format!("task `{id}` does not exist"))
}

async fn get_task(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = s.tasks.get(&id).ok_or_else(|| unknown_task(&id))?;
    Ok(Json(record).into_response())
}

fn completed_result(s: &Service, id: &str) -> ApiResult<Vec<u8>> {
    let record = s.tasks.get(id).ok_or_else(|| unknown_task(id))?;
    if record.status != TaskStatus::Completed {
        let mut e = ApiError::new(
            StatusCode::CONFLICT,
            "task_not_completed",
            format!("task is {}", record.status.as_str()),
        )
        .with_details(json!({ "status": record.status }));
        if let Some(msg) = &record.error {
            e.message = format!("task failed: {msg}");
        }
        return Err(e);
    }
    s.store
        .result(id)
        .ok_or_else(|| ApiError::internal(format!("result of task {id} is missing")))
}

fn results_query(q: &HashMap<String, String>) -> ApiResult<ResultsQuery> {
    let number = |key: &str| -> ApiResult<Option<usize>> {
        q.get(key)
            .map(|v| v.parse::<usize>().map_err(|_| ApiError::field(key, "must be a non-negative integer")))
            .transpose()
    };
    let sort_dir = match q.get("sort_dir").map(String::as_str) {
        None => None,
        Some("asc") => Some(SortDir::Asc),
        Some("desc") => Some(SortDir::Desc),
        Some(_) => return Err(ApiError::field("sort_dir", "must be `asc` or `desc`")),
    };
    Ok(ResultsQuery {
        offset: number("offset")?,
        limit: number("limit")?,
        filter: q.get("filter").cloned(),
        sort_by: q.get("sort_by").cloned(),
        sort_dir,
    })
}

async fn get_results(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let query = results_query(&q)?;
    let bytes = completed_result(&s, &id)?;
    let page = tokio::task::spawn_blocking(move || {
        let report: Report = serde_json::from_slice(&bytes).map_err(ApiError::internal)?;
        page(&id, report.instances(), &query).map_err(|e| ApiError::field(e.field, e.reason))
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(Json(page).into_response())
}

async fn get_report(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = completed_result(&s, &id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn cancel_task(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = s
        .tasks
        .cancel(&id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| unknown_task(&id))?;
    Ok(Json(record).into_response())
}

fn session_failure(e: SessionFailure) -> ApiError {
    match e {
        SessionFailure::UnknownTask => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", "no such dedup session"),
        SessionFailure::NotDedup => {
            ApiError::new(StatusCode::BAD_REQUEST, "not_a_dedup_task", "sessions exist only for scenario_dedup tasks")
        }
        SessionFailure::NotCompleted => ApiError::new(
            StatusCode::CONFLICT,
            "task_not_completed",
            "the candidate scan has not completed",
        ),
        SessionFailure::Rejected(SessionError::NotProposed(a, b)) => {
            ApiError::new(StatusCode::CONFLICT, "not_proposed", format!("pair ({a}, {b}) is not the current proposal"))
        }
        SessionFailure::Rejected(SessionError::Stale(r)) => ApiError::new(
            StatusCode::GONE,
            "stale_pair",
            format!("row {r} was already consumed by an earlier decision"),
        ),
        SessionFailure::Rejected(SessionError::Invalid(m)) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_decision", m)
        }
        SessionFailure::Storage(m) => ApiError::internal(m),
    }
}

/// Runs `op` on the session's state under its lock, off the async runtime.
async fn with_session<T: Send + 'static>(
    s: AppState,
    id: String,
    op: impl FnOnce(&Service, &mut SessionState) -> Result<T, SessionFailure> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(move || {
        let record = s.tasks.get(&id);
        if let Some(r) = &record {
            if r.kind == TaskKind::ScenarioDedup && r.status != TaskStatus::Completed {
                return Err(SessionFailure::NotCompleted);
            }
        }
        let handle = s.sessions.get(record.as_ref())?;
        let mut state = handle.lock().unwrap();
        op(&s, &mut state)
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(session_failure)
}

async fn respond_view(s: AppState, id: String, event: Option<Event>) -> ApiResult<Response> {
    let view = with_session(s, id, move |svc, state| {
        if let Some(event) = event {
            svc.sessions.record(state, event)?;
        }
        state.view()
    })
    .await?;
    Ok(Json(view).into_response())
}

async fn session_state(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    respond_view(s, id, None).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecideRequest {
    row_a: u32,
    row_b: u32,
    keep: u32,
    #[serde(default)]
    copy_attrs: Vec<AttrRef>,
}

async fn session_decide(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: DecideRequest = parse_body(&body)?;
    let view = with_session(s, id, move |svc, state| {
        let mut copy = AttrSet::EMPTY;
        for a in &req.copy_attrs {
            let idx = a
                .resolve(&state.source)
                .map_err(|e| SessionFailure::Rejected(SessionError::Invalid(e.to_string())))?;
            copy = copy.with(idx);
        }
        let event = Event::Decide {
            row_a: req.row_a,
            row_b: req.row_b,
            keep: req.keep,
            copy_attrs: copy,
        };
        svc.sessions.record(state, event)?;
        state.view()
    })
    .await?;
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRequest {
    row_a: u32,
    row_b: u32,
}

async fn session_skip(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: PairRequest = parse_body(&body)?;
    respond_view(s, id, Some(Event::Skip { row_a: req.row_a, row_b: req.row_b })).await
}

async fn session_undo(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    respond_view(s, id, Some(Event::Undo)).await
}

async fn session_finish(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (meta, view) = with_session(s, id, |svc, state| {
        let meta = svc.sessions.finish(state)?;
        Ok((meta, state.view()?))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "dataset": meta, "session": view }))).into_response())
}
