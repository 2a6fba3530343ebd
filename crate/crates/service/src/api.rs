//! Routes under `/api/v1`.
//!
//! Core routes: `PUT /projects`, `GET /designResults/{projectId}`,
//! `POST /tasks`, `GET /tasks/{taskId}`. Everything else is an extension.

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State as AxState};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::{json, Value};

use molgen_core::dataset::{read_csv, LoadOptions};
use molgen_core::pipeline::RulesSpec;
use molgen_core::rules::parse_fragment;
use molgen_core::smiles;

use crate::docs::*;
use crate::state::State;
use crate::store::{valid_id, Collection, StoreError};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn field(mut self, field: impl Into<String>) -> ApiError {
        self.field = Some(field.into());
        self
    }

    fn not_found(what: &str, id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, format!("{what} {id:?} not found"))
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub(crate) fn router(state: State) -> Router {
    Router::new()
        .route("/api/v1/projects", put(upsert_project).get(list_projects))
        .route("/api/v1/projects/{id}", get(get_project))
        .route("/api/v1/designResults/{project_id}", get(design_results))
        .route("/api/v1/designResults/{project_id}/export", get(export_results))
        .route("/api/v1/tasks", post(submit_task).get(list_tasks))
        .route("/api/v1/tasks/{id}", get(get_task))
        .route("/api/v1/tasks/{id}/cancel", post(cancel_task))
        .route("/api/v1/results/{id}", get(get_result))
        .route("/api/v1/datasets", get(list_datasets))
        .route("/api/v1/datasets/{name}", get(get_dataset).put(put_dataset))
        .route("/api/v1/smiles/validate", post(validate_smiles))
        .route("/api/v1/health", get(|| async { Json(json!({ "status": "ok", "version": API_VERSION })) }))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

async fn auth(AxState(state): AxState<State>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        if req.method() != Method::GET && req.method() != Method::HEAD {
            let ok = req
                .headers()
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.strip_prefix("Bearer "))
                .is_some_and(|t| t == token);
            if !ok {
                return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
            }
        }
    }
    next.run(req).await
}

/// Deserializes a body, reporting the offending field when serde names one.
fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let value: Value = serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))?;
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        let err = ApiError::bad_request(msg.clone());
        match msg.split('`').nth(1) {
            Some(f) if msg.starts_with("missing field") || msg.starts_with("unknown field") => err.field(f),
            _ => err,
        }
    })
}

fn validate_project(state: &State, input: &ProjectInput) -> ApiResult<()> {
    if !valid_id(&input.dataset) {
        return Err(ApiError::bad_request("dataset name must be 1-64 of [A-Za-z0-9_-]").field("dataset"));
    }
    if state.dataset_path(&input.dataset).is_none_or(|p| !p.exists()) {
        return Err(ApiError::bad_request(format!("dataset {:?} does not exist", input.dataset)).field("dataset"));
    }
    let g = &input.generation;
    if let RulesSpec::Named(name) = &g.rules {
        if name != "default" && name != "none" && !name.is_empty() {
            return Err(ApiError::bad_request("rules must be \"default\", \"none\" or an inline list").field("generation.rules"));
        }
    }
    g.rules
        .resolve()
        .map_err(|e| ApiError::bad_request(e.to_string()).field("generation.rules"))?;
    if let Some(atoms) = &g.atoms {
        atoms
            .atoms()
            .map_err(|e| ApiError::bad_request(e.to_string()).field("generation.atoms"))?;
    }
    for s in &g.seeds {
        smiles::parse(s).map_err(|e| ApiError::bad_request(format!("seed {s:?}: {e}")).field("generation.seeds"))?;
    }
    if let Some([lo, hi]) = g.target {
        if !(lo <= hi) {
            return Err(ApiError::bad_request("target low exceeds high").field("generation.target"));
        }
    }
    Ok(())
}

async fn upsert_project(AxState(state): AxState<State>, body: Bytes) -> ApiResult<Json<Project>> {
    let input: ProjectInput = parse_body(&body)?;
    let id = match &input.id {
        Some(id) if !valid_id(id) => return Err(ApiError::bad_request("id must be 1-64 of [A-Za-z0-9_-]").field("id")),
        Some(id) => id.clone(),
        None => uuid::Uuid::new_v4().to_string(),
    };
    validate_project(&state, &input)?;
    if state.has_active_task(&id) {
        return Err(ApiError::new(StatusCode::CONFLICT, "a queued or running task references this project"));
    }
    let previous = state.project(&id);
    let project = Project::from_input(input, id, previous.as_ref());
    Ok(Json(state.save_project(project)?))
}

async fn list_projects(AxState(state): AxState<State>) -> Json<Vec<Project>> {
    Json(state.projects.lock().unwrap().values().cloned().collect())
}

async fn get_project(AxState(state): AxState<State>, Path(id): Path<String>) -> ApiResult<Json<Project>> {
    state.project(&id).map(Json).ok_or_else(|| ApiError::not_found("project", &id))
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    page: Option<usize>,
    page_size: Option<usize>,
}

fn latest_results(state: &State, project_id: &str) -> ApiResult<(Option<String>, Option<GenerateResult>)> {
    let project = state.project(project_id).ok_or_else(|| ApiError::not_found("project", project_id))?;
    let Some(task_id) = project.design_results else {
        return Ok((None, None));
    };
    let result: Option<GenerateResult> = state.store.get(Collection::Results, &task_id)?;
    Ok((Some(task_id), result))
}

async fn design_results(
    AxState(state): AxState<State>,
    Path(project_id): Path<String>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Json<DesignResultsPage>> {
    let page = q.page.unwrap_or(1).max(1);
    let page_size = q.page_size.unwrap_or(100).clamp(1, 10_000);
    let (task_id, result) = latest_results(&state, &project_id)?;
    let (properties, rows, stats) = match result {
        Some(r) => (r.properties, r.rows, Some(r.stats)),
        None => (Vec::new(), Vec::new(), None),
    };
    let total = rows.len();
    let rows = rows.into_iter().skip((page - 1) * page_size).take(page_size).collect();
    Ok(Json(DesignResultsPage {
        project_id,
        task_id,
        properties,
        total,
        page,
        page_size,
        rows,
        stats,
    }))
}

/// Tab-separated `smiles<TAB>prediction...`, one solution per line.
async fn export_results(AxState(state): AxState<State>, Path(project_id): Path<String>) -> ApiResult<Response> {
    let (_, result) = latest_results(&state, &project_id)?;
    let mut out = String::new();
    for row in result.map(|r| r.rows).unwrap_or_default() {
        out.push_str(&row.smiles);
        for p in &row.predictions {
            out.push('\t');
            out.push_str(&p.to_string());
        }
        out.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], out).into_response())
}

async fn submit_task(AxState(state): AxState<State>, body: Bytes) -> ApiResult<(StatusCode, Json<Task>)> {
    let req: TaskRequest = parse_body(&body)?;
    let project = state
        .project(&req.project_id)
        .ok_or_else(|| ApiError::not_found("project", &req.project_id))?;
    let payload = match req.kind {
        TaskKind::Train => {
            if state.dataset_path(&project.dataset).is_none_or(|p| !p.exists()) {
                return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "project dataset is missing"));
            }
            serde_json::to_value(TrainPayload {
                dataset: project.dataset.clone(),
                excluded: project.excluded.clone(),
                training: project.training.clone(),
            })
        }
        TaskKind::Generate => {
            let Some(model) = project.model.clone() else {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "project has no trained model; submit a train task first",
                ));
            };
            serde_json::to_value(GeneratePayload {
                dataset: project.dataset.clone(),
                model,
                generation: project.generation.clone(),
            })
        }
    }
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let task = Task {
        id: uuid::Uuid::new_v4().to_string(),
        project_id: project.id,
        kind: req.kind,
        status: TaskStatus::Queued,
        payload,
        result: None,
        progress: TaskProgress::default(),
        error: None,
        limit_reached: None,
        created_at: Utc::now(),
        started_at: None,
        finished_at: None,
    };
    state.insert_task(task.clone())?;
    let _ = state.queue.send(task.id.clone());
    Ok((StatusCode::ACCEPTED, Json(task)))
}

async fn get_task(AxState(state): AxState<State>, Path(id): Path<String>) -> ApiResult<Json<Task>> {
    state.task(&id).map(Json).ok_or_else(|| ApiError::not_found("task", &id))
}

#[derive(Debug, Deserialize)]
struct TaskFilter {
    project_id: Option<String>,
}

async fn list_tasks(AxState(state): AxState<State>, Query(f): Query<TaskFilter>) -> Json<Vec<Task>> {
    let ids: Vec<String> = state
        .tasks
        .lock()
        .unwrap()
        .values()
        .filter(|t| f.project_id.as_ref().is_none_or(|p| &t.project_id == p))
        .map(|t| t.id.clone())
        .collect();
    let mut tasks: Vec<Task> = ids.iter().filter_map(|id| state.task(id)).collect();
    tasks.sort_by_key(|t| t.created_at);
    Json(tasks)
}

/// Queued tasks are cancelled at once; running ones stop at the next node.
async fn cancel_task(AxState(state): AxState<State>, Path(id): Path<String>) -> ApiResult<Json<Task>> {
    let current = state.task(&id).ok_or_else(|| ApiError::not_found("task", &id))?;
    match current.status {
        TaskStatus::Queued => {
            state.update_task(&id, |t| {
                t.status = TaskStatus::Cancelled;
                t.finished_at = Some(Utc::now());
            })?;
        }
        TaskStatus::Running => {
            if let Some(c) = state.controls.lock().unwrap().get(&id) {
                c.cancel.store(true, std::sync::atomic::Ordering::SeqCst);
            }
        }
        _ => return Err(ApiError::new(StatusCode::CONFLICT, "task already finished")),
    }
    Ok(Json(state.task(&id).expect("task exists")))
}

async fn get_result(AxState(state): AxState<State>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    if !valid_id(&id) {
        return Err(ApiError::not_found("result", &id));
    }
    state
        .store
        .get::<Value>(Collection::Results, &id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found("result", &id))
}

fn dataset_info(name: &str, d: &molgen_core::dataset::Dataset) -> DatasetInfo {
    DatasetInfo {
        name: name.to_string(),
        size: d.len(),
        properties: d.properties.clone(),
        units: d.units.clone(),
    }
}

async fn list_datasets(AxState(state): AxState<State>) -> ApiResult<Json<Vec<DatasetInfo>>> {
    let dir = state.store.datasets_dir();
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.path().file_stem().and_then(|s| s.to_str()).map(String::from))
        .filter(|n| valid_id(n))
        .collect();
    names.sort();
    names.dedup();
    Ok(Json(
        names
            .iter()
            .filter_map(|n| state.load_dataset(n).map(|d| dataset_info(n, &d)))
            .collect(),
    ))
}

async fn get_dataset(AxState(state): AxState<State>, Path(name): Path<String>) -> ApiResult<Json<DatasetDetail>> {
    let d = state.load_dataset(&name).ok_or_else(|| ApiError::not_found("dataset", &name))?;
    let rows = d
        .records
        .iter()
        .enumerate()
        .map(|(index, r)| DatasetRow {
            index,
            smiles: r.smiles.clone(),
            values: r.values.clone(),
        })
        .collect();
    Ok(Json(DatasetDetail {
        info: dataset_info(&name, &d),
        rows,
    }))
}

/// Stores a CSV dataset after validating it.
async fn put_dataset(AxState(state): AxState<State>, Path(name): Path<String>, body: Bytes) -> ApiResult<Json<DatasetInfo>> {
    let path = state
        .dataset_path(&name)
        .ok_or_else(|| ApiError::bad_request("dataset name must be 1-64 of [A-Za-z0-9_-]"))?;
    let loaded = read_csv(&body[..], &name, &LoadOptions::default()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if loaded.dataset.is_empty() {
        return Err(ApiError::bad_request("dataset has no valid rows"));
    }
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, &body)
        .and_then(|_| std::fs::rename(&tmp, &path))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(dataset_info(&name, &loaded.dataset)))
}

async fn validate_smiles(Json(req): Json<SmilesCheck>) -> Json<SmilesVerdict> {
    let parsed = if req.fragment {
        parse_fragment(&req.smiles)
    } else {
        smiles::parse(&req.smiles)
    };
    Json(match parsed {
        Ok(g) => SmilesVerdict {
            valid: true,
            canonical: Some(smiles::write(&g)),
            error: None,
            position: None,
        },
        Err(e) => SmilesVerdict {
            valid: false,
            canonical: None,
            error: Some(e.to_string()),
            position: Some(e.position),
        },
    })
}
