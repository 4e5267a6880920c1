//! HTTP handlers. Public routes live under `/api`; the extraction side of a
//! split deployment is served under `/internal`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use policyloop_core::corpus::binary_indicator;
use policyloop_core::manager::JobId;
use policyloop_core::{parse_policy, Document, FeedbackEntry, LabelId, LabelSchema};
use serde::{Deserialize, Serialize};

use crate::backend::{ExtractionBackend, LocalBackend, TrainAccepted, TrainRequest};
use crate::error::ApiError;
use crate::store::{AnnotationRecord, NewTask, Task, TaskId, TaskRepository, TaskStatus};

#[derive(Clone)]
pub struct AppState {
    inner: Arc<AppInner>,
}

struct AppInner {
    store: Arc<dyn TaskRepository>,
    backend: Arc<dyn ExtractionBackend>,
    schema: LabelSchema,
    task_locks: Mutex<HashMap<TaskId, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(store: Arc<dyn TaskRepository>, backend: Arc<dyn ExtractionBackend>, schema: LabelSchema) -> Self {
        AppState {
            inner: Arc::new(AppInner {
                store,
                backend,
                schema,
                task_locks: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn store(&self) -> &Arc<dyn TaskRepository> {
        &self.inner.store
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.inner.schema
    }

    fn task_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.inner
            .task_locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Runs a backend call on the blocking pool.
    async fn backend<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&dyn ExtractionBackend) -> Result<T, ApiError> + Send + 'static,
    {
        let backend = self.inner.backend.clone();
        tokio::task::spawn_blocking(move || f(backend.as_ref()))
            .await
            .map_err(|e| ApiError::Internal(format!("backend task panicked: {e}")))?
    }

    fn task(&self, id: &str) -> Result<Task, ApiError> {
        self.inner
            .store
            .task(id)
            .ok_or_else(|| ApiError::NotFound(format!("task `{id}` not found")))
    }
}

pub fn api_router(state: AppState) -> Router {
    Router::new()
        .route("/api/tasks", get(list_tasks).post(create_task))
        .route("/api/tasks/{id}", get(get_task))
        .route("/api/tasks/{id}/suggestions", get(get_suggestions))
        .route(
            "/api/tasks/{id}/annotations",
            get(list_annotations).post(post_annotation),
        )
        .route("/api/tasks/{id}/submit", post(submit_task))
        .route("/api/train", post(train))
        .route("/api/train/{job}", get(get_job))
        .route("/api/labels", get(get_labels))
        .route("/api/documents/{id}", get(get_document))
        .with_state(state)
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v).map_err(|e| ApiError::BadRequest {
        message: e.body_text(),
        path: None,
    })
}

async fn list_tasks(State(state): State<AppState>) -> Json<Vec<Task>> {
    Json(state.inner.store.tasks())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDetail {
    #[serde(flatten)]
    pub task: Task,
    pub annotations: Vec<AnnotationRecord>,
    pub children: Vec<TaskId>,
}

async fn get_task(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<TaskDetail>, ApiError> {
    let task = state.task(&id)?;
    let children = state
        .inner
        .store
        .tasks()
        .into_iter()
        .filter(|t| t.parent.as_deref() == Some(id.as_str()))
        .map(|t| t.id)
        .collect();
    Ok(Json(TaskDetail {
        annotations: state.inner.store.annotations(&id),
        task,
        children,
    }))
}

async fn create_task(State(state): State<AppState>, body: String) -> Result<Response, ApiError> {
    let parsed = parse_policy(&body)?;
    if state.inner.store.document(&parsed.id).is_some() {
        return Err(ApiError::Conflict(format!("policy `{}` already exists", parsed.id)));
    }
    let mut doc = parsed.clone();
    doc.blobs.iter_mut().for_each(|b| b.annotations.clear());

    let registered = doc.clone();
    state.backend(move |b| b.register_document(&registered)).await?;
    state.inner.store.insert_document(&doc)?;
    let task = state.inner.store.create_task(NewTask {
        document_id: doc.id.clone(),
        labels: state.inner.schema.top_level(),
        parent: None,
        parent_label: None,
    })?;

    // Annotations shipped with the record count as human feedback.
    let _guard = state.task_lock(&task.id).lock_owned().await;
    let mut deeper = Vec::new();
    for blob in &parsed.blobs {
        for a in &blob.annotations {
            if task.labels.contains(&a.label) {
                apply_annotation(&state, &task, &a.label, blob.index, a.value, None).await?;
            } else {
                deeper.push(FeedbackEntry::new(&doc.id, blob.index, a.label.clone(), a.value));
            }
        }
    }
    if !deeper.is_empty() {
        state.backend(move |b| b.record_feedback(&deeper)).await?;
    }
    Ok((StatusCode::CREATED, Json(task)).into_response())
}

#[derive(Debug, Deserialize)]
struct SuggestionQuery {
    label: Option<String>,
    k: Option<String>,
}

async fn get_suggestions(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SuggestionQuery>,
) -> Result<Response, ApiError> {
    let task = state.task(&id)?;
    let label = LabelId::new(
        q.label
            .ok_or_else(|| ApiError::Unprocessable("missing `label` parameter".into()))?,
    );
    if !task.labels.contains(&label) {
        return Err(ApiError::Unprocessable(format!(
            "label `{label}` is not offered by task `{id}`"
        )));
    }
    let k = match q.k {
        None => policyloop_core::DEFAULT_K,
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::Unprocessable(format!("k must be a positive integer, got `{raw}`")))?,
    };
    if k < 1 {
        return Err(ApiError::Unprocessable("k must be at least 1".into()));
    }
    let document_id = task.document_id.clone();
    match state.backend(move |b| b.suggest(&document_id, &label, k)).await? {
        Some(s) => Ok(Json(s).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn list_annotations(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<AnnotationRecord>>, ApiError> {
    state.task(&id)?;
    Ok(Json(state.inner.store.annotations(&id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub label: LabelId,
    pub blob_index: usize,
    #[serde(with = "binary_indicator")]
    pub value: bool,
    /// Version being replaced; 0 when creating. Omit for last-writer-wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub if_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResponse {
    #[serde(flatten)]
    pub annotation: AnnotationRecord,
    /// Task offering the label's children, when it has any.
    pub child_task: Option<TaskId>,
    /// Whether `child_task` was created by this request.
    pub spawned: bool,
    pub triggered_jobs: Vec<JobId>,
}

async fn post_annotation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AnnotationRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json_body(body)?;
    let _guard = state.task_lock(&id).lock_owned().await;
    let task = state.task(&id)?;
    let out = apply_annotation(&state, &task, &req.label, req.blob_index, req.value, req.if_version).await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

/// Validates, forwards the feedback, persists the annotation and spawns
/// the child task. Callers hold the task lock.
async fn apply_annotation(
    state: &AppState,
    task: &Task,
    label: &LabelId,
    blob_index: usize,
    value: bool,
    if_version: Option<u64>,
) -> Result<AnnotationResponse, ApiError> {
    if task.status == TaskStatus::Done {
        return Err(ApiError::Conflict(format!("task `{}` is already submitted", task.id)));
    }
    if !task.labels.contains(label) {
        return Err(ApiError::Unprocessable(format!(
            "label `{label}` is not offered by task `{}`",
            task.id
        )));
    }
    let blobs = state
        .inner
        .store
        .document(&task.document_id)
        .map(|d| d.blobs.len())
        .ok_or_else(|| ApiError::Internal(format!("document `{}` missing from store", task.document_id)))?;
    if blob_index >= blobs {
        return Err(ApiError::Unprocessable(format!(
            "blob index {blob_index} out of range for {blobs} blobs"
        )));
    }
    if let Some(expected) = if_version {
        let current = state
            .inner
            .store
            .annotations(&task.id)
            .iter()
            .find(|a| &a.label == label && a.blob_index == blob_index)
            .map_or(0, |a| a.version);
        if current != expected {
            return Err(ApiError::Conflict(format!(
                "annotation `{label}` @ blob {blob_index} is at version {current}, not {expected}"
            )));
        }
    }

    let entry = FeedbackEntry::new(&task.document_id, blob_index, label.clone(), value);
    let receipt = state.backend(move |b| b.record_feedback(&[entry])).await?;
    let annotation = state
        .inner
        .store
        .put_annotation(&task.id, label, blob_index, value, if_version)?;

    let existing = state
        .inner
        .store
        .tasks()
        .into_iter()
        .find(|t| t.parent.as_deref() == Some(task.id.as_str()) && t.parent_label.as_ref() == Some(label));
    let children = state.inner.schema.children_of(label);
    let (child_task, spawned) = match existing {
        Some(t) => (Some(t.id), false),
        None if value && !children.is_empty() => {
            let child = state.inner.store.create_task(NewTask {
                document_id: task.document_id.clone(),
                labels: children,
                parent: Some(task.id.clone()),
                parent_label: Some(label.clone()),
            })?;
            (Some(child.id), true)
        }
        None => (None, false),
    };
    Ok(AnnotationResponse {
        annotation,
        child_task,
        spawned,
        triggered_jobs: receipt.triggered_jobs,
    })
}

async fn submit_task(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Task>, ApiError> {
    let _guard = state.task_lock(&id).lock_owned().await;
    let mut task = state.task(&id)?;
    if task.status != TaskStatus::Done {
        task.status = TaskStatus::Done;
        task.updated_at = chrono::Utc::now();
        state.inner.store.update_task(&task)?;
    }
    Ok(Json(task))
}

fn train_request(body: &str) -> Result<TrainRequest, ApiError> {
    if body.trim().is_empty() {
        return Ok(TrainRequest { label: None });
    }
    serde_json::from_str(body).map_err(|e| ApiError::BadRequest {
        message: e.to_string(),
        path: None,
    })
}

async fn train(State(state): State<AppState>, body: String) -> Result<Response, ApiError> {
    let req = train_request(&body)?;
    let jobs = state.backend(move |b| b.enqueue_retrain(req.label.as_ref())).await?;
    let accepted = TrainAccepted {
        job: jobs.first().copied(),
        jobs,
    };
    Ok((StatusCode::ACCEPTED, Json(accepted)).into_response())
}

async fn get_job(State(state): State<AppState>, Path(job): Path<JobId>) -> Result<Response, ApiError> {
    match state.backend(move |b| b.job(job)).await? {
        Some(info) => Ok(Json(info).into_response()),
        None => Err(ApiError::NotFound(format!("job {job} not found"))),
    }
}

async fn get_labels(State(state): State<AppState>) -> Json<LabelSchema> {
    Json(state.inner.schema.clone())
}

async fn get_document(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Document>, ApiError> {
    state
        .inner
        .store
        .document(&id)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("document `{id}` not found")))
}

/// Extraction-side routes, backed by a local manager.
pub fn internal_router(backend: Arc<LocalBackend>) -> Router {
    Router::new()
        .route("/internal/schema", get(internal_schema))
        .route("/internal/documents", post(internal_register))
        .route("/internal/documents/{id}/suggestions", get(internal_suggest))
        .route("/internal/feedback", post(internal_feedback))
        .route("/internal/train", post(internal_train))
        .route("/internal/train/{job}", get(internal_job))
        .with_state(backend)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("backend task panicked: {e}")))?
}

async fn internal_schema(State(b): State<Arc<LocalBackend>>) -> Result<Json<LabelSchema>, ApiError> {
    b.schema().map(Json)
}

async fn internal_register(
    State(b): State<Arc<LocalBackend>>,
    body: Result<Json<Document>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let doc = json_body(body)?;
    blocking(move || b.register_document(&doc)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn internal_suggest(
    State(b): State<Arc<LocalBackend>>,
    Path(id): Path<String>,
    Query(q): Query<SuggestionQuery>,
) -> Result<Response, ApiError> {
    let label = LabelId::new(
        q.label
            .ok_or_else(|| ApiError::Unprocessable("missing `label` parameter".into()))?,
    );
    let k = match q.k {
        None => policyloop_core::DEFAULT_K,
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::Unprocessable(format!("k must be a positive integer, got `{raw}`")))?,
    };
    match blocking(move || b.suggest(&id, &label, k)).await? {
        Some(s) => Ok(Json(s).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn internal_feedback(
    State(b): State<Arc<LocalBackend>>,
    body: Result<Json<Vec<FeedbackEntry>>, JsonRejection>,
) -> Result<Response, ApiError> {
    let entries = json_body(body)?;
    let receipt = blocking(move || b.record_feedback(&entries)).await?;
    Ok(Json(receipt).into_response())
}

async fn internal_train(State(b): State<Arc<LocalBackend>>, body: String) -> Result<Response, ApiError> {
    let req = train_request(&body)?;
    let jobs = blocking(move || b.enqueue_retrain(req.label.as_ref())).await?;
    Ok((
        StatusCode::ACCEPTED,
        Json(TrainAccepted {
            job: jobs.first().copied(),
            jobs,
        }),
    )
        .into_response())
}

async fn internal_job(State(b): State<Arc<LocalBackend>>, Path(job): Path<JobId>) -> Result<Response, ApiError> {
    match b.job(job)? {
        Some(info) => Ok(Json(info).into_response()),
        None => Err(ApiError::NotFound(format!("job {job} not found"))),
    }
}
