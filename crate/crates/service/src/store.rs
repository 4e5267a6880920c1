//! Task and annotation persistence behind [`TaskRepository`]. The default
//! backend keeps one JSON file per record and writes atomically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use policyloop_core::corpus::{binary_indicator, sanitize_file_stem};
use policyloop_core::fsutil::write_json_atomic;
use policyloop_core::{Document, LabelId};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub type TaskId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Open,
    Done,
}

/// One annotation task: a document and the sibling labels offered on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub document_id: String,
    pub labels: Vec<LabelId>,
    pub parent: Option<TaskId>,
    /// Label of the parent task whose annotation spawned this task.
    pub parent_label: Option<LabelId>,
    pub status: TaskStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub task_id: TaskId,
    pub document_id: String,
    pub label: LabelId,
    pub blob_index: usize,
    #[serde(with = "binary_indicator")]
    pub value: bool,
    /// Starts at 1; bumped on every replacement.
    pub version: u64,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct NewTask {
    pub document_id: String,
    pub labels: Vec<LabelId>,
    pub parent: Option<TaskId>,
    pub parent_label: Option<LabelId>,
}

pub trait TaskRepository: Send + Sync {
    /// Fails with `Conflict` when the id is taken.
    fn insert_document(&self, doc: &Document) -> Result<(), ApiError>;
    fn document(&self, id: &str) -> Option<Document>;
    fn create_task(&self, task: NewTask) -> Result<Task, ApiError>;
    fn update_task(&self, task: &Task) -> Result<(), ApiError>;
    fn task(&self, id: &str) -> Option<Task>;
    fn tasks(&self) -> Vec<Task>;
    fn annotations(&self, task_id: &str) -> Vec<AnnotationRecord>;
    /// Inserts or replaces the record for `(task, label, blob_index)`.
    /// Ids and versions are assigned by the store; `expected_version`
    /// (0 = absent) guards against lost updates.
    fn put_annotation(
        &self,
        task_id: &str,
        label: &LabelId,
        blob_index: usize,
        value: bool,
        expected_version: Option<u64>,
    ) -> Result<AnnotationRecord, ApiError>;
}

#[derive(Debug, Default)]
struct State {
    documents: BTreeMap<String, Document>,
    tasks: BTreeMap<TaskId, Task>,
    annotations: BTreeMap<TaskId, Vec<AnnotationRecord>>,
    next_task: u64,
    next_annotation: u64,
}

/// File-backed store rooted at a data directory:
/// `documents/<id>.json`, `tasks/<id>.json`, `annotations/<task>.json`.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    state: RwLock<State>,
}

fn internal(e: policyloop_core::Error) -> ApiError {
    ApiError::Internal(e.to_string())
}

fn read_dir_json<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<Vec<T>, ApiError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| ApiError::Internal(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| ApiError::Internal(e.to_string()))?.path();
        if path.extension().is_none_or(|x| x != "json") {
            continue;
        }
        let raw = std::fs::read_to_string(&path).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        out.push(serde_json::from_str(&raw).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?);
    }
    Ok(out)
}

fn task_seq(id: &str) -> u64 {
    id.strip_prefix("task-").and_then(|n| n.parse().ok()).unwrap_or(0)
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let root = root.into();
        let mut state = State::default();
        for doc in read_dir_json::<Document>(&root.join("documents"))? {
            state.documents.insert(doc.id.clone(), doc);
        }
        for task in read_dir_json::<Task>(&root.join("tasks"))? {
            state.next_task = state.next_task.max(task_seq(&task.id));
            state.tasks.insert(task.id.clone(), task);
        }
        for list in read_dir_json::<Vec<AnnotationRecord>>(&root.join("annotations"))? {
            if let Some(first) = list.first() {
                state.next_annotation = state.next_annotation.max(list.iter().map(|a| a.id).max().unwrap_or(0));
                state.annotations.insert(first.task_id.clone(), list);
            }
        }
        Ok(FileStore {
            root,
            state: RwLock::new(state),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, id: &str) -> PathBuf {
        self.root.join(kind).join(format!("{}.json", sanitize_file_stem(id)))
    }
}

impl TaskRepository for FileStore {
    fn insert_document(&self, doc: &Document) -> Result<(), ApiError> {
        let mut s = self.state.write().expect("store poisoned");
        if s.documents.contains_key(&doc.id) {
            return Err(ApiError::Conflict(format!("policy `{}` already exists", doc.id)));
        }
        write_json_atomic(&self.path("documents", &doc.id), doc).map_err(internal)?;
        s.documents.insert(doc.id.clone(), doc.clone());
        Ok(())
    }

    fn document(&self, id: &str) -> Option<Document> {
        self.state.read().expect("store poisoned").documents.get(id).cloned()
    }

    fn create_task(&self, new: NewTask) -> Result<Task, ApiError> {
        let mut s = self.state.write().expect("store poisoned");
        let now = Utc::now();
        let task = Task {
            id: format!("task-{:06}", s.next_task + 1),
            document_id: new.document_id,
            labels: new.labels,
            parent: new.parent,
            parent_label: new.parent_label,
            status: TaskStatus::Open,
            created_at: now,
            updated_at: now,
        };
        write_json_atomic(&self.path("tasks", &task.id), &task).map_err(internal)?;
        s.next_task += 1;
        s.tasks.insert(task.id.clone(), task.clone());
        Ok(task)
    }

    fn update_task(&self, task: &Task) -> Result<(), ApiError> {
        let mut s = self.state.write().expect("store poisoned");
        if !s.tasks.contains_key(&task.id) {
            return Err(ApiError::NotFound(format!("task `{}` not found", task.id)));
        }
        write_json_atomic(&self.path("tasks", &task.id), task).map_err(internal)?;
        s.tasks.insert(task.id.clone(), task.clone());
        Ok(())
    }

    fn task(&self, id: &str) -> Option<Task> {
        self.state.read().expect("store poisoned").tasks.get(id).cloned()
    }

    fn tasks(&self) -> Vec<Task> {
        self.state
            .read()
            .expect("store poisoned")
            .tasks
            .values()
            .cloned()
            .collect()
    }

    fn annotations(&self, task_id: &str) -> Vec<AnnotationRecord> {
        self.state
            .read()
            .expect("store poisoned")
            .annotations
            .get(task_id)
            .cloned()
            .unwrap_or_default()
    }

    fn put_annotation(
        &self,
        task_id: &str,
        label: &LabelId,
        blob_index: usize,
        value: bool,
        expected_version: Option<u64>,
    ) -> Result<AnnotationRecord, ApiError> {
        let mut s = self.state.write().expect("store poisoned");
        let document_id = s
            .tasks
            .get(task_id)
            .map(|t| t.document_id.clone())
            .ok_or_else(|| ApiError::NotFound(format!("task `{task_id}` not found")))?;
        let mut list = s.annotations.get(task_id).cloned().unwrap_or_default();
        let pos = list
            .iter()
            .position(|a| &a.label == label && a.blob_index == blob_index);
        let current = pos.map(|i| list[i].version).unwrap_or(0);
        if let Some(expected) = expected_version {
            if expected != current {
                return Err(ApiError::Conflict(format!(
                    "annotation `{label}` @ blob {blob_index} is at version {current}, not {expected}"
                )));
            }
        }
        let now = Utc::now();
        let record = match pos {
            Some(i) => {
                let a = &mut list[i];
                a.value = value;
                a.version += 1;
                a.updated_at = now;
                a.clone()
            }
            None => {
                let a = AnnotationRecord {
                    id: s.next_annotation + 1,
                    task_id: task_id.to_string(),
                    document_id,
                    label: label.clone(),
                    blob_index,
                    value,
                    version: 1,
                    created_at: now,
                    updated_at: now,
                };
                list.push(a.clone());
                a
            }
        };
        write_json_atomic(&self.path("annotations", task_id), &list).map_err(internal)?;
        if pos.is_none() {
            s.next_annotation += 1;
        }
        s.annotations.insert(task_id.to_string(), list);
        Ok(record)
    }
}
