//! Training job bookkeeping.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::LabelId;
use crate::models::ModelKind;

pub type JobId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_finished(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub id: JobId,
    pub label: LabelId,
    pub kinds: Vec<ModelKind>,
    pub status: JobStatus,
    /// Version of the serving kind produced by a finished job.
    pub version: Option<u64>,
    pub versions: BTreeMap<ModelKind, u64>,
    pub error: Option<String>,
    pub enqueued_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Default)]
pub(crate) struct JobTable {
    jobs: Mutex<(JobId, BTreeMap<JobId, JobInfo>)>,
    changed: Condvar,
}

impl JobTable {
    pub(crate) fn create(&self, label: LabelId, kinds: Vec<ModelKind>) -> JobId {
        let mut g = self.jobs.lock().expect("job table poisoned");
        g.0 += 1;
        let id = g.0;
        g.1.insert(
            id,
            JobInfo {
                id,
                label,
                kinds,
                status: JobStatus::Queued,
                version: None,
                versions: BTreeMap::new(),
                error: None,
                enqueued_at: Utc::now(),
                started_at: None,
                finished_at: None,
            },
        );
        id
    }

    pub(crate) fn update(&self, id: JobId, f: impl FnOnce(&mut JobInfo)) {
        let mut g = self.jobs.lock().expect("job table poisoned");
        if let Some(job) = g.1.get_mut(&id) {
            f(job);
        }
        self.changed.notify_all();
    }

    pub(crate) fn get(&self, id: JobId) -> Option<JobInfo> {
        self.jobs.lock().expect("job table poisoned").1.get(&id).cloned()
    }

    pub(crate) fn list(&self) -> Vec<JobInfo> {
        self.jobs
            .lock()
            .expect("job table poisoned")
            .1
            .values()
            .cloned()
            .collect()
    }

    /// Blocks until job `id` is finished or `timeout` elapses.
    pub(crate) fn wait(&self, id: JobId, timeout: Duration) -> Option<JobInfo> {
        let deadline = Instant::now() + timeout;
        let mut g = self.jobs.lock().expect("job table poisoned");
        loop {
            match g.1.get(&id) {
                None => return None,
                Some(job) if job.status.is_finished() => return Some(job.clone()),
                Some(_) => {}
            }
            let now = Instant::now();
            if now >= deadline {
                return g.1.get(&id).cloned();
            }
            g = self
                .changed
                .wait_timeout(g, deadline - now)
                .expect("job table poisoned")
                .0;
        }
    }
}
