//! Boundary between the annotation API and extraction. The combined
//! process calls the manager directly; the split deployment talks to an
//! extraction process over the `/internal` HTTP routes.

use std::time::Duration;

use policyloop_core::manager::{FeedbackReceipt, JobId, JobInfo};
use policyloop_core::{
    suggest, Document, ExtractionManager, FeedbackEntry, LabelId, LabelSchema, ModelKind, SuggestionSet,
};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorBody};

/// A suggestion set plus the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedSuggestions {
    #[serde(flatten)]
    pub set: SuggestionSet,
    pub kind: ModelKind,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    #[serde(default)]
    pub label: Option<LabelId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainAccepted {
    /// First (or only) job id.
    pub job: Option<JobId>,
    pub jobs: Vec<JobId>,
}

pub trait ExtractionBackend: Send + Sync {
    fn schema(&self) -> Result<LabelSchema, ApiError>;
    fn register_document(&self, doc: &Document) -> Result<(), ApiError>;
    /// `Ok(None)` when no trained extractor serves `label`.
    fn suggest(&self, document_id: &str, label: &LabelId, k: usize) -> Result<Option<ServedSuggestions>, ApiError>;
    fn record_feedback(&self, entries: &[FeedbackEntry]) -> Result<FeedbackReceipt, ApiError>;
    /// Retrain `label`, or every trainable label when `None`.
    fn enqueue_retrain(&self, label: Option<&LabelId>) -> Result<Vec<JobId>, ApiError>;
    fn job(&self, id: JobId) -> Result<Option<JobInfo>, ApiError>;
}

pub struct LocalBackend {
    manager: ExtractionManager,
}

impl LocalBackend {
    pub fn new(manager: ExtractionManager) -> Self {
        LocalBackend { manager }
    }

    pub fn manager(&self) -> &ExtractionManager {
        &self.manager
    }
}

impl ExtractionBackend for LocalBackend {
    fn schema(&self) -> Result<LabelSchema, ApiError> {
        Ok(self.manager.schema().clone())
    }

    fn register_document(&self, doc: &Document) -> Result<(), ApiError> {
        self.manager.register_document(doc).map_err(|e| match e {
            policyloop_core::Error::Validation(m) => ApiError::Conflict(m),
            other => other.into(),
        })
    }

    fn suggest(&self, document_id: &str, label: &LabelId, k: usize) -> Result<Option<ServedSuggestions>, ApiError> {
        let doc = self
            .manager
            .document(document_id)
            .ok_or_else(|| ApiError::NotFound(format!("document `{document_id}` not found")))?;
        if !self.manager.schema().contains(label) {
            return Err(ApiError::Unprocessable(format!("label `{label}` is not in the schema")));
        }
        if k < 1 {
            return Err(ApiError::Unprocessable("k must be at least 1".into()));
        }
        let Some(model) = self.manager.serving_snapshot(label) else {
            return Ok(None);
        };
        let set = suggest(&doc, &model, label, k)?;
        Ok(Some(ServedSuggestions {
            set,
            kind: model.kind,
            model_version: model.version,
        }))
    }

    fn record_feedback(&self, entries: &[FeedbackEntry]) -> Result<FeedbackReceipt, ApiError> {
        Ok(self.manager.record_feedback(entries)?)
    }

    fn enqueue_retrain(&self, label: Option<&LabelId>) -> Result<Vec<JobId>, ApiError> {
        match label {
            Some(l) => Ok(vec![self.manager.enqueue_retrain(l)?]),
            None => self
                .manager
                .labels()
                .iter()
                .map(|l| self.manager.enqueue_retrain(l).map_err(ApiError::from))
                .collect(),
        }
    }

    fn job(&self, id: JobId) -> Result<Option<JobInfo>, ApiError> {
        Ok(self.manager.job(id))
    }
}

/// HTTP client for an extraction process. Blocking; call it from a
/// blocking-capable thread.
pub struct RemoteBackend {
    base: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        RemoteBackend {
            base: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish<T: for<'de> Deserialize<'de>>(
        &self,
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Option<T>, ApiError> {
        let mut resp = result.map_err(|e| ApiError::Unavailable(format!("extraction service: {e}")))?;
        let status = resp.status().as_u16();
        match status {
            204 => Ok(None),
            200..=299 => resp
                .body_mut()
                .read_json::<T>()
                .map(Some)
                .map_err(|e| ApiError::Internal(format!("extraction service sent invalid JSON: {e}"))),
            _ => {
                let body = resp.body_mut().read_json::<ErrorBody>().ok();
                Err(ApiError::from_status(status, body))
            }
        }
    }

    fn get<T: for<'de> Deserialize<'de>>(&self, path: &str) -> Result<Option<T>, ApiError> {
        self.finish(self.agent.get(&self.url(path)).call())
    }

    fn post<B: Serialize, T: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<Option<T>, ApiError> {
        self.finish(self.agent.post(&self.url(path)).send_json(body))
    }
}

fn required<T>(v: Option<T>, what: &str) -> Result<T, ApiError> {
    v.ok_or_else(|| ApiError::Internal(format!("extraction service sent no {what}")))
}

/// Percent-encodes a path segment or query value.
pub(crate) fn encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

impl ExtractionBackend for RemoteBackend {
    fn schema(&self) -> Result<LabelSchema, ApiError> {
        required(self.get("/internal/schema")?, "schema")
    }

    fn register_document(&self, doc: &Document) -> Result<(), ApiError> {
        self.post::<_, serde_json::Value>("/internal/documents", doc)
            .map(|_| ())
    }

    fn suggest(&self, document_id: &str, label: &LabelId, k: usize) -> Result<Option<ServedSuggestions>, ApiError> {
        self.get(&format!(
            "/internal/documents/{}/suggestions?label={}&k={k}",
            encode(document_id),
            encode(label.as_str())
        ))
    }

    fn record_feedback(&self, entries: &[FeedbackEntry]) -> Result<FeedbackReceipt, ApiError> {
        required(self.post("/internal/feedback", &entries)?, "receipt")
    }

    fn enqueue_retrain(&self, label: Option<&LabelId>) -> Result<Vec<JobId>, ApiError> {
        let accepted: TrainAccepted = required(
            self.post("/internal/train", &TrainRequest { label: label.cloned() })?,
            "job",
        )?;
        Ok(accepted.jobs)
    }

    fn job(&self, id: JobId) -> Result<Option<JobInfo>, ApiError> {
        match self.get(&format!("/internal/train/{id}")) {
            Err(ApiError::NotFound(_)) => Ok(None),
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::encode;

    #[test]
    fn encodes_reserved_characters() {
        assert_eq!(encode("right_access"), "right_access");
        assert_eq!(encode("a b/ü?&"), "a%20b%2F%C3%BC%3F%26");
    }
}
