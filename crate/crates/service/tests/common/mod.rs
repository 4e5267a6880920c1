#![allow(dead_code)]

use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use policyloop_core::manager::RegistryConfig;
use policyloop_core::synth::{synth_corpus, synth_records, SynthConfig};
use policyloop_core::{Corpus, ExtractionManager, LabelSchema, ModelKind, ModelSettings, PolicyRecord};
use policyloop_service::{build_app, ServiceConfig};
use serde_json::Value;
use tower::ServiceExt;

pub const PARENT: &str = "right_information";

/// Rights schema where one right has two children.
pub fn schema() -> LabelSchema {
    let mut root = serde_json::to_value(policyloop_core::rights::rights_schema()).unwrap();
    let children = serde_json::json!([
        {"id": "info_contact", "name": "Contact", "description": "How to reach the controller"},
        {"id": "info_purpose", "name": "Purpose", "description": "Purposes of processing"}
    ]);
    for node in root["children"].as_array_mut().unwrap() {
        if node["id"] == PARENT {
            node["children"] = children.clone();
        }
    }
    serde_json::from_value(root).unwrap()
}

pub fn synth() -> SynthConfig {
    SynthConfig {
        documents: 10,
        blobs_per_document: 14,
        ..SynthConfig::default()
    }
}

pub fn init_registry(dir: &Path, autotrain: usize) -> ExtractionManager {
    let corpus = Corpus::new(synth_corpus(&synth()));
    let config = RegistryConfig {
        kinds: vec![ModelKind::GaussianNb, ModelKind::SentenceEmbedder],
        autotrain_every: autotrain,
        settings: ModelSettings::fast(),
        ..RegistryConfig::default()
    };
    ExtractionManager::initialize(dir, &corpus, &schema(), config).unwrap()
}

/// A policy record not in the seed corpus, without annotations.
pub fn fresh_policy(id: &str) -> PolicyRecord {
    let mut cfg = synth();
    cfg.documents = 1;
    cfg.seed = 991;
    let mut r = synth_records(&cfg).remove(0);
    r.id = id.into();
    r.annotations.clear();
    r
}

pub struct Dirs {
    pub tmp: tempfile::TempDir,
}

impl Dirs {
    pub fn new(autotrain: usize) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        init_registry(&tmp.path().join("registry"), autotrain);
        Dirs { tmp }
    }

    pub fn config(&self) -> ServiceConfig {
        ServiceConfig {
            data_dir: self.tmp.path().join("data"),
            registry_dir: self.tmp.path().join("registry"),
            ..ServiceConfig::default()
        }
    }

    pub fn app(&self) -> Router {
        build_app(&self.config()).unwrap()
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let raw = body.map(|b| b.to_string());
    call_raw(app, method, uri, raw).await
}

pub async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub async fn wait_job(app: &Router, job: u64) -> Value {
    for _ in 0..6000 {
        let (status, v) = call(app, "GET", &format!("/api/train/{job}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if v["status"] == "done" || v["status"] == "failed" {
            return v;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }
    panic!("job {job} did not finish");
}
