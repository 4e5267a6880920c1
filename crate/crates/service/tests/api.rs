mod common;

use axum::http::StatusCode;
use common::{call, call_raw, fresh_policy, wait_job, Dirs, PARENT};
use serde_json::{json, Value};

async fn post_policy(app: &axum::Router, id: &str) -> Value {
    let (status, task) = call(
        app,
        "POST",
        "/api/tasks",
        Some(serde_json::to_value(fresh_policy(id)).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{task}");
    task
}

#[tokio::test(flavor = "multi_thread")]
async fn task_creation_contract() {
    let dirs = Dirs::new(10);
    let app = dirs.app();
    let (status, tasks) = call(&app, "GET", "/api/tasks", None).await;
    assert_eq!((status, tasks), (StatusCode::OK, json!([])));

    let task = post_policy(&app, "policy-a").await;
    assert_eq!(task["status"], "open");
    assert_eq!(task["parent"], Value::Null);
    let top: Vec<String> = common::schema().top_level().iter().map(|l| l.to_string()).collect();
    assert_eq!(task["labels"], json!(top));

    let (_, tasks) = call(&app, "GET", "/api/tasks", None).await;
    assert_eq!(tasks.as_array().unwrap().len(), 1);

    let again = serde_json::to_value(fresh_policy("policy-a")).unwrap();
    assert_eq!(
        call(&app, "POST", "/api/tasks", Some(again)).await.0,
        StatusCode::CONFLICT
    );
    // Seed documents are taken too.
    let mut seed = fresh_policy("synth-000");
    seed.text.push_str("\n\nextra");
    let (status, _) = call(&app, "POST", "/api/tasks", Some(serde_json::to_value(seed).unwrap())).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, err) = call(
        &app,
        "POST",
        "/api/tasks",
        Some(json!({"id": "x", "title": "t", "language": "de", "text": 5})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["path"], "text");
    let (status, _) = call_raw(&app, "POST", "/api/tasks", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, labels) = call(&app, "GET", "/api/labels", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(labels, serde_json::to_value(common::schema()).unwrap());

    let id = task["id"].as_str().unwrap();
    let (status, detail) = call(&app, "GET", &format!("/api/tasks/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(detail["annotations"], json!([]));
    assert_eq!(
        call(&app, "GET", "/api/tasks/task-999999", None).await.0,
        StatusCode::NOT_FOUND
    );

    let (status, doc) = call(&app, "GET", "/api/documents/policy-a", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["blobs"].as_array().unwrap().len(), 15);
    assert_eq!(
        call(&app, "GET", "/api/documents/nope", None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn suggestions_contract() {
    let dirs = Dirs::new(10);
    let app = dirs.app();
    let task = post_policy(&app, "policy-s").await;
    let id = task["id"].as_str().unwrap();

    let (status, s) = call(
        &app,
        "GET",
        &format!("/api/tasks/{id}/suggestions?label=right_deletion&k=5"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{s}");
    let list = s["suggestions"].as_array().unwrap();
    assert_eq!(list.len(), 5);
    let scores: Vec<f64> = list.iter().map(|x| x["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    assert_eq!(s["kind"], "sentence_embedder");
    assert_eq!(s["model_version"], 1);
    assert_eq!(s["label"], "right_deletion");

    let (status, s) = call(
        &app,
        "GET",
        &format!("/api/tasks/{id}/suggestions?label=right_deletion"),
        None,
    )
    .await;
    assert_eq!((status, s["k"].as_u64()), (StatusCode::OK, Some(5)));
    for q in [
        "label=right_deletion&k=0",
        "label=right_deletion&k=-1",
        "label=info_contact&k=5",
        "k=5",
    ] {
        let (status, _) = call(&app, "GET", &format!("/api/tasks/{id}/suggestions?{q}"), None).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{q}");
    }
    let (status, _) = call(
        &app,
        "GET",
        "/api/tasks/task-424242/suggestions?label=right_deletion",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // Child labels are offered by child tasks but have no extractor.
    let (_, ann) = call(
        &app,
        "POST",
        &format!("/api/tasks/{id}/annotations"),
        Some(json!({"label": PARENT, "blob_index": 1, "value": 1})),
    )
    .await;
    let child = ann["child_task"].as_str().unwrap();
    let (status, body) = call(
        &app,
        "GET",
        &format!("/api/tasks/{child}/suggestions?label=info_contact&k=5"),
        None,
    )
    .await;
    assert_eq!((status, body), (StatusCode::NO_CONTENT, Value::Null));
}

#[tokio::test(flavor = "multi_thread")]
async fn annotations_spawn_children_and_persist() {
    let dirs = Dirs::new(100);
    let app = dirs.app();
    let task = post_policy(&app, "policy-h").await;
    let id = task["id"].as_str().unwrap();
    let url = format!("/api/tasks/{id}/annotations");

    let (status, a) = call(
        &app,
        "POST",
        &url,
        Some(json!({"label": PARENT, "blob_index": 3, "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{a}");
    assert_eq!(a["spawned"], true);
    assert_eq!(a["version"], 1);
    let child_id = a["child_task"].as_str().unwrap().to_string();
    let (_, child) = call(&app, "GET", &format!("/api/tasks/{child_id}"), None).await;
    assert_eq!(child["labels"], json!(["info_contact", "info_purpose"]));
    assert_eq!(child["parent"], id);
    assert_eq!(child["parent_label"], PARENT);

    // A second blob for the same label joins the existing child task.
    let (_, b) = call(
        &app,
        "POST",
        &url,
        Some(json!({"label": PARENT, "blob_index": 4, "value": 1})),
    )
    .await;
    assert_eq!(
        (b["child_task"].as_str(), &b["spawned"]),
        (Some(child_id.as_str()), &json!(false))
    );

    let (status, neg) = call(
        &app,
        "POST",
        &url,
        Some(json!({"label": "right_deletion", "blob_index": 2, "value": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!((&neg["value"], &neg["child_task"]), (&json!(0), &Value::Null));

    // Child annotations stay on the child's depth.
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/tasks/{child_id}/annotations"),
        Some(json!({"label": "right_deletion", "blob_index": 2, "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/tasks/{child_id}/annotations"),
        Some(json!({"label": "info_contact", "blob_index": 3, "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);

    for (body, code) in [
        (
            json!({"label": "right_deletion", "blob_index": 999, "value": 1}),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            json!({"label": "nope", "blob_index": 0, "value": 1}),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            json!({"label": "right_deletion", "blob_index": 2, "value": 1, "if_version": 0}),
            StatusCode::CONFLICT,
        ),
        (
            json!({"label": "right_deletion", "blob_index": 0, "value": 7}),
            StatusCode::BAD_REQUEST,
        ),
    ] {
        let (status, err) = call(&app, "POST", &url, Some(body.clone())).await;
        assert_eq!(status, code, "{body} -> {err}");
    }
    let (status, r) = call(
        &app,
        "POST",
        &url,
        Some(json!({"label": "right_deletion", "blob_index": 2, "value": 1, "if_version": 1})),
    )
    .await;
    assert_eq!(
        (status, &r["version"], &r["value"]),
        (StatusCode::CREATED, &json!(2), &json!(1))
    );
    assert_eq!(
        call(
            &app,
            "POST",
            "/api/tasks/task-777777/annotations",
            Some(json!({"label": PARENT, "blob_index": 0, "value": 1}))
        )
        .await
        .0,
        StatusCode::NOT_FOUND
    );

    let (_, list) = call(&app, "GET", &url, None).await;
    assert_eq!(list.as_array().unwrap().len(), 3);

    let (status, done) = call(&app, "POST", &format!("/api/tasks/{id}/submit"), None).await;
    assert_eq!((status, &done["status"]), (StatusCode::OK, &json!("done")));
    let (status, _) = call(
        &app,
        "POST",
        &url,
        Some(json!({"label": PARENT, "blob_index": 5, "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    // Every accepted annotation reached the feedback log, none of the rejected.
    let log = std::fs::read_to_string(dirs.tmp.path().join("registry/annotations.ndjson")).unwrap();
    assert_eq!(log.lines().count(), 5);
}

#[tokio::test(flavor = "multi_thread")]
async fn tenth_annotation_enqueues_a_retrain() {
    let dirs = Dirs::new(10);
    let app = dirs.app();
    let task = post_policy(&app, "policy-t").await;
    let url = format!("/api/tasks/{}/annotations", task["id"].as_str().unwrap());
    for i in 0..9 {
        let (status, a) = call(
            &app,
            "POST",
            &url,
            Some(json!({"label": "right_complaint", "blob_index": i, "value": u8::from(i == 4)})),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED);
        assert_eq!(a["triggered_jobs"], json!([]), "annotation {i}");
    }
    let (_, a) = call(
        &app,
        "POST",
        &url,
        Some(json!({"label": "right_complaint", "blob_index": 9, "value": 0})),
    )
    .await;
    let jobs = a["triggered_jobs"].as_array().unwrap();
    assert_eq!(jobs.len(), 1);
    let job = wait_job(&app, jobs[0].as_u64().unwrap()).await;
    assert_eq!(
        (&job["status"], &job["version"], &job["label"]),
        (&json!("done"), &json!(2), &json!("right_complaint"))
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn training_lifecycle() {
    let dirs = Dirs::new(10);
    let app = dirs.app();
    let (status, a) = call(&app, "POST", "/api/train", Some(json!({"label": "right_deletion"}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{a}");
    let (_, b) = call(&app, "POST", "/api/train", Some(json!({"label": "right_deletion"}))).await;
    let (ja, jb) = (a["job"].as_u64().unwrap(), b["job"].as_u64().unwrap());
    let first = wait_job(&app, ja).await;
    let second = wait_job(&app, jb).await;
    assert_eq!((&first["status"], &first["version"]), (&json!("done"), &json!(2)));
    assert_eq!((&second["status"], &second["version"]), (&json!("done"), &json!(3)));
    assert!(first["finished_at"].as_str().unwrap() <= second["started_at"].as_str().unwrap());

    let (status, _) = call(&app, "POST", "/api/train", Some(json!({"label": "right_to_party"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(
        call(&app, "GET", "/api/train/9999", None).await.0,
        StatusCode::NOT_FOUND
    );

    let (status, all) = call_raw(&app, "POST", "/api/train", None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(all["jobs"].as_array().unwrap().len(), 5);
}

#[tokio::test(flavor = "multi_thread")]
async fn embedded_annotations_become_feedback() {
    let dirs = Dirs::new(100);
    let app = dirs.app();
    let mut record = fresh_policy("policy-e");
    let mut cfg = common::synth();
    cfg.documents = 1;
    cfg.seed = 991;
    record.annotations = policyloop_core::synth::synth_records(&cfg).remove(0).annotations;
    let n = record.annotations.len();
    assert!(n > 0);
    let (status, task) = call(&app, "POST", "/api/tasks", Some(serde_json::to_value(&record).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, list) = call(
        &app,
        "GET",
        &format!("/api/tasks/{}/annotations", task["id"].as_str().unwrap()),
        None,
    )
    .await;
    assert!(!list.as_array().unwrap().is_empty());
    let log = std::fs::read_to_string(dirs.tmp.path().join("registry/annotations.ndjson")).unwrap();
    assert!(log.lines().count() >= list.as_array().unwrap().len());
    // The stored document carries no annotations.
    let (_, doc) = call(&app, "GET", "/api/documents/policy-e", None).await;
    assert!(doc["blobs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|b| b["annotations"] == json!([])));
}

#[test]
fn missing_registry_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let config = policyloop_service::ServiceConfig {
        data_dir: tmp.path().join("data"),
        registry_dir: tmp.path().join("none"),
        ..Default::default()
    };
    assert!(matches!(
        policyloop_service::build_app(&config),
        Err(policyloop_service::ServiceError::MissingRegistry(_))
    ));
}
