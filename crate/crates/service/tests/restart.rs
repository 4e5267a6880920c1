mod common;

use axum::http::StatusCode;
use common::{call, fresh_policy, Dirs, PARENT};
use serde_json::json;

#[tokio::test(flavor = "multi_thread")]
async fn state_and_suggestions_survive_restart() {
    let dirs = Dirs::new(10);
    let app = dirs.app();
    let (_, task) = call(
        &app,
        "POST",
        "/api/tasks",
        Some(serde_json::to_value(fresh_policy("policy-r")).unwrap()),
    )
    .await;
    let id = task["id"].as_str().unwrap().to_string();
    let sugg_url = format!("/api/tasks/{id}/suggestions?label=right_withdraw_consent&k=5");
    let (status, before) = call(&app, "GET", &sugg_url, None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/tasks/{id}/annotations"),
        Some(json!({"label": PARENT, "blob_index": 2, "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let snapshot = |app: axum::Router| async move {
        let (_, tasks) = call(&app, "GET", "/api/tasks", None).await;
        let mut details = Vec::new();
        for t in tasks.as_array().unwrap() {
            details.push(
                call(&app, "GET", &format!("/api/tasks/{}", t["id"].as_str().unwrap()), None)
                    .await
                    .1,
            );
        }
        (tasks, details)
    };
    let state_before = snapshot(app.clone()).await;
    let log_before = std::fs::read(dirs.tmp.path().join("registry/annotations.ndjson")).unwrap();
    drop(app);

    let app = dirs.app();
    assert_eq!(snapshot(app.clone()).await, state_before);
    let (_, after) = call(&app, "GET", &sugg_url, None).await;
    assert_eq!(after, before);
    assert_eq!(
        std::fs::read(dirs.tmp.path().join("registry/annotations.ndjson")).unwrap(),
        log_before
    );

    // New ids continue after the persisted ones.
    let (_, t2) = call(
        &app,
        "POST",
        "/api/tasks",
        Some(serde_json::to_value(fresh_policy("policy-r2")).unwrap()),
    )
    .await;
    assert_eq!(t2["id"], "task-000003");
}
