mod common;

use axum::http::StatusCode;
use common::{call, fresh_policy, wait_job, Dirs, PARENT};
use policyloop_service::{build_app, serve_on, Role, ServiceConfig};
use serde_json::json;

/// Annotation and extraction in two servers talking over HTTP behave like
/// the combined process.
#[tokio::test(flavor = "multi_thread")]
async fn split_deployment_matches_combined() {
    let dirs = Dirs::new(10);
    let extraction = build_app(&ServiceConfig {
        role: Role::Extraction,
        ..dirs.config()
    })
    .unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(listener, extraction, async {
        let _ = rx.await;
    }));

    let config = ServiceConfig {
        role: Role::Annotation,
        extraction_url: Some(format!("http://{addr}")),
        data_dir: dirs.tmp.path().join("split-data"),
        ..dirs.config()
    };
    let split = tokio::task::spawn_blocking(move || build_app(&config))
        .await
        .unwrap()
        .unwrap();
    let combined = build_app(&ServiceConfig {
        data_dir: dirs.tmp.path().join("combined-data"),
        ..dirs.config()
    })
    .unwrap();

    let (status, labels) = call(&split, "GET", "/api/labels", None).await;
    assert_eq!(
        (status, labels),
        (StatusCode::OK, serde_json::to_value(common::schema()).unwrap())
    );

    let (status, task) = call(
        &split,
        "POST",
        "/api/tasks",
        Some(serde_json::to_value(fresh_policy("policy-x")).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{task}");
    let id = task["id"].as_str().unwrap();
    // The combined app shares the registry, so it already knows the document.
    let (status, _) = call(
        &combined,
        "POST",
        "/api/tasks",
        Some(serde_json::to_value(fresh_policy("policy-x")).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);

    let url = format!("/api/tasks/{id}/suggestions?label=right_deletion&k=5");
    let (s1, a) = call(&split, "GET", &url, None).await;
    let (s2, b) = call(&combined, "GET", &url, None).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    let (status, _) = call(
        &split,
        "GET",
        &format!("/api/tasks/{id}/suggestions?label=right_deletion&k=0"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, ann) = call(
        &split,
        "POST",
        &format!("/api/tasks/{id}/annotations"),
        Some(json!({"label": PARENT, "blob_index": 0, "value": 1})),
    )
    .await;
    assert_eq!((status, &ann["spawned"]), (StatusCode::CREATED, &json!(true)));
    let child = ann["child_task"].as_str().unwrap();
    let (status, _) = call(
        &split,
        "GET",
        &format!("/api/tasks/{child}/suggestions?label=info_purpose"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::NO_CONTENT);

    let (status, accepted) = call(&split, "POST", "/api/train", Some(json!({"label": "right_deletion"}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = wait_job(&split, accepted["job"].as_u64().unwrap()).await;
    assert_eq!(job["status"], "done");
    let (status, _) = call(&split, "POST", "/api/train", Some(json!({"label": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(
        call(&split, "GET", "/api/train/4242", None).await.0,
        StatusCode::NOT_FOUND
    );

    let _ = tx.send(());
    server.await.unwrap().unwrap();
}
