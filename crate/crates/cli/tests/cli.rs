use std::path::Path;
use std::process::{Command, Output};

fn policyloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_policyloop"))
        .args(args)
        .env_remove("POLICYLOOP_REGISTRY_DIR")
        .env_remove("POLICYLOOP_DATA_DIR")
        .env_remove("POLICYLOOP_ROLE")
        .env_remove("POLICYLOOP_EXTRACTION_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, documents: &str, blobs: &str) {
    let o = policyloop(&[
        "synth",
        "--out",
        p(dir),
        "--documents",
        documents,
        "--blobs",
        blobs,
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn ingest_reports_counts_for_every_right() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, "4", "12");
    let o = policyloop(&["ingest", p(&corpus)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("4 documents, "), "{out}");
    for right in [
        "right_withdraw_consent",
        "right_data_portability",
        "right_deletion",
        "right_complaint",
        "right_information",
    ] {
        assert!(out.contains(&format!("{right}: ")), "{right} missing from {out}");
    }

    let o = policyloop(&["ingest", p(&corpus), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["documents"], 4);
    let blobs = v["blobs"].as_u64().unwrap();
    assert!(blobs >= 48, "{blobs}");
    assert!(out.starts_with(&format!("4 documents, {blobs} blobs\n")), "{out}");
}

#[test]
fn ingest_lists_every_broken_file() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "2", "5");
    std::fs::write(tmp.path().join("broken_a.json"), "{not json").unwrap();
    std::fs::write(
        tmp.path().join("broken_b.json"),
        r#"{"id":"b","text":"x","annotations":[{"label":"right_deletion","passage":"nowhere"}]}"#,
    )
    .unwrap();
    let o = policyloop(&["ingest", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("broken_a.json") && err.contains("broken_b.json"), "{err}");
    assert!(err.contains("2 file(s) failed"), "{err}");
}

#[test]
fn empty_or_missing_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let o = policyloop(&["ingest", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no policy files"));
    let o = policyloop(&["ingest", p(&tmp.path().join("nope"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn serve_without_registry_exits_with_hint() {
    let tmp = tempfile::tempdir().unwrap();
    let registry = tmp.path().join("registry");
    let o = policyloop(&[
        "serve",
        "--registry",
        p(&registry),
        "--data",
        p(&tmp.path().join("data")),
        "--port",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("policyloop init-registry"), "{}", stderr(&o));
}

#[test]
fn serve_rejects_annotation_role_without_url() {
    let tmp = tempfile::tempdir().unwrap();
    let o = policyloop(&[
        "serve",
        "--registry",
        p(tmp.path()),
        "--role",
        "annotation",
        "--port",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = policyloop(&[
        "serve",
        "--registry",
        p(tmp.path()),
        "--role",
        "sideways",
        "--port",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn init_registry_then_suggest() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let registry = tmp.path().join("registry");
    synth(&corpus, "6", "10");
    let o = policyloop(&[
        "init-registry",
        "--corpus",
        p(&corpus),
        "--registry",
        p(&registry),
        "--kinds",
        "gaussian_nb,sentence_embedder",
        "--fast",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("right_deletion / sentence_embedder: v001"),
        "{}",
        stdout(&o)
    );
    assert!(registry.join("registry.json").is_file());

    let policy = std::fs::read_dir(&corpus).unwrap().next().unwrap().unwrap().path();
    let o = policyloop(&[
        "suggest",
        "--registry",
        p(&registry),
        p(&policy),
        "--labels",
        "right_deletion",
        "-k",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("right_deletion"), "{text}");
    assert_eq!(text.matches("blob_index").count(), 3, "{text}");

    let o = policyloop(&["suggest", "--registry", p(&tmp.path().join("none")), p(&policy)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn benchmark_writes_json_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, "10", "10");
    let out = tmp.path().join("out/report.json");
    let table = tmp.path().join("out/report.txt");
    let o = policyloop(&[
        "benchmark",
        "--corpus",
        p(&corpus),
        "--kinds",
        "gaussian_nb,binary_classifier",
        "--rights",
        "right_deletion,right_complaint",
        "--ks",
        "1,3",
        "--reps",
        "1",
        "--fast",
        "--out",
        p(&out),
        "--table",
        p(&table),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = stdout(&o);
    assert_eq!(printed, std::fs::read_to_string(&table).unwrap());
    assert!(
        printed.contains("1-rank") && printed.contains("Brier (weighted)"),
        "{printed}"
    );
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    assert_eq!(report["ks"], serde_json::json!([1, 3]));

    let o = policyloop(&[
        "benchmark",
        "--corpus",
        p(&corpus),
        "--reps",
        "0",
        "--out",
        p(&out),
        "--table",
        p(&table),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
