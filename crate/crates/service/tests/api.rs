use std::path::Path;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use telewb_core::run::columns_path_for;
use telewb_core::synth::linear_with_decoys;
use telewb_service::{router, AppState, RunState, ServiceConfig};
use tower::ServiceExt;

struct Fixture {
    _tmp: tempfile::TempDir,
    state: AppState,
    app: Router,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let ds = linear_with_decoys(80, 3, 0.1, 5);
    let csv = data.join("toy.csv");
    ds.write_files(&csv, &columns_path_for(&csv)).unwrap();
    let mut cfg = ServiceConfig::new(tmp.path().join("store"));
    cfg.data_root = Some(data);
    let state = AppState::new(&cfg).unwrap();
    let app = router(state.clone());
    Fixture { _tmp: tmp, state, app }
}

fn run_body(learner: &str) -> Value {
    json!({
        "source": {"pipeline": "dataset", "csv": "toy.csv"},
        "model": {"learner": {"kind": learner, "n_trees": 10}, "seed": 4},
        "importance": {"repeats": 3}
    })
}

fn knn_body() -> Value {
    json!({
        "source": {"pipeline": "dataset", "csv": "toy.csv"},
        "model": {"learner": {"kind": "knn", "k": 3}},
    })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    let v: Value = serde_json::from_slice(&b).unwrap_or_else(|_| panic!("non-JSON body: {}", String::from_utf8_lossy(&b)));
    assert_eq!(v["schema_version"], 1, "payload without schema_version: {v}");
    (s, v)
}

async fn submit_and_wait(f: &Fixture, body: Value) -> String {
    let (s, v) = call_json(&f.app, "POST", "/runs", Some(body)).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let id = v["id"].as_str().unwrap().to_owned();
    let rec = f.state.wait(&id, Duration::from_secs(60)).await.unwrap();
    assert_eq!(rec.state, RunState::Done, "{:?}", rec.error);
    id
}

#[tokio::test(flavor = "multi_thread")]
async fn health_reports_ok() {
    let f = fixture();
    let (s, v) = call_json(&f.app, "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
}

#[tokio::test(flavor = "multi_thread")]
async fn run_lifecycle_and_artifacts() {
    let f = fixture();
    let id = submit_and_wait(&f, run_body("forest")).await;
    let (s, v) = call_json(&f.app, "GET", &format!("/runs/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "done");
    assert_eq!(v["artifacts"].as_object().unwrap().len(), 9);

    let (s, model) = call(&f.app, "GET", &format!("/runs/{id}/artifacts/model"), None).await;
    assert_eq!(s, StatusCode::OK);
    let path = Path::new(f.state.store().root()).join("runs").join(&id).join("model.bin");
    assert_eq!(model, std::fs::read(path).unwrap());

    let (s, v) = call_json(&f.app, "GET", &format!("/runs/{id}/artifacts/metrics"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["n_test"], 16);

    let (s, _) = call_json(&f.app, "GET", "/runs", None).await;
    assert_eq!(s, StatusCode::OK);

    // re-serving a finished run is byte-identical and matches the recorded digests
    for kind in ["model", "metrics", "predictions", "importance", "dataset"] {
        let (_, a) = call(&f.app, "GET", &format!("/runs/{id}/artifacts/{kind}"), None).await;
        let (_, b) = call(&f.app, "GET", &format!("/runs/{id}/artifacts/{kind}"), None).await;
        assert_eq!(a, b, "{kind}");
        let rec = f.state.store().get(&id).unwrap();
        assert_eq!(rec.artifacts[kind], telewb_core::metafile::sha256_hex(&a), "{kind}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn error_statuses() {
    let f = fixture();
    let (s, v) = call_json(&f.app, "GET", "/runs/77", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("77"));
    let (s, _) = call_json(&f.app, "GET", "/runs/77/artifacts/model", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let mut bad = run_body("forest");
    bad["bogus"] = json!(1);
    let (s, _) = call_json(&f.app, "POST", "/runs", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut bad = run_body("forest");
    bad["model"]["learner"]["n_trees"] = json!(0);
    let (s, _) = call_json(&f.app, "POST", "/runs", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut missing = run_body("forest");
    missing["source"]["csv"] = json!("nope.csv");
    let (s, v) = call_json(&f.app, "POST", "/runs", Some(missing)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("nope.csv"));

    let mut failing = run_body("forest");
    failing["exclusions"] = json!({"features": ["not_a_column"]});
    let (s, v) = call_json(&f.app, "POST", "/runs", Some(failing)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let id = v["id"].as_str().unwrap();
    let rec = f.state.wait(id, Duration::from_secs(30)).await.unwrap();
    assert_eq!(rec.state, RunState::Failed);
    let (s, v) = call_json(&f.app, "GET", &format!("/runs/{id}/artifacts/model"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("not_a_column"), "{v}");

    let good = submit_and_wait(&f, knn_body()).await;
    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{good}/artifacts/bogus"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{good}/artifacts/comparison"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn queued_run_artifacts_conflict() {
    let f = fixture();
    let rec = f.state.store().create(&serde_json::from_value(knn_body()).unwrap()).unwrap();
    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{}/artifacts/metrics", rec.id), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn predictions_view() {
    let f = fixture();
    let id = submit_and_wait(&f, run_body("forest")).await;
    let (s, v) = call_json(
        &f.app,
        "GET",
        &format!("/runs/{id}/predictions?lines=y&cumulative=true&from=0&to=9000000"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["time"].as_array().unwrap().len(), 10);
    assert_eq!(v["series"][0]["predicted"], v["cumulative"]["predicted"]);
    for i in 0..10 {
        let p = v["series"][0]["predicted"][i].as_f64().unwrap();
        let o = v["series"][0]["observed"][i].as_f64().unwrap();
        assert_eq!(v["series"][0]["abs_error"][i].as_f64().unwrap(), (p - o).abs());
    }
    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{id}/predictions?lines=zzz"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{id}/predictions?from=5"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn importance_view_and_subsets() {
    let f = fixture();
    let id = submit_and_wait(&f, run_body("forest")).await;
    let (s, v) = call_json(&f.app, "GET", &format!("/runs/{id}/importance?score=genie3"), None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["report"]["top_k"]["aggregate"][0]["name"], "x1");

    let (s, v) = call_json(
        &f.app,
        "GET",
        &format!("/runs/{id}/importance?score=symbolic&selector=aggregate&from=0&to=18000000"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["n_rows"], 20);
    assert!(v["report"].is_null());
    assert!(v["selection"]["scores"]["x1"].as_f64().unwrap() > 0.0);

    let cats = &v["selection"]["within_category"];
    assert_eq!(cats["SIGNAL"]["x1"], v["selection"]["scores"]["x1"]);
    assert_eq!(cats["DECOY"].as_object().unwrap().len(), 3);

    let (_, stored) = call_json(&f.app, "GET", &format!("/runs/{id}/importance?score=permutation"), None).await;
    let (_, full) = call_json(
        &f.app,
        "GET",
        &format!("/runs/{id}/importance?score=permutation&from=-1&to=100000000000"),
        None,
    )
    .await;
    assert_eq!(stored, full);

    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{id}/importance?selector=nope"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&f.app, "GET", &format!("/runs/{id}/importance?score=shap"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let knn = submit_and_wait(&f, knn_body()).await;
    let (s, v) = call_json(&f.app, "GET", &format!("/runs/{knn}/importance?score=genie3"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("tree"));
}

#[tokio::test(flavor = "multi_thread")]
async fn whatif_children() {
    let f = fixture();
    let base = submit_and_wait(&f, run_body("forest")).await;

    let (s, v) = call_json(&f.app, "POST", "/whatif", Some(json!({"base_run": base}))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let same = v["id"].as_str().unwrap().to_owned();
    assert_eq!(f.state.wait(&same, Duration::from_secs(60)).await.unwrap().state, RunState::Done);
    let a = f.state.store().get(&base).unwrap().artifacts;
    let b = f.state.store().get(&same).unwrap().artifacts;
    for kind in ["model", "model_meta", "dataset", "dataset_meta", "metrics", "importance"] {
        assert_eq!(a[kind], b[kind], "{kind}");
    }

    let (s, v) = call_json(
        &f.app,
        "POST",
        "/whatif",
        Some(json!({"base_run": base, "exclusions": {"features": ["decoy2"]}})),
    )
    .await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let child = v["id"].as_str().unwrap().to_owned();
    assert_eq!(f.state.wait(&child, Duration::from_secs(60)).await.unwrap().state, RunState::Done);
    let (_, v) = call_json(&f.app, "GET", &format!("/runs/{child}"), None).await;
    assert_eq!(v["parent_run"], json!(base));
    let (_, v) = call_json(&f.app, "GET", &format!("/runs/{child}/importance?selector=aggregate"), None).await;
    assert!(v["selection"]["scores"].get("decoy2").is_none());
    assert!(v["selection"]["scores"].get("decoy1").is_some());
    let (s, v) = call_json(&f.app, "GET", &format!("/runs/{child}/artifacts/comparison"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["exclusions"]["features"], json!(["decoy2"]));

    let (s, _) = call_json(&f.app, "POST", "/whatif", Some(json!({"base_run": "999"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn eda_inline_and_from_run() {
    let f = fixture();
    let (s, v) = call_json(
        &f.app,
        "POST",
        "/eda",
        Some(json!({"values": [1.0, 2.0, 3.0, 4.0, 100.0, null], "bins": 4})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let var = &v["variables"][0];
    assert_eq!(var["n_missing"], 1);
    assert_eq!(var["boxplot"]["outliers"], json!([100.0]));
    assert_eq!(var["histogram"]["counts"].as_array().unwrap().len(), 4);

    let id = submit_and_wait(&f, knn_body()).await;
    let (s, v) = call_json(
        &f.app,
        "POST",
        "/eda",
        Some(json!({"run": id, "columns": ["x1", "y"], "from": 0, "to": 9000000, "bins": 5})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["n_rows"], 10);
    assert_eq!(v["variables"].as_array().unwrap().len(), 2);
    let counts: u64 = v["variables"][1]["histogram"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(counts, 10);
    let (s, _) = call_json(&f.app, "POST", "/eda", Some(json!({"run": id}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call_json(
        &f.app,
        "POST",
        "/eda",
        Some(json!({"run": id, "columns": ["x1"], "from": -100, "to": -1})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("no rows"));
}
