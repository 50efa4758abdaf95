use std::path::Path;
use std::process::{Command, Output};

fn telewb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telewb"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = telewb(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    telewb(args, cwd).status.code().unwrap()
}

fn integral_run(dir: &Path) {
    ok(&["synth", "integral", "--revs", "24", "--out", "in"], dir);
    ok(
        &[
            "preprocess-integral",
            "--orbit",
            "in/orbit.csv",
            "--irem",
            "in/irem.csv",
            "--eclipse",
            "in/eclipse.csv",
            "--rep",
            "per-rev",
            "--out",
            "run1",
        ],
        dir,
    );
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn preprocess_integral_writes_dataset_and_metafile() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    integral_run(d);
    for f in ["dataset.csv", "dataset.columns.json", "dataset.meta.json"] {
        assert!(d.join("run1").join(f).is_file(), "{f}");
    }
    let meta: serde_json::Value = serde_json::from_slice(&read(d.join("run1/dataset.meta.json"))).unwrap();
    assert_eq!(meta["representation"], "per_revolution");
    assert_eq!(meta["inputs"].as_array().unwrap().len(), 3);
    // replay
    ok(&["preprocess-integral", "--dir", "in", "--rep", "per-rev", "--out", "run2"], d);
    assert_eq!(read(d.join("run1/dataset.meta.json")), read(d.join("run2/dataset.meta.json")));
    assert_eq!(read(d.join("run1/dataset.csv")), read(d.join("run2/dataset.csv")));
}

#[test]
fn positional_representation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "integral", "--revs", "3", "--full-coverage", "--out", "in"], d);
    let out = ok(
        &["preprocess-integral", "--dir", "in", "--rep", "positional", "--task", "classification", "--out", "pos"],
        d,
    );
    assert!(out.contains("768 rows"), "{out}");
    assert_eq!(
        code(&["preprocess-integral", "--dir", "in", "--rep", "per-rev", "--task", "regression", "--out", "x"], d),
        2
    );
}

#[test]
fn train_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    integral_run(d);
    let args = |out: &'static str| {
        vec!["train", "--dataset", "run1/dataset.csv", "--learner", "forest", "--seed", "7", "--out", out]
    };
    ok(&args("a"), d);
    ok(&args("b"), d);
    for f in ["model.bin", "model.meta.json", "metrics.json", "importance.json", "predictions.json"] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{f}");
    }
    ok(&["train", "--dataset", "run1/dataset.csv", "--learner", "forest", "--seed", "8", "--out", "c"], d);
    assert_ne!(read(d.join("a/model.bin")), read(d.join("c/model.bin")));
}

#[test]
fn config_file_is_canonical_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    integral_run(d);
    ok(&["train", "--dataset", "run1/dataset.csv", "--learner", "gboost", "--seed", "3", "--out", "flags"], d);
    // the written config replays the run
    std::fs::copy(d.join("flags/config.json"), d.join("replay.json")).unwrap();
    ok(&["train", "--config", "replay.json", "--out", "cfg"], d);
    assert_eq!(read(d.join("flags/model.bin")), read(d.join("cfg/model.bin")));
    // relative paths resolve against the config file
    std::fs::create_dir_all(d.join("conf")).unwrap();
    std::fs::write(
        d.join("conf/run.json"),
        r#"{"source":{"pipeline":"dataset","csv":"../run1/dataset.csv"},
            "model":{"learner":{"kind":"knn","k":3},"seed":1}}"#,
    )
    .unwrap();
    ok(&["train", "--config", "conf/run.json", "--out", "k1"], d);
    ok(&["train", "--config", "conf/run.json", "--seed", "2", "--params", "{\"k\":4}", "--out", "k2"], d);
    let cfg: serde_json::Value = serde_json::from_slice(&read(d.join("k2/config.json"))).unwrap();
    assert_eq!(cfg["model"]["seed"], 2);
    assert_eq!(cfg["model"]["learner"]["k"], 4);
    let imp: serde_json::Value = serde_json::from_slice(&read(d.join("k1/importance.json"))).unwrap();
    assert_eq!(imp["skipped"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&["train", "--learner", "bogus", "--dataset", "x.csv", "--out", "o"], d), 2);
    assert_eq!(code(&["frobnicate"], d), 2);
    assert_eq!(code(&["train", "--dataset", "x.csv", "--out", "o", "--bogus-flag"], d), 2);
    assert_eq!(code(&["train", "--out", "o"], d), 2);
    assert_eq!(code(&["train", "--dataset", "x.csv", "--holdout", "1.5", "--out", "o"], d), 2);
    assert_eq!(code(&["train", "--dataset", "x.csv", "--params", "{\"nope\":1}", "--learner", "knn", "--out", "o"], d), 2);
    let out = telewb(&["train", "--dataset", "missing.csv", "--out", "o"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert_eq!(code(&["preprocess-mex", "--dir", "nowhere", "--out", "o"], d), 1);
    assert_eq!(code(&["--help"], d), 0);
}

#[test]
fn predict_evaluate_importance_whatif() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    integral_run(d);
    ok(&["train", "--dataset", "run1/dataset.csv", "--learner", "forest", "--out", "base"], d);
    let io = ["--model", "base/model.bin", "--dataset", "run1/dataset.csv"];

    ok(&[&["predict"][..], &io, &["--out", "p"]].concat(), d);
    let csv = String::from_utf8(read(d.join("p/predictions.csv"))).unwrap();
    assert!(csv.starts_with("ut_ms,entry_phase,exit_phase\n"));
    assert_eq!(csv.lines().count(), 25);
    assert!(d.join("p/predictions.meta.json").is_file());

    let out = ok(&[&["evaluate"][..], &io, &["--out", "e"]].concat(), d);
    let m: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(m["targets"][0]["count"], 24);
    let meta: serde_json::Value = serde_json::from_slice(&read(d.join("e/metrics.meta.json"))).unwrap();
    assert_eq!(meta["stage"], "evaluate");

    ok(
        &[&["importance"][..], &io, &["--score", "symbolic", "--from", "0", "--to", "1041900000000", "--out", "i"]].concat(),
        d,
    );
    let r: serde_json::Value = serde_json::from_slice(&read(d.join("i/importance.json"))).unwrap();
    assert_eq!(r["score_kind"], "symbolic");
    assert!(r["n_rows"].as_u64().unwrap() < 24);
    let meta: serde_json::Value = serde_json::from_slice(&read(d.join("i/importance.meta.json"))).unwrap();
    assert_eq!(meta["arguments"]["score_kind"], "symbolic");

    ok(&["whatif", "--base", "base", "--out", "same"], d);
    assert_eq!(read(d.join("base/model.bin")), read(d.join("same/model.bin")));
    assert_eq!(read(d.join("base/model.meta.json")), read(d.join("same/model.meta.json")));
    ok(&["whatif", "--base", "base", "--exclude-feature", "raan_deg", "--out", "child"], d);
    let c: serde_json::Value = serde_json::from_slice(&read(d.join("child/comparison.json"))).unwrap();
    assert_eq!(c["base"], "base");
    assert_eq!(c["exclusions"]["features"][0], "raan_deg");
    assert!(c["importance_deltas"]["genie3"].get("raan_deg").is_none());
}

#[test]
fn mex_preprocess_from_synthetic_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "mex", "--hours", "24", "--out", "in"], d);
    let out = ok(&["preprocess-mex", "--dir", "in", "--granularity", "30", "--out", "mex"], d);
    assert!(out.contains("33 targets"), "{out}");
    let meta: serde_json::Value = serde_json::from_slice(&read(d.join("mex/dataset.meta.json"))).unwrap();
    assert_eq!(meta["preprocess"]["granularity_min"], 30);
}
