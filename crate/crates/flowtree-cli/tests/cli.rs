use std::path::Path;
use std::process::{Command, Output};

use flowtree::tree::{chain_fibonacci, ratio_ball_window, window_to_json, RatioProfile, DEFAULT_VERTEX_CAP};

fn flowtree(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowtree"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("artifact exists")).expect("valid json")
}

#[test]
fn abel_check_succeeds_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowtree(&["abel-check", "--q", "3", "--degree", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("abel-check.csv")).unwrap();
    assert!(csv.starts_with("power,pairs,max_deviation,mismatches"));
    assert_eq!(csv.lines().count(), 7);
    let meta = json(&dir.path().join("abel-check.json"));
    assert_eq!(meta["metadata"]["q"], 3);
}

#[test]
fn malformed_tree_exits_with_schema_status() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("bad.json");
    std::fs::write(
        &tree,
        r#"{"vertices":[
        {"id":"r","pred":null,"measure":"1","complete":true},
        {"id":"a","pred":"r","measure":"1/2","complete":false},
        {"id":"b","pred":"nowhere","measure":"1/2","complete":false}]}"#,
    )
    .unwrap();
    let out = flowtree(&["kernel", "--tree", tree.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let record = json(&dir.path().join("kernel.failure.json"));
    let detail = record["failures"][0]["detail"].as_str().unwrap();
    assert!(detail.contains("vertices[2]"), "{detail}");
}

#[test]
fn unknown_command_exits_with_schema_status() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(flowtree(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(flowtree(&["heat", "--t-grid", "1:x:2"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_assertion_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowtree(&["heat", "--t-grid", "4", "--tol", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let record = json(&dir.path().join("heat.failure.json"));
    assert_eq!(record["status"], "assertion-failed");
    assert_eq!(record["failures"][0]["check"], "mass");
}

#[test]
fn flags_override_configuration_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command":"abel-check","q":2,"degree":3,"depth":3}"#).unwrap();
    let out = flowtree(&["--config", cfg.to_str().unwrap(), "--q", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let meta = json(&dir.path().join("abel-check.json"));
    assert_eq!(meta["metadata"]["q"], 3);
    assert_eq!(meta["metadata"]["config"]["degree"], 3);
    std::fs::write(&cfg, r#"{"command":"abel-check","unknown-key":1}"#).unwrap();
    assert_eq!(flowtree(&["--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn rational_output_is_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let out = flowtree(&["transfer-check", "--tree", "ratios:1/3,1/3,1/3", "--jobs", jobs], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("transfer-check.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn riesz_skew_check_on_golden_tree_file() {
    let dir = tempfile::tempdir().unwrap();
    let (tree, _) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 4, 290, DEFAULT_VERTEX_CAP).unwrap();
    let path = dir.path().join("golden.json");
    std::fs::write(&path, window_to_json(&tree).unwrap()).unwrap();
    let out = flowtree(&["riesz-skew-check", "--tree", path.to_str().unwrap(), "--tol", "1e-6"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("riesz-skew-check.csv")).unwrap();
    assert!(csv.lines().next().unwrap().split(',').any(|c| c == "deviation"));
    let meta = json(&dir.path().join("riesz-skew-check.json"));
    assert!(meta["metadata"]["max_deviation"].as_f64().unwrap() <= 1e-6);
}
