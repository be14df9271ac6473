mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gsns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsns"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn short_scenario(dir: &Path, horizon: f64) -> String {
    let text = fs::read_to_string(common::bundled_scenario()).unwrap();
    let text = text.replace("\"horizon\": 4.0", &format!("\"horizon\": {horizon}"));
    let path = dir.join("short.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path(), 0.2);
    let out_path = dir.path().join("trace.csv");
    let out = gsns(&["run", "--scenario", &scenario, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("max joint position violation"));
    let csv = fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("t,q_1,"));
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn solve_reports_scaling_as_success() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    // With every joint capped at 1 rad/s, J qdot reaches at most 2.5, so s = 0.625.
    fs::write(
        &path,
        r#"{"jacobian": [[1.0, 1.0, 0.5]], "task_velocity": [4.0],
            "lower": [-1, -1, -1], "upper": [1, 1, 1]}"#,
    )
    .unwrap();
    let out = gsns(&["solve", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("scaled      true"), "{text}");
    assert!(text.contains("scale       0.625000000000"), "{text}");
}

#[test]
fn verify_passes_on_a_short_bundled_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path(), 0.3);
    let out = gsns(&["verify", "--scenario", &scenario]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn exit_codes() {
    assert_eq!(gsns(&[]).status.code(), Some(1));
    assert_eq!(gsns(&["run", "--scenario"]).status.code(), Some(1));
    assert_eq!(gsns(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(&empty, "").unwrap();
    let out = gsns(&["run", "--scenario", empty.to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parse error"));

    let text = fs::read_to_string(common::bundled_scenario()).unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text.replace("\"gain\": [50.0, 50.0]", "\"gain\": [50.0, -1.0]")).unwrap();
    let out = gsns(&["verify", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("invariant violation at `gain[1]`"), "{}", stderr(&out));

    let missing = dir.path().join("missing.json");
    let out = gsns(&["solve", "--instance", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_fails_when_limits_are_broken() {
    // q0 is valid but the first control point starts at y = 0.5, above a lowered band.
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(common::bundled_scenario()).unwrap();
    let text = text
        .replace("\"horizon\": 4.0", "\"horizon\": 0.01")
        .replacen("\"p_max\": [1.0]", "\"p_max\": [0.1]", 1);
    let path = dir.path().join("broken.json");
    fs::write(&path, text).unwrap();
    let out = gsns(&["verify", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("FAIL control point position limits"));
}
