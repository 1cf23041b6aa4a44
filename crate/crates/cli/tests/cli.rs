use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(rel: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel);
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_counterplan"))
        .args(args)
        .env_remove("COUNTERPLAN_ENDPOINT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn hook_args(deploy: &str) -> Vec<String> {
    vec![
        "adapt".into(),
        "--domain".into(),
        fixture("magnetic_hook/domain.pddl"),
        "--trajectory".into(),
        fixture("magnetic_hook/trajectory.json"),
        "--deploy-state".into(),
        fixture(&format!("magnetic_hook/{deploy}")),
        "--goal".into(),
        fixture("magnetic_hook/goal.json"),
    ]
}

fn run_owned(args: Vec<String>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

#[test]
fn validate_accepts_the_fixtures() {
    let out = run(&[
        "validate",
        "--domain",
        &fixture("kitchen/domain.pddl"),
        "--trajectory",
        &fixture("kitchen/orange_grasp.json"),
        &fixture("kitchen/exploration.patch"),
        &fixture("kitchen/hinge_state.json"),
        &fixture("magnetic_hook/goal.json"),
        &fixture("magnetic_hook/removal_patch.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn malformed_patch_names_the_missing_marker() {
    let out = run(&["validate", &fixture("malformed/missing_divider.patch")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`=======`"), "{}", stderr(&out));
}

#[test]
fn empty_trajectory_is_an_input_error() {
    let out = run(&["validate", "--trajectory", &fixture("malformed/empty_trajectory.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no frames"));
    let mut args = hook_args("deploy_state.json");
    args[4] = fixture("malformed/empty_trajectory.json");
    assert_eq!(run_owned(args).status.code(), Some(2));
}

#[test]
fn zero_gap_adapt_writes_an_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = hook_args("zero_gap_state.json");
    args.extend(["--out".into(), dir.path().to_str().unwrap().into()]);
    let out = run_owned(args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(dir.path().join("patches.jsonl")).unwrap(), "");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "success");
    assert_eq!(report["explorations_used"], 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("task_spec.txt")).unwrap().lines().count(), 4);
}

#[test]
fn scripted_removal_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = hook_args("deploy_state.json");
    args.extend(
        [
            "--proposer",
            "scripted",
            "--fixture",
            &fixture("magnetic_hook/removal_patch.json"),
            "--budget",
            "3",
            "--out",
            dir.path().to_str().unwrap(),
        ]
        .map(String::from),
    );
    let out = run_owned(args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let log = std::fs::read_to_string(dir.path().join("patches.jsonl")).unwrap();
    let entries: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["outcome"], "accepted");
    let expected = std::fs::read_to_string(fixture("magnetic_hook/removal.patch")).unwrap();
    assert_eq!(entries[0]["patch"].as_str().unwrap(), expected);
    assert!(std::fs::read_to_string(dir.path().join("patches.log")).unwrap().contains(&expected));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("task_spec.txt")).unwrap(),
        "1. Push Bottom Drawer Closed\n"
    );
}

#[test]
fn unsolvable_scene_exhausts_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "adapt",
        "--domain",
        &fixture("unsolvable/domain.pddl"),
        "--trajectory",
        &fixture("unsolvable/trajectory.json"),
        "--deploy-state",
        &fixture("unsolvable/deploy_state.json"),
        "--goal",
        &fixture("unsolvable/goal.json"),
        "--depth",
        "1",
        "--budget",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "budget_exhausted");
    assert_eq!(report["explorations_used"], 5);
}

#[test]
fn proposer_transport_failure_exits_with_four() {
    let mut args = hook_args("deploy_state.json");
    args.extend(["--proposer", "external", "--endpoint", "exec:sleep 5", "--timeout", "1", "--budget", "4"].map(String::from));
    let out = run_owned(args);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn external_proposer_without_endpoint_is_an_input_error() {
    let mut args = hook_args("deploy_state.json");
    args.extend(["--proposer", "external"].map(String::from));
    let out = run_owned(args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("COUNTERPLAN_ENDPOINT"));
}

#[test]
fn zero_gap_bench_is_fully_successful_and_retabulates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let out = run(&["bench", "--suite", "zero-gap", "--mini", "--seed", "7", "--out", path]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let sr = header.iter().position(|h| *h == "sr_pct").unwrap();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[sr] == "100.00"), "{csv}");

    let again = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.json");
    let out = run(&["metrics", results.to_str().unwrap(), "--out", again.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(again.path().join("metrics.csv")).unwrap(), csv);
}

#[test]
fn build_model_writes_the_recovered_domain() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "build-model",
        "--domain",
        &fixture("magnetic_hook/domain.pddl"),
        "--trajectory",
        &fixture("magnetic_hook/trajectory.json"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let model = std::fs::read_to_string(dir.path().join("model.pddl")).unwrap();
    let back = run(&["validate", dir.path().join("model.pddl").to_str().unwrap()]);
    assert_eq!(back.status.code(), Some(0), "{}", stderr(&back));
    assert!(model.contains("ReleaseMagneticHookIntoBottomDrawer"));
    assert_eq!(std::fs::read_to_string(dir.path().join("procedure.txt")).unwrap().lines().count(), 4);
}
