use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pursuit-sim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "run",
        scenario("fig1.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(
        csv.starts_with("t,agent_id,role,x,y,theta,v,w,phase,target_id"),
        "{}",
        csv.lines().next().unwrap()
    );
    assert!(csv.lines().count() > 100);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "fig1");
    assert_eq!(stdout_json(&out)["scenario"], "fig1");
}

#[test]
fn run_dt_override_changes_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "run",
        scenario("fig1.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--dt",
        "0.01",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let second = csv.lines().nth(3).unwrap();
    assert!(second.starts_with("0.01,"), "{second}");
}

#[test]
fn verify_theorem1_reports_bound() {
    let out = sim(&["verify", "theorem1", scenario("remark1.json").to_str().unwrap()]);
    assert!(out.status.success());
    let bound = stdout_json(&out)["report"]["eps1_bound"].as_f64().unwrap();
    assert!((bound - 1.31652).abs() < 1e-5);
}

#[test]
fn verify_theorem2_converges() {
    let out = sim(&["verify", "theorem2", scenario("theorem2.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    for row in v["trajectories"].as_array().unwrap() {
        assert!(row["abs_error"].as_f64().unwrap() < 1e-2, "{row}");
    }
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "sweep",
        scenario("fig4a.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert_eq!(stdout_json(&out)["cells"], 100);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("fig1.json")).unwrap();
    let mut file: Value = serde_json::from_str(&text).unwrap();
    file["roles"]["evader"]["c"] = serde_json::json!(1.2);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, file.to_string()).unwrap();
    let out = sim(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn missing_file_is_a_config_error() {
    let out = sim(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sim(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(sim(&[]).status.code(), Some(1));
    assert_eq!(sim(&["--help"]).status.code(), Some(0));
}
