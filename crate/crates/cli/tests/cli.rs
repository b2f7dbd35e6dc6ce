use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relu-align"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn short_toy(dir: &TempDir) -> String {
    write_config(dir, "toy.json", r#"{"preset": "toy2d", "max_time": 30, "snapshot_every": 0.5}"#)
}

#[test]
fn check_toy_is_compliant() {
    let o = run(&["check", "--preset", "toy2d"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("verdict            compliant"));
    assert!(s.contains("eps_threshold"));
}

#[test]
fn check_orthogonal_reports_zero_mu() {
    let o = run(&["check", "--preset", "orthogonal"]);
    assert_eq!(code(&o), 1);
    let s = stdout(&o);
    assert!(s.contains("mu                 0.000000000000e0"));
    assert!(s.contains("non-compliant"));
    assert!(s.contains("μ=0"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&["check", "--config", "/nonexistent/cfg.json"])), 2);
    assert_eq!(code(&run(&["check"])), 2);
    assert_eq!(code(&run(&["check", "--preset", "nope"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let bad = write_config(&dir, "bad.json", r#"{"preset": "toy2d", "stepsize": 0.1}"#);
    let o = run(&["check", "--config", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stepsize"));
}

#[test]
fn non_compliant_run_needs_force() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r");
    let o = run(&["run", "--preset", "large-eps", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn run_writes_artifacts_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = short_toy(&dir);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "config.json",
        "dataset.json",
        "state_initial.json",
        "state_final.json",
        "bounds.json",
        "record.json",
        "trajectory.ndjson",
        "summary.json",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let metrics: Vec<_> = std::fs::read_dir(a.join("metrics")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(metrics.len() >= 9);
    for m in &metrics {
        let x = std::fs::read(a.join("metrics").join(m)).unwrap();
        let y = std::fs::read(b.join("metrics").join(m)).unwrap();
        assert_eq!(x, y, "{m:?} differs between identical runs");
    }
    let header = std::fs::read_to_string(a.join("metrics/align_plus.csv")).unwrap();
    assert!(header.starts_with("t,value,min,max\n"));
    assert!(std::fs::read_to_string(a.join("metrics/loss.csv")).unwrap().starts_with("t,value\n"));

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    for row in summary["rows"].as_object().unwrap().values() {
        assert!(row.get("bound").is_some() && row.get("measured").is_some() && row["satisfied"].is_boolean());
    }
    let first = std::fs::read_to_string(a.join("trajectory.ndjson")).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(line["t"], 0.0);
}

#[test]
fn seed_flag_changes_the_initialization() {
    let dir = TempDir::new().unwrap();
    let cfg = short_toy(&dir);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run(&["run", "--config", &cfg, "--seed", "7", "--out", b.to_str().unwrap()]);
    let sa = std::fs::read_to_string(a.join("state_initial.json")).unwrap();
    let sb = std::fs::read_to_string(b.join("state_initial.json")).unwrap();
    assert_ne!(sa, sb);
}

fn all_pass(dir: &Path) -> bool {
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    s["all_pass"].as_bool().unwrap()
}

#[test]
fn report_exit_code_tracks_the_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = short_toy(&dir);
    let out = dir.path().join("toy");
    run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let o = run(&["report", out.to_str().unwrap()]);
    let expect = if all_pass(&out) { 0 } else { 1 };
    assert_eq!(code(&o), expect);
    let s = stdout(&o);
    assert!(s.contains("t1_arrival"));
    assert!(s.contains("\"schema_version\":1"));
}

#[test]
fn forced_large_eps_report_fails() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("big");
    let o = run(&["run", "--preset", "large-eps", "--force", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["rows"]["compliance"]["satisfied"], false);
}

#[test]
fn report_on_empty_dir_is_an_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&["report", dir.path().to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["report", "/nonexistent/run"])), 2);
}

#[test]
fn report_on_corrupt_record_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = short_toy(&dir);
    let out = dir.path().join("toy");
    run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    std::fs::write(out.join("record.json"), "{\"snapshots\": [").unwrap();
    assert_eq!(code(&run(&["report", out.to_str().unwrap()])), 2);
}

#[test]
fn sweep_writes_one_row_per_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"preset": "mu-sweep", "sweep_seeds": [0, 1], "max_time": 15, "sweep_threads": 2}"#,
    );
    let out = dir.path().join("sw");
    let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "non-compliant sweep without --force");
    let o = run(&["sweep", "--config", &cfg, "--force", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(out.join("theta1_seed1/metrics/loss.csv").is_file());
}
