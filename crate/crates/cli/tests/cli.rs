use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landmark-control"))
        .args(args)
        .env("LANDMARK_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn identities_pass_for_each_dimension() {
    for d in ["1", "2", "3"] {
        let o = run(&["identities", "--d", d]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
}

#[test]
fn identities_reject_dimension_zero() {
    assert_eq!(run(&["identities", "--d", "0"]).status.code(), Some(2));
}

#[test]
fn certify_writes_certificate_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = run(&["certify", data("config_d2_n3.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = read_json(&out);
    assert_eq!(cert["success"], Value::Bool(true));
    assert_eq!(cert["exact"], Value::Bool(true));
    let manifest = read_json(&dir.path().join("cert.manifest.json"));
    assert_eq!(manifest["command"], "certify");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn certify_with_too_little_depth_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = run(&["certify", data("config_d1_n3.json").to_str().unwrap(), "--depth", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(read_json(&out)["success"], Value::Bool(false));
}

#[test]
fn certify_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        run(&["certify", data("config_d2_n3.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn steer_bundled_problem() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let o = run(&["steer", data("problem_d2_n3.json").to_str().unwrap(), "--out", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let sol = read_json(&dir.path().join("run.solution.json"));
    assert_eq!(sol["converged"], Value::Bool(true));
    assert!(sol["residual"].as_f64().unwrap() < 1e-8);
    let csv = fs::read_to_string(dir.path().join("run.trajectory.csv")).unwrap();
    assert!(csv.starts_with("leg,time,landmark,x1,x2\n"));
    let manifest = read_json(&dir.path().join("run.manifest.json"));
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn steer_rejects_order_mismatch_on_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let o = run(&["steer", data("problem_d1_mismatch.json").to_str().unwrap(), "--out", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("order"));
}

#[test]
fn flow_replays_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("f");
    let o = run(&[
        "flow",
        data("schedule_d2.json").to_str().unwrap(),
        data("config_d2_n3.json").to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.path().join("f.flow.json"));
    assert_eq!(v["status"], "ok");
    assert_eq!(v["final_points"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_input_is_a_usage_error() {
    assert_eq!(run(&["certify", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
