//! End-to-end runs of the `percolab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn percolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percolab"))
        .args(args)
        .env_remove("PERCOLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn trees_artifact_carries_a_manifest() {
    let o = percolab(&["trees", "--k", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["manifest"]["schema"], 1);
    assert_eq!(v["manifest"]["command"], "trees");
    assert_eq!(v["manifest"]["argv"], serde_json::json!(["trees", "--k", "4"]));
    assert!(v["manifest"]["version"].is_string());
    assert_eq!(v["result"]["count"], 3);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(percolab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(percolab(&["trees", "--bogus"]).status.code(), Some(2));
    assert_eq!(percolab(&["trees"]).status.code(), Some(2));
    let o = percolab(&["integral", "--points", "[[0,0,0,0,0,0,0],[0,0,0,0,0,0,0],[1,0,0,0,0,0,0]]", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("coincide"), "{}", stderr(&o));
    assert_eq!(percolab(&["--workers", "0", "trees", "--k", "3"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let o = percolab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verify"));
}

#[test]
fn failed_checks_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pts.csv");
    std::fs::write(&csv, "n,value\n1,1\n2,0.125\n4,0.015625\n").unwrap();
    let ok = percolab(&["fit", "--input", csv.to_str().unwrap(), "--expect", "-3", "--tol", "0.01"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!((v["result"]["slope"].as_f64().unwrap() + 3.0).abs() < 1e-12);
    let bad = percolab(&["fit", "--input", csv.to_str().unwrap(), "--expect", "-2", "--tol", "0.01"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn verify_suite_passes() {
    let o = percolab(&["verify", "bk"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["manifest"]["command"], "verify");
}

#[test]
fn seed_defaults_to_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_percolab"))
        .args(["trees", "--k", "3"])
        .env("PERCOLAB_SEED", "4242")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["manifest"]["seed"], 4242);
    let o = percolab(&["--seed", "7", "trees", "--k", "3"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["manifest"]["seed"], 7);
}

#[test]
fn replaying_the_manifest_reproduces_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let o = percolab(&[
        "--workers", "1", "--seed", "99", "--out", first.to_str().unwrap(),
        "tau", "--dim", "2", "--radius", "3", "--points", "[[0,0],[2,1]]", "--p", "0.6", "--trials", "5000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("first.json.partial").exists());
    let a = read_json(&first);
    let second = dir.path().join("second.json");
    let argv: Vec<String> = a["manifest"]["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .map(|s| if s == first.to_str().unwrap() { second.to_str().unwrap().to_string() } else { s })
        .collect();
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    assert_eq!(percolab(&argv).status.code(), Some(0));
    let b = read_json(&second);
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["manifest"]["params"], b["manifest"]["params"]);
}

#[test]
fn csv_output_is_well_formed() {
    let o = percolab(&["conv-check", "--d", "5", "--y", "(4,0,0,0,0)", "--radius", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    let manifest: Value = serde_json::from_str(comment.strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(manifest["schema"], 1);
    let body: String = lines.map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["instance", "y", "w", "radius", "lhs", "rhs", "ratio"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let ratio: f64 = rows[0][6].parse().unwrap();
    assert!(ratio > 0.0 && ratio.is_finite());
}

#[test]
fn prediction_inputs_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("inputs.json");
    std::fs::write(&inputs, r#"{"alpha": 1.0, "p_c": 0.5, "d": 7}"#).unwrap();
    let o = percolab(&["predict", "--k", "3", "--inputs", inputs.to_str().unwrap(), "--quad"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho"), "{}", stderr(&o));
    std::fs::write(&inputs, r#"{"alpha": 1.0, "p_c": 0.5, "rho": 1.0, "d": 7}"#).unwrap();
    let o = percolab(&["predict", "--k", "3", "--inputs", inputs.to_str().unwrap(), "--quad"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn attempt_cap_is_a_runtime_failure() {
    let o = percolab(&[
        "bubble", "--dim", "2", "--radius", "6", "--p", "0.01", "--R", "6", "--trials", "1", "--max-attempts", "20",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
