use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pqc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PQC_OUT_DIR")
        .output()
        .expect("spawn pqc")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pqc(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(pqc(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(pqc(&[], dir.path()).status.code(), Some(64));
    assert_eq!(pqc(&["frobnicate"], dir.path()).status.code(), Some(64));
}

#[test]
fn validation_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["train-bas", "--size", "2by2"],
        vec!["train-bas", "--shots", "-4"],
        vec!["train-prior", "--target", "1.5"],
        vec!["train-prior", "--mode", "magic"],
        vec!["train-bas", "--lr", "abc"],
        vec!["simulate", "--circuit", "missing.json"],
    ] {
        let out = pqc(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "validation", "{args:?}");
        assert!(err["error"]["message"].as_str().unwrap().len() > 3);
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"train": {"learning_rat": 3}}"#).unwrap();
    let out = pqc(&["train-bas", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = pqc(&["selftest"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 8);
    assert!(!text.contains("FAIL"));
}

#[test]
fn flags_override_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"size": "2x2", "train": {"iterations": 5, "seed": 11, "learning_rate": 3.0}}"#,
    )
    .unwrap();
    let out = pqc(&["train-bas", "--config", "c.json", "--seed", "4", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = read_json(&dir.path().join("run/train_run.json"));
    let train = &run["config"]["train"];
    assert_eq!(train["iterations"], 5);
    assert_eq!(train["seed"], 4);
    assert_eq!(train["learning_rate"], 3.0);
    assert_eq!(train["shots"], "inf");
    assert_eq!(run["config"]["blocks"], 2);
    assert_eq!(run["run"]["loss"].as_array().unwrap().len(), 5);
    for name in ["train_run.json", "loss.csv", "histogram.csv", "summary.json"] {
        assert!(dir.path().join("run").join(name).is_file(), "{name}");
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pqc"))
        .args(["toy-thm3", "--n", "3", "--iters", "2"])
        .current_dir(dir.path())
        .env("PQC_OUT_DIR", "envdir")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary = read_json(&dir.path().join("envdir/summary.json"));
    assert_eq!(summary["report"]["probability"], 1.0);
    assert_eq!(summary["report"]["target"], "101");
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = pqc(&["train-prior", "--shots", "100", "--iters", "20", "--seed", "7", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["train_runs.json", "loss.csv", "histogram.csv", "summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn compile_simulate_and_entropy_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("iqp.json"),
        r#"{"num_qubits": 3, "layers": [{"t": [0, 2]}, {"cz": [[1, 2]]}]}"#,
    )
    .unwrap();
    let out = pqc(&["compile-iqp", "--in", "iqp.json", "--verify", "--out", "c"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let schedule = read_json(&dir.path().join("c/schedule.json"));
    assert_eq!(schedule["block_count"], 4 + 2 + 34);
    assert!(schedule["check"]["fidelity"].as_f64().unwrap() > 1.0 - 1e-9);

    let out = pqc(&["simulate", "--circuit", "c/mpqc_circuit.json", "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = std::fs::read_to_string(dir.path().join("s/histogram.csv")).unwrap();
    let total: f64 = hist.lines().skip(2).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let out = pqc(&["entropy-analyze", "--circuit", "c/mpqc_circuit.json", "--out", "e"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let summary = read_json(&dir.path().join("e/summary.json"));
    assert_eq!(summary["entropy_bound_violations"].as_array().unwrap().len(), 0);

    let out = pqc(&["entropy-analyze", "--circuit", "c/mpqc_circuit.json", "--hard-cap", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "runtime");
}
