use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn blab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blab")).args(args).output().unwrap()
}

fn blab_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn diagnostic(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

const F43: &str = "1.3333333333333333";

#[test]
fn eval_prints_the_closed_form() {
    let out = blab(&["bellman", "eval", "--p", "2", "--f", "1", "--F", F43]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!((v["s_p"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((v["omega"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!((v["ratio"].as_f64().unwrap() - 0.75).abs() < 1e-15);
}

#[test]
fn eval_as_csv() {
    let out = blab(&["bellman", "eval", "--p", "3", "--f", "1", "--F", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "s_p,omega,ratio,residual");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(row[2], 0.5);
    // ω solves H_3(ω) = 1/2, and S = F ω³.
    let w = row[1];
    assert!((w * w * (3.0 - 2.0 * w) - 0.5).abs() < 1e-12);
    assert!((row[0] - 2.0 * w.powi(3)).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    let infeasible = blab(&["bellman", "eval", "--p", "2", "--f", "2", "--F", "1"]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert_eq!(diagnostic(&infeasible)["error"], "infeasible-moments");

    let small_p = blab(&["bellman", "eval", "--p", "1.001", "--f", "1", "--F", "2"]);
    assert_eq!(small_p.status.code(), Some(2));
    assert_eq!(diagnostic(&small_p)["error"], "usage");

    assert_eq!(blab(&["bellman", "eval", "--p", "2"]).status.code(), Some(2));
    assert_eq!(blab(&["frobnicate"]).status.code(), Some(2));

    let missing = blab(&["run", "--config", "/nonexistent/spec.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let threads = Command::new(env!("CARGO_BIN_EXE_blab"))
        .args(["bellman", "eval", "--p", "2", "--f", "1", "--F", "2"])
        .env("BLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn unreachable_tolerance_is_a_numeric_failure() {
    let out = blab(&["bellman", "eval", "--p", "2.5", "--f", "1", "--F", "3", "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(3));
    let d = diagnostic(&out);
    assert_eq!(d["error"], "numeric-failure");
    assert_eq!(d["exit_code"], 3);
    assert!(out.stdout.is_empty());
}

#[test]
fn concavity_scan_csv() {
    let out = blab(&["bellman", "scan-concavity", "--p", "1.5", "--tmin", "1.01", "--tmax", "50", "--n", "200"]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(&out.stdout[..]);
    assert_eq!(reader.headers().unwrap(), vec!["t", "G", "second_diff"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 198);
    assert!(rows.iter().all(|r| r[2] < 0.0 && r[1] > r[0]));
}

#[test]
fn search_audit_and_trend() {
    let dir = tempfile::tempdir().unwrap();
    let out = blab_in(
        dir.path(),
        &[
            "extremal", "search", "--p", "2", "--f", "1", "--F", F43, "--depth", "4", "--restarts", "2",
            "--iters", "40", "--seed", "5", "--out", "report.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&std::fs::read(dir.path().join("report.json")).unwrap());
    for key in ["params", "config", "best", "trace"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["params"]["F"].as_f64().unwrap(), 4.0 / 3.0);
    let leaves: Vec<f64> = report["best"]["leaf_values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(leaves.len(), 16);
    let trace_keys = ["iter", "objective", "gap", "level1_max_dev", "levelset_mass", "slack_sum"];
    for key in trace_keys {
        assert!(report["trace"][0].get(key).is_some(), "trace lacks {key}");
    }

    let audit = blab_in(dir.path(), &["extremal", "audit", "--in", "report.json", "--levels", "1,2", "--out", "audit.csv"]);
    assert!(audit.status.success(), "{}", String::from_utf8_lossy(&audit.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("audit.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["node_id", "level", "mass", "avg_phi", "avg_phip", "avg_maxenergy", "dev_f", "dev_F", "dev_S", "delta_slack"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 + 4);
    // Level-1 averages straight from the leaves.
    for (r, half) in rows[..2].iter().zip([&leaves[..8], &leaves[8..]]) {
        let avg = half.iter().sum::<f64>() / 8.0;
        assert!((r[3].parse::<f64>().unwrap() - avg).abs() < 1e-12);
        assert_eq!(r[1].parse::<usize>().unwrap(), 1);
    }

    let trend = blab_in(dir.path(), &["extremal", "trend", "--in", "report.json"]);
    assert!(trend.status.success());
    let t = json(&trend.stdout);
    assert!((t["threshold"].as_f64().unwrap() - 0.15).abs() < 1e-9);
    assert_eq!(t["iterates"].as_u64().unwrap() as usize, report["trace"].as_array().unwrap().len());

    let rows = blab_in(dir.path(), &["extremal", "trend", "--in", "report.json", "--format", "csv"]);
    let text = String::from_utf8(rows.stdout).unwrap();
    assert!(text.starts_with("iter,objective,gap,level1_max_dev,levelset_mass,slack_sum,near_extremal\n"));
}

#[test]
fn tampered_reports_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = blab_in(
        dir.path(),
        &["extremal", "search", "--p", "2", "--f", "1", "--F", F43, "--depth", "3", "--iters", "10", "--out", "r.json"],
    );
    assert!(out.status.success());
    let path = dir.path().join("r.json");
    let mut report = json(&std::fs::read(&path).unwrap());
    report["best"]["objective"] = Value::from(2.999);
    std::fs::write(&path, serde_json::to_vec(&report).unwrap()).unwrap();
    let audit = blab_in(dir.path(), &["extremal", "audit", "--in", "r.json", "--out", "a.csv"]);
    assert_eq!(audit.status.code(), Some(3));
    assert_eq!(diagnostic(&audit)["error"], "invariant-violation");
    assert!(!dir.path().join("a.csv").exists());
}

#[test]
fn run_weak_type_fuzz_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{
        "kind": "weak-type-fuzz",
        "tree_spec": {"uniform": {"arity": 2, "depth": 6}},
        "fuzz": {"count": 1000, "lambdas": 32},
        "output": {"path": "fuzz.json"}
    }"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let out = blab_in(dir.path(), &["run", "--config", "spec.json", "--seed", "3"]);
    assert!(out.status.success());
    let v = json(&std::fs::read(dir.path().join("fuzz.json")).unwrap());
    assert_eq!(v["violations"], 0);
    assert_eq!(v["count"], 1000);
    assert!(v["worst_ratio"].as_f64().unwrap() <= 1.0 + 1e-12);

    let csv_out = blab_in(dir.path(), &["run", "--config", "spec.json", "--out", "fuzz.csv", "--format", "csv"]);
    assert!(csv_out.status.success());
    let text = std::fs::read_to_string(dir.path().join("fuzz.csv")).unwrap();
    assert!(text.starts_with("count,lambdas,violations,"));
}

#[test]
fn run_depth_zero_boundary_search() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{
        "kind": "extremal-search",
        "params": {"p": 2.0, "f": 1.5, "F": 2.25},
        "tree_spec": {"uniform": {"arity": 2, "depth": 0}}
    }"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let out = blab_in(dir.path(), &["run", "--config", "spec.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert!(v["best"]["gap"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(v["best"]["leaf_values"][0].as_f64().unwrap(), 1.5);
}

#[test]
fn run_rejects_invalid_specs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown.json", r#"{"kind": "render-plot"}"#),
        ("missing.json", r#"{"kind": "bellman-eval"}"#),
        ("infeasible.json", r#"{"kind": "extremal-search", "params": {"p": 2, "f": 2, "F": 1}}"#),
        ("broken.json", "{"),
    ] {
        std::fs::write(dir.path().join(name), text).unwrap();
        let out = blab_in(dir.path(), &["run", "--config", name]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        diagnostic(&out);
    }
}

#[test]
fn flags_and_config_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{
        "kind": "extremal-search",
        "params": {"p": 2, "f": 1, "F": 1.3333333333333333},
        "search": {"depth": 3, "arity": 2, "restarts": 2, "max_iters": 15, "seed": 0}
    }"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let from_config = blab_in(dir.path(), &["run", "--config", "spec.json", "--seed", "9"]);
    let from_flags = blab_in(
        dir.path(),
        &["extremal", "search", "--p", "2", "--f", "1", "--F", F43, "--depth", "3", "--restarts", "2", "--iters", "15", "--seed", "9"],
    );
    assert!(from_config.status.success() && from_flags.status.success());
    assert_eq!(from_config.stdout, from_flags.stdout);
}
