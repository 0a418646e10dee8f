use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gammacop"));
    c.env_remove("GAMMACOP_MAX_TERMS");
    c
}

fn bb10() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join("bb10.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_model(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn tau_closed_form_is_pinned() {
    let v = json(&run(&["tau", "--model", bb10().to_str().unwrap()]));
    assert_eq!(v["method"], "closed_form");
    assert_eq!(v["tau"].to_string(), "2.9868830001288586e-2");
    let q = json(&run(&["tau", "--model", bb10().to_str().unwrap(), "--method", "quad"]));
    assert!((q["tau"].as_f64().unwrap() - 2.9868830001288586e-2).abs() < 1e-10);
}

#[test]
fn rho_matches_library() {
    let v = json(&run(&["rho", "--model", bb10().to_str().unwrap()]));
    let model = gammacop::polynomial::AffineModel::from_json_str(&std::fs::read_to_string(bb10()).unwrap()).unwrap();
    let c = gammacop::copulas::CopulaModel::build(&model).unwrap();
    let want = gammacop::dependence::spearman_rho_of(&c, &Default::default()).unwrap().value;
    assert_eq!(v["rho"].as_f64().unwrap(), want);
}

#[test]
fn check_reports_non_divisible_models() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, "nd.json", r#"{"n":2,"coeffs":{"1":1,"2":1,"1,2":2},"lambda":1}"#);
    let v = json(&run(&["check", "--model", &m]));
    assert_eq!(v["divisible"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());
    let v = json(&run(&["check", "--model", bb10().to_str().unwrap()]));
    assert_eq!(v["divisible"], true);
}

#[test]
fn sampling_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let model = bb10();
    let mut outs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let p = dir.path().join(name);
        let o = run(&[
            "sample",
            "--model",
            model.to_str().unwrap(),
            "--n",
            "500",
            "--seed",
            "11",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outs.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let text = String::from_utf8(outs[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2"));
    assert_eq!(lines.count(), 500);
    let other = run(&["sample", "--model", model.to_str().unwrap(), "--n", "500", "--seed", "11", "--stream", "1"]);
    assert_ne!(other.stdout, outs[0]);
    let cop = run(&["sample", "--model", model.to_str().unwrap(), "--n", "3", "--space", "copula"]);
    assert!(String::from_utf8(cop.stdout).unwrap().starts_with("v1,v2\n"));
}

#[test]
fn normalize_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, "m.json", r#"{"lambdas":[2,3],"lambda":1,"coeffs":{"1,2":5e-1,"2":1,"":1,"1":1},"n":2}"#);
    let first = dir.path().join("first.json");
    assert!(run(&["normalize", "--model", &m, "--out", first.to_str().unwrap()]).status.success());
    let second = run(&["normalize", "--model", first.to_str().unwrap()]);
    assert!(second.status.success());
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let b: Value = serde_json::from_slice(&second.stdout).unwrap();
    assert_eq!(a, b);
    let canonical: Value = serde_json::from_str(&std::fs::read_to_string(bb10()).unwrap()).unwrap();
    assert_eq!(a, canonical);
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", "--model", bb10().to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, "nd.json", r#"{"n":2,"coeffs":{"1":1,"2":1,"1,2":2},"lambda":1}"#);
    assert_eq!(run(&["validate", "--model", &m]).status.code(), Some(5));
}

#[test]
fn error_exit_codes() {
    assert_eq!(run(&["tau", "--model", "/nonexistent/model.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write_model(&dir, "bad.json", r#"{"n":2,"coeffs":{"":0.5},"lambda":1}"#);
    assert_eq!(run(&["check", "--model", &bad]).status.code(), Some(2));
    assert_eq!(run(&["tau", "--model", bb10().to_str().unwrap(), "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["copula", "--model", bb10().to_str().unwrap(), "--v", "1.5,0.5"]).status.code(), Some(1));
    let starved =
        bin().env("GAMMACOP_MAX_TERMS", "1").args(["tau", "--model", bb10().to_str().unwrap()]).output().unwrap();
    assert_eq!(starved.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&starved.stderr).contains("partial"));
}

#[test]
fn plain_format_and_special_functions() {
    let o = run(&["--format", "plain", "fn", "pfq", "--args", "1;2;0.5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("value ")).unwrap();
    let v: f64 = line["value ".len()..].parse().unwrap();
    // 1F1(1;2;z) = (e^z − 1)/z
    assert!((v - (0.5f64.exp() - 1.0) / 0.5).abs() < 1e-14);
    let pdf = json(&run(&["pdf", "--model", bb10().to_str().unwrap(), "--x", "1,2"]));
    assert!((pdf["pdf"].as_f64().unwrap() - pdf["logpdf"].as_f64().unwrap().exp()).abs() < 1e-15);
}

#[test]
fn unsorted_subset_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, "m.json", r#"{"n":2,"coeffs":{"2,1":0.5,"2":1,"1":1},"lambda":1}"#);
    let o = run(&["normalize", "--model", &m]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sorted"));
}
