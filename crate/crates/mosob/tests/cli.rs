use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mosob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mosob")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn exponent_spec(dir: &Path, name: &str, p: &str) -> String {
    let body = format!("interval = [0.0, 1.0]\nseed = 3\n\n[family]\nkind = \"variable-exponent\"\np = \"{p}\"\n");
    write(dir, name, &body).to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn audit_exit_codes_and_formats() {
    let dir = TempDir::new().unwrap();
    let good = exponent_spec(dir.path(), "sin.toml", "2 + sin(pi*x)");
    let o = mosob(&["audit", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("reflexive"));

    let o = mosob(&["--emit", "structured", "audit", &good]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["lebesgue"]["reflexive"]["status"], "HOLDS");

    let o = mosob(&["--emit", "rows", "audit", &good]);
    let text = stdout(&o);
    assert!(text.starts_with("section,property,status,rules,evidence,witness\n"));
}

#[test]
fn malformed_spec_reports_location() {
    let dir = TempDir::new().unwrap();
    let bad = exponent_spec(dir.path(), "bad.toml", "2 + (x");
    let o = mosob(&["audit", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.toml:6:"), "{err}");

    let missing = dir.path().join("nope.toml");
    assert_eq!(mosob(&["audit", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(mosob(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn norm_of_polynomial() {
    let dir = TempDir::new().unwrap();
    let spec = exponent_spec(dir.path(), "l2.toml", "2");
    let f = write(dir.path(), "f.toml", "kind = \"polynomial\"\ncoefficients = [0.0, 1.0]\n");
    let o = mosob(&["--emit", "structured", "norm", &spec, f.to_str().unwrap(), "--sobolev"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // Φ = t²/2: ‖x‖ = (1/6)^{1/2}, ‖1‖ = (1/2)^{1/2}
    let expected = (1.0f64 / 6.0).sqrt() + 0.5f64.sqrt();
    let row = v.as_array().unwrap().iter().find(|r| r["quantity"] == "sobolev").unwrap();
    let got = row["value"].as_f64().unwrap();
    assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
}

#[test]
fn probe_writes_verifiable_witness() {
    let dir = TempDir::new().unwrap();
    let spec = exponent_spec(dir.path(), "blow.toml", "1/(1-x)");
    let out = dir.path().join("w.json");
    let out_s = out.to_str().unwrap();
    let o = mosob(&["probe", &spec, "non-delta2", "-N", "3", "-o", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(mosob(&["probe", &spec, "--verify", out_s]).status.code(), Some(0));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut bundle: serde_json::Value = serde_json::from_str(&text).unwrap();
    let slack = &mut bundle["witness"]["checks"][0]["slack"];
    *slack = serde_json::json!(slack.as_f64().unwrap() + 1.0);
    std::fs::write(&out, serde_json::to_string(&bundle).unwrap()).unwrap();
    assert_eq!(mosob(&["probe", &spec, "--verify", out_s]).status.code(), Some(1));
}

#[test]
fn probe_on_delta2_space_is_refused() {
    let dir = TempDir::new().unwrap();
    let spec = exponent_spec(dir.path(), "l2.toml", "2");
    let o = mosob(&["probe", &spec, "non-delta2", "-o", dir.path().join("w.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn structured_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = exponent_spec(dir.path(), "l2.toml", "2");
    let run = || mosob(&["--emit", "structured", "probe", &spec, "uc-modulus", "--trials", "8", "--seed", "11"]).stdout;
    let first = run();
    assert!(!first.is_empty());
    assert_eq!(first, run());
}

#[test]
fn operator_certificate() {
    let dir = TempDir::new().unwrap();
    let spec = exponent_spec(dir.path(), "l2.toml", "2");
    let o = mosob(&["--emit", "structured", "operator", &spec, "--volterra", "--estimate"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bound = v["certificate"]["bound_on_norm"].as_f64().unwrap();
    let est = v["estimate"]["value"].as_f64().unwrap();
    assert!(est <= bound);
    assert!((est - 2.0 / std::f64::consts::PI).abs() < 1e-3);
}
