use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hamhopf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamhopf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

const MINIMAL: &str = r#"{"model":"coupled_oscillator","lambda_interval":[0.9,1.1]}"#;

#[test]
fn minimal_config_uses_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let out = hamhopf(dir.path(), &["resonance", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["tolerances"]["frame"], 1e-8);
    assert_eq!(r["tolerances"]["rpo"], 1e-6);
    assert_eq!(r["result"]["dim"], 8);
    assert_eq!(r["result"]["equivariance"]["pass"], true);
}

#[test]
fn unknown_model_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"model":"duffing","lambda_interval":[0.9,1.1],"colour":1}"#);
    let out = hamhopf(dir.path(), &["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["error"]["code"], "SCHEMA_ERROR");
    let ptrs: Vec<&str> = r["error"]["details"].as_array().unwrap().iter().map(|d| d["pointer"].as_str().unwrap()).collect();
    assert!(ptrs.contains(&"/model") && ptrs.contains(&"/colour"), "{ptrs:?}");
}

#[test]
fn bad_tolerance_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = hamhopf(dir.path(), &["resonance", "--tol", "frame=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["error"]["details"][0]["pointer"], "/tolerances/frame");
}

#[test]
fn linear_term_in_inline_jet_violates_h1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
  "model": {"inline": {
    "name": "shifted",
    "jet": {"dim": 2, "terms": [
      {"exponents": [1, 0], "coeffs": [0.5]},
      {"exponents": [2, 0], "coeffs": [0.5]},
      {"exponents": [0, 2], "coeffs": [0.5]}
    ]},
    "form": {"matrix": [[0, -1], [1, 0]]}
  }},
  "lambda_interval": [0, 1]
}"#,
    );
    let out = hamhopf(dir.path(), &["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert_eq!(r["status"], "hypothesis_failure");
    assert_eq!(r["error"]["code"], "H1_VIOLATION");
}

#[test]
fn analyze_finds_the_event_at_k_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = hamhopf(dir.path(), &["analyze"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let ev = &r["result"]["hopf_events"][0];
    assert!((ev["lambda_star"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!((ev["nu_star"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(ev["classification"], "COLLISION_SPLIT");
    assert!((r["result"]["o2"]["a"].as_f64().unwrap() + 0.1).abs() < 1e-8);
}

#[test]
fn zero_drift_branches_are_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let out = hamhopf(dir.path(), &["branches", "--xi", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let br = r["result"]["branches"].as_array().unwrap();
    assert_eq!(br.len(), 1);
    assert_eq!(br[0]["kind"], "PERIODIC");
    for p in br[0]["points"].as_array().unwrap() {
        let (a, b) = (p["z1_sq"].as_f64().unwrap(), p["z2_sq"].as_f64().unwrap());
        assert!((a - b).abs() < 1e-15 && a > 0.0);
    }
}

#[test]
fn so3_branches_and_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"model":"so3_rep5","params":{"b3":0.5}}"#);
    let out = hamhopf(dir.path(), &["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    let d = &r["result"]["z3_torus"]["delta"];
    assert!((d[0].as_f64().unwrap() + 1.0).abs() < 1e-10 && (d[1].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert_eq!(r["result"]["isotropy_lattice"].as_array().unwrap().len(), 6);
    let out = hamhopf(dir.path(), &["branches", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!report(&out)["result"]["torus"].as_array().unwrap().is_empty());
}

#[test]
fn verify_certifies_an_rpo() {
    let dir = tempfile::tempdir().unwrap();
    let out = hamhopf(dir.path(), &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert!(r["result"]["certificate"]["residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["result"]["certificate"]["nontrivial"], true);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let a = hamhopf(dir.path(), &["branches", "--config", &cfg, "--out", "a"]);
    let b = hamhopf(dir.path(), &["branches", "--config", &cfg, "--out", "b"]);
    assert_eq!(a.stdout, b.stdout);
    let ra = std::fs::read(dir.path().join("a/branches.json")).unwrap();
    let rb = std::fs::read(dir.path().join("b/branches.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra, a.stdout);
    assert!(dir.path().join("a/branches.meta.json").exists());
}

#[test]
fn sweep_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"model":"coupled_oscillator","lambda_interval":[0.9,1.1],"sweep":{"points":5}}"#);
    let serial = hamhopf(dir.path(), &["sweep", "--config", &cfg, "--format", "csv", "--jobs", "1"]);
    let parallel = hamhopf(dir.path(), &["sweep", "--config", &cfg, "--format", "csv", "--jobs", "3"]);
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(serial.stdout, parallel.stdout);
    let text = String::from_utf8(serial.stdout).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    let mut header = String::from("lambda");
    for k in 1..=8 {
        header.push_str(&format!(",re_mu{k},im_mu{k}"));
    }
    header.push_str(",sigma,rho,tau,psi,f1");
    assert_eq!(lines[0], header);
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("9.0000000000000002e-1,"));
}
