//! Integration tests for the experiment runner, including the bit-identical
//! rerun requirement: two single-threaded runs of the same config must
//! produce byte-for-byte equal CSV outputs.

use std::fs;
use std::path::Path;

use nctorus_cli::{run, validate, Config};

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

fn run_into(cfg: &Config, dir: &Path) -> serde_json::Value {
    let output = run(cfg, dir).expect("run failed");
    output.manifest
}

#[test]
fn acceptance_11_reruns_are_bit_identical() {
    let configs = [
        r#"{"experiment": "ergodic-average", "alpha": 0.25, "f": "char:z0=1,w=1",
            "a": "V", "n_schedule": [16, 64, 256]}"#,
        r#"{"experiment": "cohomology", "alpha": 0.3333333333333333,
            "f": "char:z0=1,w=1", "n_range": 2, "k_schedule": [32, 64]}"#,
        r#"{"experiment": "trace-invariance", "iterations": 64, "samples": 8,
            "f": "exp-sin:amp=0.7,freq=1"}"#,
        r#"{"experiment": "spectral-measure", "a": "one", "horizon": 256}"#,
        r#"{"experiment": "classical-crosscheck", "a": "UV",
            "f": "exp-sin:amp=0.7,freq=1", "n_schedule": [128], "points": 4}"#,
        r#"{"experiment": "counterexample", "levels": 2, "window": [64, 256]}"#,
    ];
    for doc in &configs {
        let cfg = Config::from_json_str(doc).unwrap();
        let t1 = tempfile::tempdir().unwrap();
        let t2 = tempfile::tempdir().unwrap();
        let m1 = run_into(&cfg, t1.path());
        let m2 = run_into(&cfg, t2.path());
        let files: Vec<String> = m1["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f.as_str().unwrap().to_string())
            .collect();
        assert!(!files.is_empty());
        assert_eq!(m1["files"], m2["files"]);
        for f in &files {
            let a = read(t1.path(), f);
            let b = read(t2.path(), f);
            assert_eq!(a, b, "file {f} differs between reruns for {doc}");
        }
        println!(
            "acceptance 11 reproducibility: PASS for {} ({} files bit-identical)",
            m1["experiment"], files.len()
        );
    }
}

#[test]
fn malformed_configs_are_config_errors() {
    assert!(Config::from_json_str(r#"{"experiment": "cohomology", "typo_key": 3}"#).is_err());
    assert!(Config::from_json_str(r#"{"experiment": "not-an-experiment"}"#).is_err());
    // alpha ≠ 0 rejected for the classical cross-check at validation time
    let cfg = Config::from_json_str(
        r#"{"experiment": "classical-crosscheck", "alpha": 0.5}"#,
    )
    .unwrap();
    assert!(validate(&cfg).is_err());
    let cfg = Config::from_json_str(r#"{"experiment": "cohomology", "f": "char:z0=1"}"#).unwrap();
    assert!(validate(&cfg).is_err());
}

#[test]
fn manifest_echoes_resolved_defaults() {
    let cfg = Config::from_json_str(r#"{"experiment": "ergodic-average", "n_schedule": [8, 32]}"#)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_into(&cfg, dir.path());
    let resolved = &manifest["resolved"];
    assert_eq!(resolved["alpha"], 0.0);
    assert_eq!(resolved["f"], "char:z0=1,w=1");
    assert_eq!(resolved["n_schedule"], serde_json::json!([8, 32]));
    assert!(manifest["version"].is_string());
    assert!(manifest["wall_ms"].is_number());
    // results.csv has a header naming its columns
    let body = String::from_utf8(read(dir.path(), "results.csv")).unwrap();
    assert!(body.starts_with("N,lambda_re,lambda_im,lower_norm,upper_norm,gns_norm\n"));
    // all numbers carry 17 significant digits
    let second_field = body.lines().nth(1).unwrap().split(',').nth(3).unwrap();
    assert!(second_field.contains('.') && second_field.contains('e'));
    assert_eq!(second_field.split('.').nth(1).unwrap().split('e').next().unwrap().len(), 16);
}

#[test]
fn cesaro_eigenvector_run_is_exact() {
    // a = U with λ = e^{iθ}: the averages stay at U, gns norm 1
    let cfg = Config::from_json_str(
        r#"{"experiment": "weighted-average", "alpha": 0.25, "a": "U",
            "lambda": {"theta_multiple": 1}, "n_schedule": [32, 128]}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_into(&cfg, dir.path());
    let gns = manifest["summary"]["final_gns_norm"].as_f64().unwrap();
    assert!((gns - 1.0).abs() < 1e-10);
}

#[test]
fn cohomology_run_reports_ergodic_evidence() {
    let cfg = Config::from_json_str(
        r#"{"experiment": "cohomology", "f": "char:z0=1,w=1", "n_range": 2,
            "k_schedule": [64, 128]}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_into(&cfg, dir.path());
    assert_eq!(manifest["summary"]["verdict"], "ErgodicEvidence");
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["verdict"], "ErgodicEvidence");
}

#[test]
fn counterexample_run_summary() {
    let cfg = Config::from_json_str(
        r#"{"experiment": "counterexample", "levels": 3, "window": [256, 1024]}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_into(&cfg, dir.path());
    let s = &manifest["summary"];
    assert!(s["identity_sup"].as_f64().unwrap() <= 1e-12);
    assert!(s["eigen_residual"].as_f64().unwrap() <= 1e-10);
    assert!(s["liouville_score"].as_f64().unwrap() >= 2.0);
    let construction: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "construction.json")).unwrap();
    assert_eq!(construction["amps"].as_array().unwrap().len(), 3);
}

#[test]
fn spectral_run_detects_dirac_atom() {
    let cfg = Config::from_json_str(
        r#"{"experiment": "spectral-measure", "a": "one", "horizon": 512}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_into(&cfg, dir.path());
    let mass = manifest["summary"]["atom_mass"].as_f64().unwrap();
    assert!((mass - 1.0).abs() < 1e-6);
    assert_eq!(manifest["summary"]["is_atom"], true);
}
