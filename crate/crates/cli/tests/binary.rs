mod common;

use std::path::PathBuf;
use std::process::Command;

use common::{model_json, sweep_json};

fn adiabat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adiabat"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn validate_reference_model() {
    let out = adiabat()
        .arg("validate")
        .arg(configs().join("reference_model.json"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn validate_flags_a_bad_warp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let json = r#"{ "base_circumference": 6.283185307179586, "base_points": 8, "fibre_points": 6, "rank": 1,
        "warp": { "preset": "sin", "amplitude": 1.5, "harmonic": 1 } }"#;
    std::fs::write(&path, json).unwrap();
    let out = adiabat().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn missing_file_is_an_error() {
    let out = adiabat()
        .args(["bands", "/nonexistent/model.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_report_and_exit_code_follows_claims() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, sweep_json(&model_json(8, 6, 0.3, 6.0), 1)).unwrap();
    let out_dir = dir.path().join("out");
    let out = adiabat()
        .arg("sweep")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .env("ADIABAT_THREADS", "1")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(out_dir.join("report.json").is_file());
    assert!(out_dir.join("norms.csv").is_file());
}

#[test]
fn bands_and_spectrum_print() {
    let model = configs().join("reference_model.json");
    let out = adiabat().arg("bands").arg(&model).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["delta"].as_f64().unwrap() > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("m.json");
    std::fs::write(&small, model_json(8, 6, 0.3, 0.0)).unwrap();
    let out = adiabat()
        .arg("spectrum")
        .arg(&small)
        .args(["--eps", "0.1", "--count", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 5);
}
