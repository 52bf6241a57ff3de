//! End-to-end runs of the `dpplab` binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpplab"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dpplab-e2e-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn identity_suite_passes_with_defaults() {
    let d = scratch("id");
    let out = bin().args(["identity-suite", "--out"]).arg(d.join("id")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("id_summary.json")).unwrap()).unwrap();
    let checks = json["checks"].as_array().unwrap();
    assert!(checks.len() >= 12);
    assert!(checks.iter().all(|c| c["pass"] == true));
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn duality_check_from_flags() {
    let d = scratch("du");
    let out = bin()
        .args(["duality-check", "--N", "8", "--r", "0.0", "--replicas", "20000", "--seed", "7", "--out"])
        .arg(d.join("du"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(d.join("du_plot.csv")).unwrap();
    assert!(csv.starts_with("series,x,y,yerr\n"));
    // same seed, same bytes
    let again = bin()
        .args(["duality-check", "--N", "8", "--r", "0.0", "--replicas", "20000", "--seed", "7", "--threads", "1", "--out"])
        .arg(d.join("du2"))
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(d.join("du_law.csv")).unwrap(), std::fs::read(d.join("du2_law.csv")).unwrap());
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn config_file_and_errors() {
    let d = scratch("cfg");
    std::fs::create_dir_all(&d).unwrap();
    let good = d.join("good.json");
    std::fs::write(&good, r#"{"command": "kernel-table", "out": "unused", "params": {"family": "root-b", "N": 4, "points": 9}}"#).unwrap();
    let out = bin().arg("kernel-table").arg("--config").arg(&good).arg("--out").arg(d.join("kt")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(d.join("kt_kernel.csv").exists());

    let bad = d.join("bad.json");
    std::fs::write(&bad, r#"{"params": {"family": "hermite", "N": "eight"}}"#).unwrap();
    let out = bin().arg("kernel-table").arg("--config").arg(&bad).arg("--out").arg(d.join("bad")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("bad_summary.json").exists());

    let out = bin().args(["gas-simulate", "--model", "dyson", "--initial", "1,0", "--seed", "1", "--out"]).arg(d.join("gs")).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "unordered initial points are a config error");
    assert!(std::fs::read_dir(&d).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with("gs")));

    let out = bin().args(["relaxation", "--out"]).arg(d.join("rx")).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "missing seed");
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn check_failure_exits_one() {
    let d = scratch("fail");
    // an absurdly tight tolerance must fail the check but still write artifacts
    let out = bin()
        .args(["duality-check", "--N", "4", "--r", "0.5", "--replicas", "2000", "--tolerance", "1e-9", "--seed", "3", "--out"])
        .arg(d.join("f"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(d.join("f_summary.json").exists());
    std::fs::remove_dir_all(d).unwrap();
}
