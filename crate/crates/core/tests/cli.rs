use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rydconv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydconv")).args(args).current_dir(cwd).output().unwrap()
}

#[test]
fn validate_default_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "").unwrap();
    let o = rydconv(&["validate", "s.toml"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["warnings"].as_array().unwrap().len(), 0);
}

#[test]
fn validate_flags_guard_and_waiver() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[physics]\ndelta_intermediate_hz = 200e3\n").unwrap();
    let o = rydconv(&["validate", "s.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("intermediate detuning"));
    let o = rydconv(&["validate", "s.toml", "--allow-warnings"], dir.path());
    assert!(o.status.success());
}

#[test]
fn unknown_key_fails_with_name() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[pulse]\nomega_0_hz = 1\n").unwrap();
    let o = rydconv(&["validate", "s.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("omega_0_hz") && err.contains("line 2"), "{err}");
}

#[test]
fn run_then_fit_exported_map() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "experiment = \"angular_map\"\nseeds = [4]\noutput_dir = \"out\"\n[cloud]\nn_atoms = 400\n[grid]\ntime_points = 256\n";
    fs::write(dir.path().join("s.toml"), cfg).unwrap();
    let o = rydconv(&["run", "s.toml", "--angular-points", "41x31", "--allow-warnings"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "angular_map");
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    let tx = summary["runs"][0]["theta_x0_pi"].as_f64().unwrap();

    let o = rydconv(&["fit-map", "out/seed_4/angular_map.txt"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let refit = fit["theta_x0"].as_f64().unwrap() / std::f64::consts::PI;
    assert!((refit - tx).abs() < 1e-6 * tx.abs().max(1e-3), "{refit} vs {tx}");
}

#[test]
fn seed_override_and_export_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydconv(&["export-cloud", "--seed", "5", "--out", "cloud.txt"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("cloud.txt")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count();
    assert_eq!(rows, 15_000);
    let again = rydconv(&["export-cloud", "--seed", "5", "--out", "again.txt"], dir.path());
    assert!(again.status.success());
    assert_eq!(text, fs::read_to_string(dir.path().join("again.txt")).unwrap());
}
