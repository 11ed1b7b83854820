use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn mbo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbo"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn small_config(n_steps: usize) -> Value {
    json!({
        "geometry": {"kind": "torus_grid", "size": 32},
        "scheme": {"h": (4.0f64 / 32.0).powi(2), "n_steps": n_steps},
        "seed": {"phases": 3, "shapes": [
            {"type": "disk", "center": [0.3, 0.5], "radius": 0.15, "phase": 1},
            {"type": "disk", "center": [0.7, 0.5], "radius": 0.2, "phase": 2}
        ]},
        "output": {"snapshot_every": 2, "formats": ["pgm", "mbof"]}
    })
}

fn write_config(dir: &Path, config: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_ledger_snapshots_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(5));
    let out = dir.path().join("run");
    let result = mbo(&["run", &config], &out);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let ledger = std::fs::read_to_string(out.join("ledger.ndjson")).unwrap();
    assert_eq!(ledger.lines().count(), 5);
    for step in [0, 2, 4, 5] {
        assert!(out.join(format!("snapshots/step_{step:06}.pgm")).exists());
        assert!(out.join(format!("snapshots/step_{step:06}.mbof")).exists());
    }
    assert!(!out.join("snapshots/step_000003.pgm").exists());
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["dissipation_passed"], true);
    assert!(summary["max_volume_deviation"].as_f64().unwrap() <= 1.0 / 1024.0);
    assert!(summary["multiplier_statistic"].is_number());
    let errors = summary["oracle"]["perimeter_proxy_error"].as_array().unwrap();
    assert!(errors.iter().all(|e| e.as_f64().unwrap() < 0.3));
}

#[test]
fn empty_target_volume_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(3);
    config["seed"]["shapes"].as_array_mut().unwrap().pop();
    let config = write_config(dir.path(), &config);
    let result = mbo(&["run", &config], &dir.path().join("run"));
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("phase 2"));
}

#[test]
fn zero_steps_gives_empty_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(0));
    let out = dir.path().join("run");
    assert!(mbo(&["run", &config], &out).status.success());
    assert_eq!(std::fs::read_to_string(out.join("ledger.ndjson")).unwrap(), "");
}

#[test]
fn unknown_config_keys_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(1);
    config["scheme"]["dt"] = json!(0.1);
    let config = write_config(dir.path(), &config);
    assert_eq!(mbo(&["run", &config], &dir.path().join("run")).status.code(), Some(2));
}

#[test]
fn sweep_rejects_bad_step_lists() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(2));
    let out = dir.path().join("sweep");
    assert_eq!(mbo(&["sweep", &config, "--h="], &out).status.code(), Some(2));
    assert_eq!(mbo(&["sweep", &config], &out).status.code(), Some(2));
    let too_small = format!("{:e}", (1.0f64 / 32.0).powi(2));
    assert_eq!(mbo(&["sweep", &config, "--h", &too_small], &out).status.code(), Some(2));
}

#[test]
fn sweep_runs_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "geometry": {"kind": "torus_grid", "size": 64},
        "scheme": {"h": (8.0f64 / 64.0).powi(2), "n_steps": 2},
        "seed": {"phases": 2, "shapes": [{"type": "disk", "center": [0.5, 0.5], "radius": 0.25, "phase": 1}]}
    });
    let config = write_config(dir.path(), &config);
    let out = dir.path().join("sweep");
    let hs = [8.0f64, 6.0, 4.0].map(|k| format!("{:e}", (k / 64.0).powi(2))).join(",");
    let result = mbo(&["sweep", &config, "--h", &hs], &out);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let summary = read_json(&out.join("sweep_summary.json"));
    let levels = summary["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    for level in levels {
        let d = Path::new(level["directory"].as_str().unwrap());
        assert!(d.join("ledger.ndjson").exists());
        assert!(level["summary"]["oracle"]["radius_error"].as_f64().unwrap() < 0.05);
    }
    assert_eq!(summary["perimeter_proxy_error_decreasing"], true);
}

#[test]
fn verify_constants_passes_and_unknown_suite_fails() {
    let dir = tempfile::tempdir().unwrap();
    let result = mbo(&["verify", "constants"], dir.path());
    assert_eq!(result.status.code(), Some(0));
    let lines = std::fs::read_to_string(dir.path().join("verify.ndjson")).unwrap();
    assert!(lines.lines().count() >= 1);
    assert!(String::from_utf8_lossy(&result.stdout).starts_with("PASS"));
    assert_eq!(mbo(&["verify", "nonsense"], dir.path()).status.code(), Some(2));
}
