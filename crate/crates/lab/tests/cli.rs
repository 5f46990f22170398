use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).current_dir(dir).output().unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    let text = format!(r#"{{"N": 8, "M_t": 32, "eps_list": [0.5, 0.05], "samples": {{"sobolev_constant": 10}}{extra}}}"#);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_in(dir: &Path, sub: &str, extra: &str) -> Output {
    let config = small_config(dir, extra);
    lab(&[sub, "--config", &config, "--out", "out"], dir)
}

#[test]
fn solve_cylinder_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "solve-cylinder", "");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/solve_cylinder.json")).unwrap()).unwrap();
    assert!(json["residual"].as_f64().unwrap() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("out/cylinder.csv")).unwrap();
    assert!(csv.starts_with("mode,t,re,im\n"));
    // 17 modes × 33 nodes plus the header.
    assert_eq!(csv.lines().count(), 17 * 33 + 1);
}

#[test]
fn flow_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "flow", r#", "flow": {"T": 0.2}"#);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/flow.json")).unwrap()).unwrap();
    let actions = json["actions"].as_array().unwrap();
    assert!(actions.last().unwrap().as_f64().unwrap() >= actions[0].as_f64().unwrap());
    assert!(std::fs::read_to_string(dir.path().join("out/flow.csv")).unwrap().starts_with("t,action,cumulative_energy,norm\n"));
}

#[test]
fn find_orbit_reaches_the_winding_one_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "find-orbit", r#", "find_orbit": {"alpha": 1.45}"#);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/orbit.json")).unwrap()).unwrap();
    assert_eq!(json["winding"], 1);
    assert!((json["radius"].as_f64().unwrap() - 1.4261654410).abs() < 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("out/orbit.csv")).unwrap();
    assert!(csv.starts_with("mode,re,im\n"));
}

#[test]
fn scan_alpha_and_check_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#", "scan_alpha": {"alphas": [0.5, 1.0, 1.45, 3.0]}"#;
    let out = run_in(dir.path(), "scan-alpha", extra);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/scan_alpha.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let out = run_in(dir.path(), "check-cycles", extra);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("out/check_cycles.json").exists());
}

#[test]
fn verify_single_suite_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), "");
    let out = lab(&["verify", "--suite", "norms", "--config", &config, "--out", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report-norms.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "norms");
    assert_eq!(report["passed"], true);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"N": 8, "unknown": 1}"#).unwrap();
    let out = lab(&["flow", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&bad, r#"{"M_t": 2}"#).unwrap();
    let out = lab(&["flow", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = lab(&["flow", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = lab(&["no-such-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
