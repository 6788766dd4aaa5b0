use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatctl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn heatctl")
}

fn summary(out: &Path) -> serde_json::Value {
    let text = fs::read_to_string(out.join("summary.json")).expect("summary.json");
    serde_json::from_str(&text).expect("valid json")
}

#[test]
fn control_full_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatctl(&["control-full"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path());
    let residual = s["full_control"]["terminal_residual"].as_f64().unwrap();
    assert!(residual < 1e-8, "residual {residual}");
    assert_eq!(s["full_control"]["variant"], "all_integers");
    for name in ["fields.csv", "trajectory.csv", "coefficients.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn dyadic_flag_reaches_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatctl(&["control-full", "--variant", "dyadic"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path());
    assert_eq!(s["full_control"]["variant"], "dyadic_as_printed");
    assert_eq!(s["full_control"]["variant_consistent"], false);
    assert!(s["full_control"]["terminal_residual"].as_f64().unwrap() > 0.05);
}

#[test]
fn missing_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"problem": {"seed": 3}}"#).unwrap();
    let out = heatctl(
        &["control-full", "--config", config.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("problem.horizon"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatctl(&["flow", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatctl(&["verify"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    let passed = stdout.lines().filter(|l| l.starts_with("PASS")).count();
    assert!(passed >= 40, "{passed} checks passed");
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL")), "{stdout}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = heatctl(&["control-full", "--seed", "7"], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn every_command_writes_a_summary() {
    for cmd in ["kernel", "flow", "control-sub", "invert"] {
        let dir = tempfile::tempdir().unwrap();
        let out = heatctl(&[cmd, "--modes", "16", "--grid", "128"], dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(summary(dir.path())["command"], cmd);
    }
}
