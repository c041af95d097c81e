use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cns(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cns"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

const SMALL_NONLINEAR: &str = "grid.N = 16\ngrid.L = 8\nt_end = 0.3\ndt = 0.1\nsample.count = 4\ninit.k = 3\n";

#[test]
fn linear_decay_default_passes() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["linear-decay"], "");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let slopes = read(tmp.path(), "slopes.json");
    for (k, line) in slopes.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let slope = v["slope"].as_f64().unwrap();
        assert!((slope + 0.75 + k as f64 / 2.0).abs() < 0.05, "k={k} slope={slope}");
    }
    assert!(tmp.path().join("out/decay.csv").exists());
    assert!(tmp.path().join("out/manifest.json").exists());
}

#[test]
fn zero_profile_is_degenerate() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["linear-decay"], "linear.profile = zero\n");
    assert_eq!(code(&out), 3);
    let csv = read(tmp.path(), "decay.csv");
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|x| x.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn zero_tolerance_fails_gate() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["linear-decay", "--tolerance", "0"], "");
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_key_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["linear-decay"], "viscosity = 2\n");
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("viscosity"));
}

#[test]
fn zero_amplitude_trajectories_vanish() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["nonlinear"], &format!("{SMALL_NONLINEAR}init.amplitude = 0\n"));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let full = read(tmp.path(), "trajectory.csv");
    assert_eq!(full, read(tmp.path(), "linear_trajectory.csv"));
    for line in full.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|x| x.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn nonlinear_is_reproducible_per_seed() {
    let run = |seed: &str| {
        let tmp = TempDir::new().unwrap();
        let out = cns(tmp.path(), &["nonlinear", "--seed", seed], SMALL_NONLINEAR);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        read(tmp.path(), "trajectory.csv")
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
}

#[test]
fn deviation_scales_quadratically() {
    let dev = |amp: &str| {
        let tmp = TempDir::new().unwrap();
        let out = cns(tmp.path(), &["nonlinear"], &format!("{SMALL_NONLINEAR}init.amplitude = {amp}\n"));
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_str(&read(tmp.path(), "deviation.json")).unwrap();
        v["max_abs_deviation"].as_f64().unwrap()
    };
    let ratio = dev("2e-3") / dev("1e-3");
    assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn check_battery_passes_and_detects_fault() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["check"], "check.trials = 5\n");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read(tmp.path(), "report.jsonl");
    let gn: Vec<serde_json::Value> = report
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["check"] == "gn_exponent")
        .collect();
    assert_eq!(gn[0]["ratio_or_value"].as_f64(), Some(0.5));

    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["check"], "check.trials = 5\ncheck.fault = hermitian\n");
    assert_eq!(code(&out), 1);
    let report = read(tmp.path(), "report.jsonl");
    assert!(report.lines().any(|l| l.contains("hermitian_symmetry") && l.contains("\"pass\":false")));
}

#[test]
fn stationary_writes_field() {
    let tmp = TempDir::new().unwrap();
    let out = cns(tmp.path(), &["stationary"], "grid.N = 16\n");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["rho_star.bin", "stationary.json", "manifest.json"] {
        assert!(tmp.path().join("out").join(name).exists(), "{name}");
    }
}
