//! Exit-code and output contracts of the `ttsa` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GOOD_CONFIG: &str = r#"
[problem]
kind = "polyak"
matrix = [[0.5]]
offset = [0.5]

[problem.noise_fast]
kind = "additive_gaussian"
covariance_scale = 0.5

[problem.noise_slow]
kind = "additive_gaussian"
covariance_scale = 0.5

[schedule]
regime = "both_one_over_k"
alpha = 2320.0
beta = 4.0
offset = 100.0

[run]
horizon = 500
trials = 8
log_points = 10
base_seed = 7
x0 = [0.5]
y0 = [0.5]
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn ttsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttsa"))
        .args(args)
        .env("TTSA_THREADS", "2")
        .output()
        .unwrap()
}

#[test]
fn run_writes_expected_files_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GOOD_CONFIG);
    let out_dir = dir.path().join("out");
    let out = ttsa(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let ensemble = std::fs::read_to_string(out_dir.join("ensemble.csv")).unwrap();
    assert!(ensemble.starts_with("k,err_xy,err_x,err_z,normU2,"));
    let trajectory = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("k,err_xy,err_x,err_z,normU2\n"));
    for name in ["constants.txt", "manifest.txt", "rate_fit.txt", "bounds.txt"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("base_seed = 7"));
    assert!(manifest.contains("C1 = "));
    assert!(manifest.contains("K1 = 4640"));
}

#[test]
fn inadmissible_beta_exits_one_and_cites_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &GOOD_CONFIG.replace("beta = 4.0", "beta = 1.0"));
    let out = ttsa(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta >= 2/(1-mu)"), "{err}");
}

#[test]
fn missing_config_exits_one() {
    let out = ttsa(&["run", "/nonexistent/exp.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numeric_blowup_exits_two() {
    // Huge multiplicative noise overwhelms the relaxed-offset step sizes.
    let blowup = r#"
[problem]
kind = "linear_ttsa"
a11 = [[1.0]]
a12 = [[0.1]]
a21 = [[0.1]]
a22 = [[1.0]]
b1 = [1.0]
b2 = [0.0]
zeta = 0.8
noise_sigma = 1e8

[schedule]
regime = "both_one_over_k"
alpha = 100.0
beta = 4.0

[run]
horizon = 500
trials = 4
log_points = 8
base_seed = 7
x0 = [1.0]
y0 = [1.0]
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), blowup);
    let out = ttsa(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("trial"));
}

#[test]
fn failing_check_exits_three() {
    let with_check = format!(
        "{GOOD_CONFIG}\n[check]\nseries = \"err_xy\"\nslope_min = -2.0\nslope_max = 0.0\nfit_lo = 10\nfit_hi = 500\n"
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &with_check);
    let out = ttsa(&[
        "run",
        cfg.to_str().unwrap(),
        "--check",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    // passing range on the same run exits zero
    let with_check = format!(
        "{GOOD_CONFIG}\n[check]\nseries = \"err_xy\"\nslope_min = -1.0\nslope_max = 2.0\nfit_lo = 10\nfit_hi = 500\n"
    );
    let cfg = write_config(dir.path(), &with_check);
    let out = ttsa(&[
        "run",
        cfg.to_str().unwrap(),
        "--check",
        "--out",
        dir.path().join("o2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GOOD_CONFIG);
    let o1 = dir.path().join("s1");
    let o2 = dir.path().join("s2");
    assert!(ttsa(&["run", cfg.to_str().unwrap(), "--out", o1.to_str().unwrap()])
        .status
        .success());
    assert!(ttsa(&[
        "run",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        o2.to_str().unwrap()
    ])
    .status
    .success());
    let a = std::fs::read(o1.join("ensemble.csv")).unwrap();
    let b = std::fs::read(o2.join("ensemble.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn constants_prints_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GOOD_CONFIG);
    let out = ttsa(&[
        "constants",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for key in ["C1 = ", "C2 = ", "C3 = ", "C4 = ", "Gamma2 = ", "S0 = ", "K1 = "] {
        assert!(stdout.contains(key), "missing {key} in:\n{stdout}");
    }
}

#[test]
fn oracles_report_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GOOD_CONFIG);
    let out = ttsa(&[
        "oracles",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.path().join("o").join("oracle_report.txt")).unwrap();
    assert!(report.contains("PASS: aux_lemma"));
    assert!(report.contains("PASS: xstar_lipschitz"));
    assert!(report.contains("PASS: noise_variance"));
    assert!(!report.lines().any(|l| l.starts_with("FAIL")));
}
