use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lagrange_sync::dynamics::{LagrangianModel, TwoLinkArm};
use nalgebra::{DVector, SymmetricEigen};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lagsync"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn lagsync(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to start lagsync")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn summary_field(path: &Path, field: &str) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == field).unwrap();
    row[i].parse().unwrap()
}

#[test]
fn minimal_two_robot_config_writes_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagsync(&[
        "simulate",
        "--config",
        config("two_arms.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "t,robot,q1,q2,qd1,qd2,s1,s2,tau1,tau2");
    // 10 s logged every 10 steps of 1 ms, two robots per sample.
    assert_eq!(log.lines().count(), 1 + 2 * 1001);
    assert!(dir.path().join("summary.csv").exists());

    // Rest reference (0.3, -0.2) with Lambda = 2: s = qdot + 2 (q - q_rest).
    let rest = [0.3, -0.2];
    for line in log.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        for j in 0..2 {
            let s = v[2 + 2 + j] + 2.0 * (v[2 + j] - rest[j]);
            assert!((v[6 + j] - s).abs() < 1e-9, "{line}");
        }
    }
}

#[test]
fn adaptive_log_carries_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagsync(&[
        "simulate",
        "--preset",
        "fig6a",
        "--t-final",
        "0.1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(
        log.lines().next().unwrap(),
        "t,robot,q1,q2,qd1,qd2,s1,s2,tau1,tau2,ahat1,ahat2,ahat3,ahat4"
    );
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = lagsync(&[
            "simulate",
            "--config",
            config("two_arms.toml").to_str().unwrap(),
            "--seed",
            "11",
            "--t-final",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    for f in ["log.csv", "summary.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn sweep_writes_one_log_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagsync(&[
        "simulate",
        "--config",
        config("two_arms.toml").to_str().unwrap(),
        "--seed",
        "3",
        "--t-final",
        "1",
        "--sweep",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    for seed in 3..6 {
        assert!(dir.path().join(format!("log_seed{seed}.csv")).exists());
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

/// Extreme eigenvalues of the arm's inertia over its configuration space.
fn arm_inertia_bounds() -> (f64, f64) {
    let model = LagrangianModel::two_link_arm(TwoLinkArm::default());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..=720 {
        let q2 = -std::f64::consts::PI + k as f64 * std::f64::consts::PI / 360.0;
        let m = model.mass_matrix(&DVector::from_row_slice(&[0.0, q2])).unwrap();
        for e in SymmetricEigen::new(m).eigenvalues.iter() {
            lo = lo.min(*e);
            hi = hi.max(*e);
        }
    }
    (lo, hi)
}

#[test]
fn sinusoidal_disturbance_leaves_bounded_disagreement() {
    let amplitude = 0.1;
    let dir = tempfile::tempdir().unwrap();
    let out = lagsync(&[
        "simulate",
        "--config",
        config("two_arms.toml").to_str().unwrap(),
        "--t-final",
        "30",
        "--disturbance",
        "sinusoid:0.1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sync = summary_field(&dir.path().join("summary.csv"), "final_sync_err");

    // With exact feedforward the stacked composite variable obeys
    // [M] x' + [C] x + L x = d, so ||x|| settles below |d| kappa(M) / lmin(L)
    // and positions below that divided by Lambda. Here lmin(L) = K1 - K2.
    let (m_lo, m_hi) = arm_inertia_bounds();
    let d_norm = amplitude * (2.0f64 * 2.0).sqrt();
    let bound = d_norm * (m_hi / m_lo) / (5.0 - 2.0) / 2.0;
    assert!(sync < bound, "sync error {sync} above bound {bound}");
    assert!(sync > 1e-9, "disturbance had no effect: {sync}");
}

#[test]
fn schema_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(config("two_arms.toml")).unwrap().replace("K2 = 2.0", "K2 = \"two\"");
    fs::write(&bad, text).unwrap();
    for cmd in ["verify-gains", "simulate"] {
        let out = lagsync(&[cmd, "--config", bad.to_str().unwrap()]);
        assert_eq!(code(&out), 2, "{cmd}");
    }
    let missing = lagsync(&["simulate", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn verify_gains_reports_regimes() {
    let out = lagsync(&["verify-gains", "--preset", "fig4", "--expect", "stable"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("K1 - 2K2 = [1.000000, 1.000000, 1.000000] > 0: true"), "{text}");

    let out = lagsync(&["verify-gains", "--preset", "fig6b", "--expect", "indifferent"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("indifferent:   true"));

    let out = lagsync(&["verify-gains", "--preset", "fig6b", "--expect", "stable"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn decoupled_gains_report_d2_equal_to_k1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("decoupled.toml");
    let text = fs::read_to_string(config("two_arms.toml")).unwrap().replace("K2 = 2.0", "K2 = 0.0");
    fs::write(&cfg, text).unwrap();
    let out = lagsync(&["verify-gains", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("D2 spectrum:   [5.000000, 5.000000]"));
}

#[test]
fn blow_up_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stiff.toml");
    let text = fs::read_to_string(config("two_arms.toml"))
        .unwrap()
        .replace("dt = 1e-3", "dt = 0.1")
        .replace("K1 = 5.0", "K1 = 5000.0")
        .replace("Lambda = 2.0", "Lambda = 200.0");
    fs::write(&cfg, text).unwrap();
    let out = lagsync(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("last good time"));
}

#[test]
fn failed_criteria_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagsync(&["reproduce", "--preset", "fig4", "--t-final", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("final_sync_err"));
    assert!(dir.path().join("fig4/report.txt").exists());
}

#[test]
fn reproduce_fig6a_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagsync(&["reproduce", "--preset", "fig6a", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn failing_sync_condition_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("weak.toml");
    // A negative K2 leaves L + U indefinite on a two-robot ring.
    let text = fs::read_to_string(config("two_arms.toml")).unwrap().replace("K2 = 2.0", "K2 = -6.0");
    fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("o");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--t-final", "0.5", "--out", out_dir.to_str().unwrap()];
    let out = lagsync(&args);
    assert_eq!(code(&out), 1);
    assert!(!out_dir.exists());
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&lagsync(&forced)), 0);
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("plan");
    let out = lagsync(&[
        "simulate",
        "--config",
        config("two_arms.toml").to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
        "--dry-run",
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("log.csv"));
    assert!(!target.exists());
}
