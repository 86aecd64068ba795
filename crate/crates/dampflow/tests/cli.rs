//! End-to-end tests of the `dampflow` binary: file emission, determinism,
//! exit codes and the validate report contract.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dampflow"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg("--output-dir").arg(dir).args(args);
    cmd.output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|_| panic!("missing {name}"))
}

type SignalRows = Vec<(f64, f64, f64)>;

fn parse_signal_csv(text: &str) -> (SignalRows, (f64, f64)) {
    let mut rows = Vec::new();
    let mut delta = (0.0, 0.0);
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# delta_weight=") {
            let p: Vec<f64> = rest.split(',').map(|v| v.parse().unwrap()).collect();
            delta = (p[0], p[1]);
        } else if !line.starts_with('t') && !line.is_empty() {
            let p: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            rows.push((p[0], p[1], p[2]));
        }
    }
    (rows, delta)
}

#[test]
fn convert_ex4_to_redfield_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--model", "ex4", "--x", "0.5,0.5,0", "--n-steps", "1000", "convert", "--from", "tcl", "--to", "red"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // channel 2 is the σz channel: m^Red = 2(x₃ − 1)e^{−2x₃t} = −2
    let (rows, _) = parse_signal_csv(&read(dir.path(), "red_channel2.csv"));
    assert_eq!(rows.len(), 1001);
    for (t, re, im) in rows {
        assert!((re + 2.0).abs() < 1e-6, "m_red(z) at t={t}: {re}");
        assert!(im.abs() < 1e-12);
    }
    // channel 0 (σx): m^Red = 2(x₁−1)e^{−2x₁t} = −e^{−t}
    let (rows, _) = parse_signal_csv(&read(dir.path(), "red_channel0.csv"));
    for (t, re, _) in rows {
        assert!((re + (-t).exp()).abs() < 1e-6, "m_red(x) at t={t}: {re}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "convergence_report.json")).unwrap();
    assert!(report["max_abs_diff"].as_f64().unwrap() < 1e-5);
}

#[test]
fn convert_ex3_to_kernel_is_a_pure_delta_proportional_to_l() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--model", "ex3", "--n-steps", "2000", "convert", "--from", "tcl", "--to", "nz"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // coherence channels: delta weight = m^TCL(0) = −1, tiny regular part;
    // the two channels are identical (same L eigenvalue), σz and identity
    // channels vanish
    let (rows0, delta0) = parse_signal_csv(&read(dir.path(), "nz_channel0.csv"));
    let (rows1, delta1) = parse_signal_csv(&read(dir.path(), "nz_channel1.csv"));
    assert!((delta0.0 + 1.0).abs() < 1e-12);
    assert_eq!(delta0, delta1);
    for ((_, re0, _), (_, re1, _)) in rows0.iter().zip(rows1.iter()) {
        assert!(re0.abs() < 1e-6, "regular part should vanish, got {re0}");
        assert_eq!(re0, re1, "the two coherence channels must match exactly");
    }
    let (_, delta2) = parse_signal_csv(&read(dir.path(), "nz_channel2.csv"));
    assert_eq!(delta2, (0.0, 0.0));
}

#[test]
fn convert_pure_delta_kernel_back_to_constant_tcl() {
    let dir = tempfile::tempdir().unwrap();
    // barred model with φ = e^{−t}: kernel is exactly −2δ(t) on the
    // coherence channels, so the TCL is the constant −2
    let out = run_in(
        dir.path(),
        &["--model", "ex3bar", "--phi-profile", "exp", "--n-steps", "800", "convert", "--from", "nz", "--to", "tcl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (rows, delta) = parse_signal_csv(&read(dir.path(), "tcl_channel0.csv"));
    assert_eq!(delta, (0.0, 0.0));
    for (t, re, _) in rows {
        assert!((re + 2.0).abs() < 1e-8, "constant TCL at t={t}: {re}");
    }
}

#[test]
fn convert_reports_singular_maps_as_numerical_errors() {
    let dir = tempfile::tempdir().unwrap();
    // the σ± kernel's map eigenvalue crosses zero near t ≈ 1.46, so the TCL
    // description does not exist on [0, 5]
    let out = run_in(
        dir.path(),
        &["--model", "ex2", "convert", "--from", "nz", "--to", "tcl"],
    );
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("machine-readable error JSON");
    assert_eq!(err["error"]["kind"], "singular_map");
}

#[test]
fn unknown_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--model", "ex9", "propagate", "--kind", "tcl"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "unknown_model");
}

#[test]
fn scan_at_resolution_2_is_deterministic() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    for dir in [dir1.path(), dir2.path()] {
        let out = run_in(
            dir,
            &["--n-steps", "500", "scan", "--resolution", "2", "--times", "0,1,20"],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = read(dir1.path(), "region.csv");
    let b = read(dir2.path(), "region.csv");
    assert_eq!(a, b, "region CSV must be byte-identical across runs");
    assert_eq!(read(dir1.path(), "scan_summary.json"), read(dir2.path(), "scan_summary.json"));
    // resolution 2 has exactly 6 simplex points, each appearing per time
    assert_eq!(a.lines().filter(|l| !l.starts_with('x')).count(), 6 * 3);
    // t = 0 rows all flagged CP in both panels
    for line in a.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[3].parse::<f64>().unwrap() == 0.0 {
            assert_eq!(&f[4..8], &["1", "1", "1", "1"]);
        }
    }
}

#[test]
fn propagate_writes_trajectory_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--model", "ex1", "--n-steps", "400", "--snapshots", "1.0,5.0", "propagate", "--kind", "tcl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = read(dir.path(), "trajectory.csv");
    assert!(traj.starts_with("t,lambda0_re,lambda0_im"));
    assert_eq!(traj.lines().count(), 402);
    let map: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "map_t1p000000.json")).unwrap();
    assert_eq!(map["dim"], 2);
    assert_eq!(map["matrix"].as_array().unwrap().len(), 16);

    // identity-channel eigenvalue stays 1 (trace preservation)
    for line in traj.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        // channel 0 of the amplitude-damping damping basis decays from 1
        assert!(f[1] <= 1.0 + 1e-9);
    }
}

#[test]
fn lindblad_rates_csv_matches_the_known_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--model", "ex1", "--n-steps", "200", "--snapshots", "2.0", "lindblad", "--kind", "tcl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rates = read(dir.path(), "rates.csv");
    assert!(rates.starts_with("t,r1,r2,r3"));
    for line in rates.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let gamma = 1.0 - (-f[0]).exp();
        assert!((f[1] - gamma).abs() < 1e-10, "top rate at t={} is {}", f[0], f[1]);
        assert!(f[2].abs() < 1e-10 && f[3].abs() < 1e-10);
    }
    let snap: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "lindblad_t2p000000.json")).unwrap();
    assert_eq!(snap["rates"].as_array().unwrap().len(), 3);
    assert_eq!(snap["lindblad_ops"][0]["dim"], 2);
}

#[test]
fn divisibility_report_for_the_eternal_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--model", "ex4", "--x", "0.5,0.5,0", "--n-steps", "500", "divisibility", "--kind", "tcl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "divisibility.json")).unwrap();
    assert!(rep["cp_divisible_until"].as_f64().unwrap() <= 0.01 + 1e-12);
    assert_eq!(rep["p_divisible_until"].as_f64().unwrap(), 5.0);

    // the Redfield side stays P-divisible too, and loses CP immediately as well
    let out = run_in(
        dir.path(),
        &["--model", "ex4", "--x", "0.5,0.5,0", "--n-steps", "500", "divisibility", "--kind", "red"],
    );
    assert!(out.status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "divisibility.json")).unwrap();
    assert_eq!(rep["p_divisible_until"].as_f64().unwrap(), 5.0);
}

#[test]
fn validate_passes_by_default_and_fails_with_injected_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--n-steps", "1000", "validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "validate_report.json")).unwrap();
    assert_eq!(rep["all_pass"], true);
    assert!(rep["checks"].as_array().unwrap().len() >= 20);

    // injected absurd tolerance: controlled failures, not panics
    let out = run_in(dir.path(), &["--n-steps", "1000", "--tol-override", "1e-30", "validate"]);
    assert_eq!(out.status.code(), Some(1));
    let rep: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "validate_report.json")).unwrap();
    assert_eq!(rep["all_pass"], false);
    assert!(!rep["failing"].as_array().unwrap().is_empty());
}

#[test]
fn validate_residuals_shrink_under_dt_halving() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let out = run_in(dir1.path(), &["--n-steps", "500", "validate"]);
    assert!(out.status.success());
    let out = run_in(dir2.path(), &["--n-steps", "1000", "validate"]);
    assert!(out.status.success());
    let coarse: serde_json::Value =
        serde_json::from_str(&read(dir1.path(), "validate_report.json")).unwrap();
    let fine: serde_json::Value =
        serde_json::from_str(&read(dir2.path(), "validate_report.json")).unwrap();
    for (c, f) in coarse["checks"]
        .as_array()
        .unwrap()
        .iter()
        .zip(fine["checks"].as_array().unwrap().iter())
    {
        assert_eq!(c["name"], f["name"]);
        if c["dt2_scaling"] == true {
            let rc = c["residual"].as_f64().unwrap();
            let rf = f["residual"].as_f64().unwrap();
            assert!(
                rf <= rc / 3.0,
                "{}: residual {rc:.3e} -> {rf:.3e} shrank less than 3x",
                c["name"]
            );
        }
    }
}

#[test]
fn print_config_emits_the_effective_configuration() {
    let out = bin()
        .args(["--print-config", "--model", "ex3", "--n-steps", "123", "validate"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["model"], "ex3");
    assert_eq!(cfg["n_steps"], 123);
    assert_eq!(cfg["t_end"], 5.0);
}

#[test]
fn config_file_fields_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{ "model": "ex1", "n_steps": 250, "t_end": 2.0 }"#).unwrap();
    let out = bin()
        .args(["--config", cfg_path.to_str().unwrap(), "--print-config", "--n-steps", "300", "validate"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["model"], "ex1");
    assert_eq!(cfg["n_steps"], 300);
    assert_eq!(cfg["t_end"], 2.0);
}

#[test]
fn output_dir_env_variable_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("DAMPFLOW_OUTPUT_DIR", dir.path())
        .args(["--model", "ex3", "--n-steps", "100", "lindblad", "--kind", "tcl"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("rates.csv").exists());
}
