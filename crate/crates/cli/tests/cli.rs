//! End-to-end checks of the command-line driver: exit codes, output
//! artifacts and the determinism contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rollstab"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rollstab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn print_defaults_documents_every_key() {
    let out = bin().arg("print-defaults").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "q =", "d =", "gamma =", "eps =", "seed =", "l =", "n =", "dt =", "t_end =", "p =",
        "alpha =", "scheme =", "init =",
    ] {
        assert!(text.contains(key), "missing {key} in defaults");
    }
}

#[test]
fn spectrum_stable_outputs_and_determinism() {
    let d1 = tmp("spec1");
    let d2 = tmp("spec2");
    for d in [&d1, &d2] {
        let out = bin()
            .args([
                "spectrum", "--q", "0.3", "--D", "1", "--gamma", "0.5", "--out",
            ])
            .arg(d)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in [
        "report.json",
        "curves.csv",
        "resolved.conf",
        "manifest.json",
    ] {
        assert_eq!(read(&d1, f), read(&d2, f), "{f} differs between runs");
    }
    let report: serde_json::Value = serde_json::from_slice(&read(&d1, "report.json")).unwrap();
    assert_eq!(report["stability"]["verdict"]["verdict"], "Stable");
    assert!(report["projection_identity_residual"].as_f64().unwrap() < 1e-10);
    let csv = String::from_utf8(read(&d1, "curves.csv")).unwrap();
    assert!(csv.starts_with("k,re_lc_p,im_lc_p,re_lc_m,im_lc_m,re_ls,im_ls\n"));
}

#[test]
fn spectrum_reports_instability_reasons() {
    let d = tmp("spec-unstable");
    let out = bin()
        .args([
            "spectrum", "--q", "0.6", "--D", "1", "--gamma", "0", "--out",
        ])
        .arg(&d)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&read(&d, "report.json")).unwrap();
    assert_eq!(report["stability"]["verdict"]["verdict"], "Unstable");

    // Baseline parameters carry the double splitting curvature -1.
    let d = tmp("spec-baseline");
    let out = bin()
        .args(["spectrum", "--q", "0", "--D", "1", "--gamma", "0", "--out"])
        .arg(&d)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&read(&d, "report.json")).unwrap();
    assert!((report["lambda1"]["plus"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((report["lambda1"]["minus"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_two() {
    let d = tmp("bad");
    let out = bin()
        .args(["spectrum", "--N", "1000", "--out"]) // not a power of two
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["simulate", "--preset", "no-such-preset", "--out"])
        .arg(tmp("bad2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["toy", "--case", "zzz", "--out"])
        .arg(tmp("bad3"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_artifacts_and_is_deterministic() {
    let d1 = tmp("sim1");
    let d2 = tmp("sim2");
    for d in [&d1, &d2] {
        let out = bin()
            .args([
                "simulate",
                "--q",
                "0.3",
                "--D",
                "1",
                "--gamma",
                "0.5",
                "--N",
                "256",
                "--L",
                "62.83185307179586",
                "--T",
                "2",
                "--dt",
                "0.01",
                "--eps",
                "0.05",
                "--seed",
                "7",
                "--out",
            ])
            .arg(d)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in [
        "norms.csv",
        "fits.json",
        "init_meta.json",
        "resolved.conf",
        "manifest.json",
    ] {
        assert_eq!(
            read(&d1, f),
            read(&d2, f),
            "{f} differs between seeded reruns"
        );
    }
    let norms = String::from_utf8(read(&d1, "norms.csv")).unwrap();
    assert!(norms.starts_with("t,norm_id,value\n"));
    assert!(norms.contains(",r_inf,"));
    assert!(norms.contains(",v_inf,"));
}

#[test]
fn simulate_snapshots_with_manifest() {
    let d = tmp("snap");
    std::fs::create_dir_all(&d).unwrap();
    let cfgfile = d.join("with_snaps.conf");
    std::fs::write(&cfgfile, "snapshot_every = 1\nlog_every = 20\n").unwrap();
    let out = bin()
        .args([
            "simulate",
            "--N",
            "128",
            "--L",
            "62.83185307179586",
            "--T",
            "1",
            "--dt",
            "0.01",
            "--eps",
            "0.02",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&d)
        .arg("--config")
        .arg(&cfgfile)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value = serde_json::from_slice(&read(&d, "snapshots.json")).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let name = f.as_str().unwrap();
        assert!(d.join(name).exists(), "missing snapshot file {name}");
    }
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn sideband_mode_outside_band_is_usage_error() {
    let d = tmp("sideband-bad");
    std::fs::create_dir_all(&d).unwrap();
    let cfgfile = d.join("sideband.conf");
    // Mode 100 exceeds N/3 for N = 128.
    std::fs::write(&cfgfile, "init = sideband\nsideband_mode = 100\n").unwrap();
    let out = bin()
        .args([
            "simulate",
            "--N",
            "128",
            "--L",
            "62.83185307179586",
            "--T",
            "1",
            "--dt",
            "0.01",
            "--eps",
            "0.001",
            "--out",
        ])
        .arg(&d)
        .arg("--config")
        .arg(&cfgfile)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_all_symbol_subset_passes() {
    let d = tmp("verify-symbol");
    let out = bin()
        .args(["verify-all", "--only", "symbol", "--out"])
        .arg(&d)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&read(&d, "summary.json")).unwrap();
    let results = summary.as_array().unwrap();
    assert_eq!(results.len(), 3);
    assert!(results.iter().all(|r| r["pass"].as_bool().unwrap()));

    // Selecting criteria by number also works.
    let d = tmp("verify-nums");
    let out = bin()
        .args(["verify-all", "--only", "2,3", "--out"])
        .arg(&d)
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&read(&d, "summary.json")).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}

#[test]
fn kernel_certificates_pass_and_table_written() {
    let d = tmp("kernel");
    let out = bin()
        .args([
            "kernel", "--q", "0.3", "--D", "1", "--gamma", "0.5", "--T", "40", "--out",
        ])
        .arg(&d)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&d, "certificates.json")).unwrap();
    assert_eq!(summary["all_pass"], true);
    assert!(summary["certificates"].as_array().unwrap().len() >= 11);
    let table = String::from_utf8(read(&d, "kernel_table.csv")).unwrap();
    assert!(table.starts_with("z,t,component,i,j,value\n"));
    assert!(table.contains(",c,") && table.contains(",e,"));

    // Unstable parameters are rejected up front.
    let out = bin()
        .args(["kernel", "--q", "0.6", "--out"])
        .arg(tmp("kernel-bad"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_lists_checksummed_artifacts() {
    let d = tmp("manifest");
    let out = bin()
        .args(["spectrum", "--q", "0.2", "--out"])
        .arg(&d)
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_slice(&read(&d, "manifest.json")).unwrap();
    let entries = manifest.as_array().unwrap();
    assert!(entries.iter().any(|e| e["file"] == "report.json"));
    for e in entries {
        assert_eq!(e["fnv1a64"].as_str().unwrap().len(), 16);
    }
}

#[test]
fn divergent_simulation_exits_three() {
    let d = tmp("diverge");
    // A huge perturbation drives the exponential nonlinearity to overflow
    // within a few steps.
    let out = bin()
        .args([
            "simulate", "--N", "128", "--L", "62.83185307179586", "--T", "2", "--dt", "0.05",
            "--eps", "80", "--seed", "1", "--out",
        ])
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
}
