use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn conelab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conelab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CONELAB_OUT")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn embedding_suite_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = conelab(&["verify-embedding", "--n", "256", "--ic", "sin3", "--alpha", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path());
    assert_eq!(r["passed"], true);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(dir.path().join("series.csv").exists());
}

#[test]
fn mismatched_alpha_fails_the_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let out = conelab(&["verify-embedding", "--alpha", "1", "--T", "0.05"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["passed"], false);
    let unit = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "consistency_unit_cone").unwrap();
    assert!(unit["value"].as_f64().unwrap() > 1e-2);
    // The aperture-2 cone carries the alpha = 1 equation.
    let matched = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "consistency_matched_aperture").unwrap();
    assert_eq!(matched["passed"], true);
}

#[test]
fn tightened_tolerance_flips_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(conelab(&["verify-ch2-lift"], dir.path()).status.code(), Some(0));
    assert_eq!(conelab(&["verify-ch2-lift", "--tol-scale", "1e-6"], dir.path()).status.code(), Some(1));
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["ch-run", "--ic", "no-such-preset"][..],
        &["ch-run", "--dt", "-1"],
        &["ch-run", "--n", "100"],
        &["verify-embedding", "--radii", "1,-2"],
        &["curvature-scan", "--metric", "torus"],
    ] {
        let out = conelab(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["figure1", "--n", "128", "--dt", "2e-4", "--times", "0,0.5,1"];
    conelab(&args, a.path());
    conelab(&args, b.path());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn figure1_emits_scaled_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = conelab(&["figure1", "--p0", "1", "--q0", "1", "--radii", "1,2", "--times", "0,0.4,0.8,0.95"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    for t in ["0", "0.4", "0.8", "0.95"] {
        let read = |r: &str| -> Vec<(f64, f64)> {
            let mut rdr = csv::Reader::from_path(dir.path().join(format!("curve_{t}_{r}.csv"))).unwrap();
            rdr.records().map(|row| {
                let row = row.unwrap();
                (row[0].parse().unwrap(), row[1].parse().unwrap())
            }).collect()
        };
        let (one, two) = (read("1"), read("2"));
        assert_eq!(one.len(), two.len());
        for (p, q) in one.iter().zip(&two) {
            assert!((q.0 - 2.0 * p.0).abs() < 1e-12 && (q.1 - 2.0 * p.1).abs() < 1e-12);
        }
    }
    let svg = fs::read_to_string(dir.path().join("figure1.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 8);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n": 64, "T": 0.2, "alpha": 0.5, "tol-scale": 2.0}"#).unwrap();
    let out = conelab(&["ch-run", "--config", cfg.to_str().unwrap(), "--n", "128"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["config"]["n"], 128);
    assert_eq!(r["config"]["T"], 0.2);
    assert_eq!(r["config"]["tol_scale"], 2.0);

    fs::write(&cfg, r#"{"grid": 64}"#).unwrap();
    assert_eq!(conelab(&["ch-run", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_conelab"))
        .args(["peakon-run", "--T", "0.1"])
        .env("CONELAB_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("report.json").exists());
    assert!(target.join("series.csv").exists());
}

#[test]
fn curvature_scan_flags_positive_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let flat = conelab(&["curvature-scan", "--metric", "euclidean", "--d", "3", "--samples", "50"], dir.path());
    assert_eq!(flat.status.code(), Some(0));
    let sphere = conelab(&["curvature-scan", "--metric", "sphere", "--samples", "50"], dir.path());
    assert_eq!(sphere.status.code(), Some(1));
    let r = report(dir.path());
    assert!((r["details"]["scan"]["min_curvature"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}
