//! End-to-end checks of the installed binary: every subcommand runs against
//! real files in a temp directory and the JSON it prints is parsed back.

use msense::*;
use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msense_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_msense"))
}

fn run_ok(cmd: &mut Command) -> Value {
    let out = cmd.output().expect("spawn msense");
    assert!(
        out.status.success(),
        "command failed: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_pcw_profiles(dir: &Path, mode: SamplingMode) -> (std::path::PathBuf, std::path::PathBuf) {
    let partition = LevelPartition::uniform(12, 2).unwrap();
    let v = IsometryMatrix::fourier(4, 2).unwrap();
    let set = msense::profiles::piecewise_constant_profiles(&v, &partition, mode).unwrap();
    let profiles_path = dir.join("profiles.json");
    let partition_path = dir.join("partition.json");
    fs::write(&profiles_path, set.to_json()).unwrap();
    fs::write(&partition_path, serde_json::to_string(&partition).unwrap()).unwrap();
    (profiles_path, partition_path)
}

#[test]
fn recover_solves_the_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("a.csv");
    let y = dir.path().join("y.csv");
    let out = dir.path().join("x.csv");
    // rows of [[1,0,0],[0,1,1]] interleaved as re,im pairs
    fs::write(&matrix, "1,0,0,0,0,0\n0,0,1,0,1,0\n").unwrap();
    fs::write(&y, "1,0\n0,0\n").unwrap();

    let report = run_ok(
        msense_bin()
            .arg("recover")
            .args(["--matrix", matrix.to_str().unwrap()])
            .args(["--y", y.to_str().unwrap()])
            .args(["--out", out.to_str().unwrap()]),
    );
    assert_eq!(report["converged"], Value::Bool(true));

    let x = read_vector_csv(&out).unwrap();
    assert!((x[0].re - 1.0).abs() < 1e-6);
    assert!(x[1].norm() < 1e-6 && x[2].norm() < 1e-6);
    assert!(out.with_extension("csv.meta.json").exists());
}

#[test]
fn recover_signals_non_convergence_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("a.csv");
    let y = dir.path().join("y.csv");
    let out = dir.path().join("x.csv");
    // y is outside the column space and eta = 0, so no feasible point exists
    fs::write(&matrix, "1,0\n1,0\n").unwrap();
    fs::write(&y, "1,0\n-1,0\n").unwrap();

    let result: Output = msense_bin()
        .arg("recover")
        .args(["--matrix", matrix.to_str().unwrap()])
        .args(["--y", y.to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()])
        .args(["--max-iterations", "200"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&result.stdout).unwrap();
    assert_eq!(report["converged"], Value::Bool(false));
}

#[test]
fn recover_reports_missing_files_as_errors() {
    let result = msense_bin()
        .arg("recover")
        .args(["--matrix", "/nonexistent/a.csv"])
        .args(["--y", "/nonexistent/y.csv"])
        .args(["--out", "/tmp/unused.csv"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("error:"));
}

#[test]
fn upsilon_reports_the_constant_blend_value() {
    let dir = tempfile::tempdir().unwrap();
    let (profiles, partition) = write_pcw_profiles(dir.path(), SamplingMode::Identical);
    let report = run_ok(
        msense_bin()
            .arg("upsilon")
            .args(["--profiles", profiles.to_str().unwrap()])
            .args(["--partition", partition.to_str().unwrap()])
            .args(["--mode", "identical"]),
    );
    let ups = report["upsilon"].as_f64().unwrap();
    assert!((ups - 2.0).abs() < 1e-12, "C/D = 4/2, got {ups}");
    assert_eq!(report["C"], Value::from(4u64));
    assert_eq!(report["D"], Value::from(2u64));
}

#[test]
fn upsilon_rejects_a_mode_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (profiles, partition) = write_pcw_profiles(dir.path(), SamplingMode::Identical);
    let result = msense_bin()
        .arg("upsilon")
        .args(["--profiles", profiles.to_str().unwrap()])
        .args(["--partition", partition.to_str().unwrap()])
        .args(["--mode", "distinct"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn check_isometry_distinguishes_good_from_bad_sets() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, DiagonalProfileSet::all_ones(6, SamplingMode::Distinct).to_json()).unwrap();
    let report = run_ok(
        msense_bin()
            .arg("check-isometry")
            .args(["--profiles", good.to_str().unwrap()]),
    );
    assert_eq!(report["ok"], Value::Bool(true));

    // doubled energy: sum over sensors is 2, not 1
    let bad = dir.path().join("bad.json");
    let doubled = serde_json::json!({
        "C": 2, "N": 3, "mode": "identical",
        "profiles": [
            [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
            [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]
        ]
    });
    fs::write(&bad, doubled.to_string()).unwrap();
    let result = msense_bin()
        .arg("check-isometry")
        .args(["--profiles", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&result.stdout).unwrap();
    assert_eq!(report["ok"], Value::Bool(false));
}

#[test]
fn assemble_writes_matrix_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = dir.path().join("profiles.json");
    fs::write(&profiles, DiagonalProfileSet::all_ones(8, SamplingMode::Distinct).to_json())
        .unwrap();
    let out = dir.path().join("ensemble.csv");
    let report = run_ok(
        msense_bin()
            .arg("assemble")
            .args(["--profiles", profiles.to_str().unwrap()])
            .args(["--rows", "4"])
            .args(["--seed", "31"])
            .args(["--out", out.to_str().unwrap()]),
    );
    assert_eq!(report["m"], Value::from(4u64));
    let a = read_matrix_csv(&out).unwrap();
    assert_eq!((a.rows(), a.cols()), (4, 8));
    let meta: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("ensemble.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["config"]["seed"], Value::from(31u64));
    assert_eq!(meta["config"]["mode"], Value::from("distinct"));
    assert!(meta["version"].as_str().is_some());
}

#[test]
fn coherence_reports_a_bracketed_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let (profiles, partition) = write_pcw_profiles(dir.path(), SamplingMode::Distinct);
    let report = run_ok(
        msense_bin()
            .arg("coherence")
            .args(["--profiles", profiles.to_str().unwrap()])
            .args(["--partition", partition.to_str().unwrap()])
            .args(["--delta", "1, 4, 9"])
            .args(["--z-budget", "4"]),
    );
    let g1 = report["gamma1"].as_f64().unwrap();
    let g2 = report["gamma2_lower"].as_f64().unwrap();
    let upper = report["analytic_upper"].as_f64().unwrap();
    assert!(g1 <= upper + 1e-9 && g2 <= upper + 1e-9);
    assert_eq!(report["exact"], Value::Bool(true));
    assert_eq!(report["delta"], serde_json::json!([1, 4, 9]));
}

#[test]
fn bound_prints_the_proxy_report() {
    let report = run_ok(
        msense_bin()
            .arg("bound")
            .args(["--n", "1024"])
            .args(["--s", "16"])
            .args(["--upsilon", "2"]),
    );
    let l = report["L"].as_f64().unwrap();
    assert!((l - 25.9203858).abs() < 1e-5);
    let proxy = report["m_proxy"].as_f64().unwrap();
    assert!((proxy - 16.0 * 2.0 * l).abs() < 1e-9);
}

#[test]
fn phase_transition_writes_the_full_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    let out_dir = dir.path().join("runs");
    let config = serde_json::json!({
        "N": 8,
        "C_list": [1],
        "mode": "distinct",
        "profile_family": {"kind": "piecewise-constant", "levels": 1},
        "distribution": "fourier",
        "m_grid": [16],
        "s_grid": [1, 2],
        "trials_per_cell": 2,
        "master_seed": 5
    });
    fs::write(&config_path, config.to_string()).unwrap();

    let report = run_ok(
        msense_bin()
            .arg("phase-transition")
            .args(["--config", config_path.to_str().unwrap()])
            .args(["--out", out_dir.to_str().unwrap()])
            .args(["--threads", "1"]),
    );
    assert_eq!(report["cells"], Value::from(2u64));

    let grid_csv = fs::read_to_string(out_dir.join("grid.csv")).unwrap();
    assert_eq!(grid_csv.lines().count(), 3);
    assert_eq!(grid_csv.lines().next().unwrap(), "C,m,s,success_prob");
    let grid = load_grid_json(&out_dir.join("grid.json")).unwrap();
    assert_eq!(grid.cell_count(), 2);
    let svg = fs::read_to_string(out_dir.join("contours.svg")).unwrap();
    assert!(svg.contains("<polyline"));
    assert!(out_dir.join("grid.csv.meta.json").exists());
    assert!(out_dir.join("contours.csv.meta.json").exists());
}
