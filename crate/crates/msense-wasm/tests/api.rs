//! The bindings are plain JSON-in/JSON-out functions, so everything except
//! the wasm ABI itself is checkable on the host.

use msense_wasm::{phase_mini, profile_curves, recover_once};
use serde_json::{json, Value};

fn call(f: fn(&str) -> String, request: Value) -> Value {
    let resp: Value = serde_json::from_str(&f(&request.to_string())).unwrap();
    assert_eq!(resp["ok"], Value::Bool(true), "call failed: {}", resp["error"]);
    resp
}

#[test]
fn profile_curves_reports_banded_upsilon() {
    let resp = call(
        profile_curves,
        json!({
            "N": 96, "C": 4, "mode": "distinct",
            "family": {"kind": "banded", "r1": 1, "r2": 0}
        }),
    );
    assert_eq!(resp["D"], json!(3));
    let ups = resp["upsilon"].as_f64().unwrap();
    assert!((ups - 4.0 / 3.0).abs() < 1e-12, "flat band C=4: {ups}");
    assert!(resp["isometry_residual"].as_f64().unwrap() < 1e-12);
    let magnitudes = resp["magnitudes"].as_array().unwrap();
    assert_eq!(magnitudes.len(), 4);
    assert_eq!(magnitudes[0].as_array().unwrap().len(), 96);
    assert_eq!(resp["levels"].as_array().unwrap().len(), 96);
}

#[test]
fn profile_curves_handles_the_single_sensor_case() {
    let resp = call(
        profile_curves,
        json!({
            "N": 16, "C": 1, "mode": "identical",
            "family": {"kind": "piecewise-constant", "levels": 3}
        }),
    );
    assert_eq!(resp["D"], json!(1));
    assert_eq!(resp["upsilon"], json!(1.0));
}

#[test]
fn profile_curves_rejects_oversized_requests() {
    let resp: Value = serde_json::from_str(&profile_curves(
        &json!({
            "N": 100_000, "C": 2, "mode": "distinct",
            "family": {"kind": "banded", "r1": 1, "r2": 0}
        })
        .to_string(),
    ))
    .unwrap();
    assert_eq!(resp["ok"], Value::Bool(false));
}

#[test]
fn recover_once_succeeds_on_an_easy_instance() {
    let resp = call(
        recover_once,
        json!({
            "N": 32, "C": 2, "mode": "distinct",
            "family": {"kind": "banded", "r1": 1, "r2": 0},
            "m": 24, "s": 2, "seed": 11
        }),
    );
    assert_eq!(resp["success"], Value::Bool(true));
    assert!(resp["relative_error"].as_f64().unwrap() <= 1e-3);
    let truth = resp["truth"].as_array().unwrap();
    let recovered = resp["recovered"].as_array().unwrap();
    assert_eq!(truth.len(), 32);
    assert_eq!(recovered.len(), 32);
    let support = resp["support"].as_array().unwrap();
    assert_eq!(support.len(), 2);
    for idx in support {
        let i = idx.as_u64().unwrap() as usize;
        assert!(truth[i].as_f64().unwrap() > 0.5);
    }
}

#[test]
fn recover_once_reports_failure_when_undersampled() {
    let resp = call(
        recover_once,
        json!({
            "N": 32, "C": 1, "mode": "distinct",
            "family": {"kind": "piecewise-constant", "levels": 1},
            "m": 3, "s": 12, "seed": 4
        }),
    );
    assert_eq!(resp["success"], Value::Bool(false));
}

#[test]
fn phase_mini_produces_a_monotone_looking_grid() {
    let resp = call(
        phase_mini,
        json!({
            "N": 24, "C": 1, "mode": "distinct",
            "family": {"kind": "piecewise-constant", "levels": 1},
            "m_grid": [4, 20], "s_grid": [1, 10], "trials": 5, "seed": 3
        }),
    );
    assert_eq!(resp["solves"], json!(20));
    let grid = resp["success"].as_array().unwrap();
    let easy = grid[1][0].as_f64().unwrap(); // m = 20, s = 1
    let hard = grid[0][1].as_f64().unwrap(); // m = 4, s = 10
    assert_eq!(easy, 1.0);
    assert_eq!(hard, 0.0);
}

#[test]
fn phase_mini_rejects_grids_over_the_solve_cap() {
    let resp: Value = serde_json::from_str(&phase_mini(
        &json!({
            "N": 24, "C": 1, "mode": "distinct",
            "family": {"kind": "piecewise-constant", "levels": 1},
            "m_grid": [4, 8, 12, 16, 20], "s_grid": [1, 2, 3, 4, 5, 6, 7, 8],
            "trials": 50, "seed": 3
        })
        .to_string(),
    ))
    .unwrap();
    assert_eq!(resp["ok"], Value::Bool(false));
    assert!(resp["error"].as_str().unwrap().contains("cap"));
}

#[test]
fn identical_mode_rejects_row_counts_not_divisible_by_c() {
    let resp: Value = serde_json::from_str(&recover_once(
        &json!({
            "N": 32, "C": 3, "mode": "identical",
            "family": {"kind": "banded", "r1": 1, "r2": 0},
            "m": 10, "s": 2, "seed": 0
        })
        .to_string(),
    ))
    .unwrap();
    assert_eq!(resp["ok"], Value::Bool(false));
}
