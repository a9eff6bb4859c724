//! Browser bindings: JSON-in, JSON-out entry points sized for interactive
//! use on a single page. Every function takes a request object serialized as
//! a string and returns `{"ok": true, ...}` or `{"ok": false, "error": ...}`
//! so the page never has to deal with thrown exceptions.
//!
//! The heavy, parallel sweep lives in the CLI; [`phase_mini`] runs a small
//! sequential grid instead and rejects requests that would freeze the tab.

use msense::model::{sample_sparse_distributed, MagnitudeModel};
use msense::profiles::{banded_profiles, piecewise_constant_profiles, upsilon};
use msense::sampling::{assemble, RowAllocation, RowKind, SensingFamily};
use msense::solver::{basis_pursuit, recovery_error, SolverOptions};
use msense::{
    derive_seed, uniform_sphere_noise, DiagonalProfileSet, IsometryMatrix, LevelPartition,
    LinearOperator, ProfileFamily, SamplingMode,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

const TAG_SIGNAL: u64 = 1;
const TAG_MATRIX: u64 = 2;
const TAG_NOISE: u64 = 3;

/// Hard ceilings that keep a synchronous call under roughly a second.
const MAX_N: usize = 128;
const MAX_SOLVES_PER_CALL: usize = 600;

fn err(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "ok": false, "error": message.to_string() }).to_string()
}

fn ok(body: impl Serialize) -> String {
    match serde_json::to_value(body) {
        Ok(mut value) => {
            value["ok"] = serde_json::Value::Bool(true);
            value.to_string()
        }
        Err(e) => err(e),
    }
}

fn build_profiles(
    n: usize,
    c: usize,
    mode: SamplingMode,
    family: &ProfileFamily,
) -> Result<(DiagonalProfileSet, LevelPartition), String> {
    if n == 0 || n > MAX_N {
        return Err(format!("N must be in 1..={MAX_N}, got {n}"));
    }
    if c == 0 {
        return Err("C must be at least 1".into());
    }
    if c == 1 {
        let set = DiagonalProfileSet::all_ones(n, mode);
        let partition = LevelPartition::single(n).map_err(|e| e.to_string())?;
        return Ok((set, partition));
    }
    match *family {
        ProfileFamily::PiecewiseConstant { levels } => {
            let v = IsometryMatrix::fourier(c, levels).map_err(|e| e.to_string())?;
            let partition = LevelPartition::uniform(n, levels).map_err(|e| e.to_string())?;
            let set = piecewise_constant_profiles(&v, &partition, mode)
                .map_err(|e| e.to_string())?;
            Ok((set, partition))
        }
        ProfileFamily::Banded { r1, r2, shape } => {
            banded_profiles(c, n, r1, r2, shape, mode).map_err(|e| e.to_string())
        }
    }
}

#[derive(Deserialize)]
struct ProfileRequest {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "C")]
    c: usize,
    mode: SamplingMode,
    family: ProfileFamily,
}

#[derive(Serialize)]
struct ProfileResponse {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "C")]
    c: usize,
    #[serde(rename = "D")]
    d: usize,
    mode: SamplingMode,
    upsilon: f64,
    isometry_residual: f64,
    /// Level index of each coordinate, for shading the partition.
    levels: Vec<usize>,
    /// `|h_{c,i}|` per sensor, one row per sensor.
    magnitudes: Vec<Vec<f64>>,
}

/// Profile magnitudes, partition layout, and the interference factor for one
/// family configuration. Request:
/// `{"N": 96, "C": 3, "mode": "distinct", "family": {"kind": "banded", "r1": 1, "r2": 0}}`.
#[wasm_bindgen]
pub fn profile_curves(request: &str) -> String {
    let req: ProfileRequest = match serde_json::from_str(request) {
        Ok(req) => req,
        Err(e) => return err(e),
    };
    let (set, partition) = match build_profiles(req.n, req.c, req.mode, &req.family) {
        Ok(pair) => pair,
        Err(e) => return err(e),
    };
    let ups = match upsilon(&set, &partition) {
        Ok(v) => v,
        Err(e) => return err(e),
    };
    let magnitudes = set
        .profiles()
        .iter()
        .map(|p| p.iter().map(|v| v.norm()).collect())
        .collect();
    ok(ProfileResponse {
        n: set.n(),
        c: set.sensors(),
        d: partition.num_levels(),
        mode: set.mode(),
        upsilon: ups,
        isometry_residual: set.joint_isometry_residual(),
        levels: (0..set.n()).map(|i| partition.level_of(i)).collect(),
        magnitudes,
    })
}

#[derive(Deserialize)]
struct RecoverRequest {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "C")]
    c: usize,
    mode: SamplingMode,
    family: ProfileFamily,
    #[serde(default = "default_distribution")]
    distribution: RowKind,
    m: usize,
    s: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eta: f64,
}

fn default_distribution() -> RowKind {
    RowKind::Fourier
}

#[derive(Serialize)]
struct RecoverResponse {
    success: bool,
    converged: bool,
    iterations: usize,
    relative_error: f64,
    residual_norm: f64,
    support: Vec<usize>,
    truth: Vec<f64>,
    recovered: Vec<f64>,
}

/// One sample-measure-recover round trip. Returns the true and recovered
/// coordinate magnitudes for a stem plot, plus the solver diagnostics.
/// Request:
/// `{"N": 64, "C": 2, "mode": "distinct", "family": {...}, "m": 24, "s": 4, "seed": 7}`.
#[wasm_bindgen]
pub fn recover_once(request: &str) -> String {
    let req: RecoverRequest = match serde_json::from_str(request) {
        Ok(req) => req,
        Err(e) => return err(e),
    };
    if req.m == 0 || req.m > 4 * MAX_N {
        return err(format!("m must be in 1..={}, got {}", 4 * MAX_N, req.m));
    }
    if req.eta < 0.0 || !req.eta.is_finite() {
        return err("eta must be finite and non-negative");
    }
    match run_trial(&req) {
        Ok(resp) => ok(resp),
        Err(e) => err(e),
    }
}

fn run_trial(req: &RecoverRequest) -> Result<RecoverResponse, String> {
    let (set, partition) = build_profiles(req.n, req.c, req.mode, &req.family)?;
    let lambda = partition.num_levels() as f64;

    let mut signal_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(req.seed, &[TAG_SIGNAL]));
    let x = sample_sparse_distributed(
        &partition,
        req.s,
        lambda,
        MagnitudeModel::UnitModulus,
        &mut signal_rng,
    )
    .map_err(|e| e.to_string())?;

    let family =
        SensingFamily::uniform_rows(set, req.distribution).map_err(|e| e.to_string())?;
    let matrix_seed = derive_seed(req.seed, &[TAG_MATRIX]);
    let ensemble = assemble(&family, req.m, RowAllocation::RandomMixture, matrix_seed)
        .map_err(|e| e.to_string())?;

    let mut y = ensemble.matrix().apply(&x);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(req.seed, &[TAG_NOISE]));
    for (yi, ei) in y.iter_mut().zip(uniform_sphere_noise(req.m, req.eta, &mut noise_rng)) {
        *yi += ei;
    }

    let opts = SolverOptions { eta: req.eta, max_iterations: 5_000, ..SolverOptions::default() };
    let result = basis_pursuit(ensemble.matrix(), &y, &opts);
    let report = recovery_error(&result.x_hat, &x);

    Ok(RecoverResponse {
        success: result.converged && report.rel_l2 <= 1e-3,
        converged: result.converged,
        iterations: result.iterations,
        relative_error: report.rel_l2,
        residual_norm: result.residual_norm,
        support: x
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(i, _)| i)
            .collect(),
        truth: x.iter().map(|v| v.norm()).collect(),
        recovered: result.x_hat.iter().map(|v| v.norm()).collect(),
    })
}

#[derive(Deserialize)]
struct MiniSweepRequest {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "C")]
    c: usize,
    mode: SamplingMode,
    family: ProfileFamily,
    #[serde(default = "default_distribution")]
    distribution: RowKind,
    m_grid: Vec<usize>,
    s_grid: Vec<usize>,
    trials: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct MiniSweepResponse {
    #[serde(rename = "C")]
    c: usize,
    m_grid: Vec<usize>,
    s_grid: Vec<usize>,
    /// `success[mi][si]` is the empirical success probability.
    success: Vec<Vec<f64>>,
    solves: usize,
}

/// A small sequential success-probability grid for heatmap demos. A call is
/// capped at [`MAX_SOLVES_PER_CALL`] solves; pages that want a bigger map
/// should issue one call per `m` column and yield to the event loop between
/// calls.
#[wasm_bindgen]
pub fn phase_mini(request: &str) -> String {
    let req: MiniSweepRequest = match serde_json::from_str(request) {
        Ok(req) => req,
        Err(e) => return err(e),
    };
    if req.m_grid.is_empty() || req.s_grid.is_empty() || req.trials == 0 {
        return err("m_grid, s_grid, and trials must be non-empty");
    }
    let solves = req.m_grid.len() * req.s_grid.len() * req.trials;
    if solves > MAX_SOLVES_PER_CALL {
        return err(format!(
            "request needs {solves} solves, cap is {MAX_SOLVES_PER_CALL}; split over several calls"
        ));
    }
    match run_mini_sweep(&req) {
        Ok(resp) => ok(resp),
        Err(e) => err(e),
    }
}

fn run_mini_sweep(req: &MiniSweepRequest) -> Result<MiniSweepResponse, String> {
    let (set, partition) = build_profiles(req.n, req.c, req.mode, &req.family)?;
    let lambda = partition.num_levels() as f64;
    let family =
        SensingFamily::uniform_rows(set, req.distribution).map_err(|e| e.to_string())?;

    let mut success = vec![vec![0.0; req.s_grid.len()]; req.m_grid.len()];
    let mut solves = 0usize;
    for (mi, &m) in req.m_grid.iter().enumerate() {
        if m == 0 || m > 4 * MAX_N {
            return Err(format!("m must be in 1..={}, got {m}", 4 * MAX_N));
        }
        for (si, &s) in req.s_grid.iter().enumerate() {
            let mut hits = 0usize;
            for trial in 0..req.trials {
                let parts = [req.c as u64, m as u64, s as u64, trial as u64];
                let mut signal_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    req.seed,
                    &[TAG_SIGNAL, parts[0], parts[1], parts[2], parts[3]],
                ));
                let x = sample_sparse_distributed(
                    &partition,
                    s,
                    lambda,
                    MagnitudeModel::UnitModulus,
                    &mut signal_rng,
                )
                .map_err(|e| e.to_string())?;
                let matrix_seed = derive_seed(
                    req.seed,
                    &[TAG_MATRIX, parts[0], parts[1], parts[2], parts[3]],
                );
                let ensemble =
                    assemble(&family, m, RowAllocation::RandomMixture, matrix_seed)
                        .map_err(|e| e.to_string())?;
                let y = ensemble.matrix().apply(&x);
                let opts =
                    SolverOptions { max_iterations: 2_500, ..SolverOptions::default() };
                let result = basis_pursuit(ensemble.matrix(), &y, &opts);
                let report = recovery_error(&result.x_hat, &x);
                if result.converged && report.rel_l2 <= 1e-3 {
                    hits += 1;
                }
                solves += 1;
            }
            success[mi][si] = hits as f64 / req.trials as f64;
        }
    }
    Ok(MiniSweepResponse {
        c: req.c,
        m_grid: req.m_grid.clone(),
        s_grid: req.s_grid.clone(),
        success,
        solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_payloads_carry_ok_false() {
        let resp: serde_json::Value = serde_json::from_str(&profile_curves("not json")).unwrap();
        assert_eq!(resp["ok"], serde_json::Value::Bool(false));
        assert!(resp["error"].as_str().is_some());
    }
}
