//! Local coherence estimation and the measurement-count proxy.
//!
//! The sample complexity of recovery over a support `Delta` is driven by two
//! coherence functionals of the sensing atom family:
//!
//! * `gamma1`: the almost-sure bound `max_i sum_{j in Delta} |(B B*)_{ij}|`,
//!   computed exactly over finite atom families;
//! * `gamma2`: `sup_{|z_j| = 1} max_i E |e_i* B B* P_Delta z|^2`, whose
//!   expectation is exact but whose sup over the phase polytope is NP-hard
//!   in general. A coordinate-ascent lower bound is reported and bracketed
//!   by the analytic upper bound `lambda * s * mu * upsilon`.
//!
//! The proxy `m ~ lambda * s * mu * upsilon * L` with
//! `L = ln(N/eps) + ln(s) ln(s/eps)` ranks designs; the universal constant
//! in front is unknown, so only ratios are meaningful.

use crate::mat::DenseMatrix;
use crate::model::LevelPartition;
use crate::profiles::{upsilon, ProfileError};
use crate::sampling::SensingFamily;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("delta must be a non-empty set of column indices")]
    EmptyDelta,
    #[error("delta index {index} is out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("delta contains index {index} twice")]
    DuplicateIndex { index: usize },
    #[error("the atom family is not finite; pass a draw budget instead")]
    NotEnumerable,
    #[error("log factor needs N >= 2, s >= 2 and 0 < eps < 1; got N = {n}, s = {s}, eps = {epsilon}")]
    LogFactorDomain { n: usize, s: usize, epsilon: f64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// How atoms are supplied to the coherence estimators: exhaustively for a
/// finite family, or by seeded Monte Carlo draws otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomBudget {
    Exact,
    Draws { count: usize, seed: u64 },
}

fn check_delta(delta: &[usize], n: usize) -> Result<(), AnalysisError> {
    if delta.is_empty() {
        return Err(AnalysisError::EmptyDelta);
    }
    let mut seen = vec![false; n];
    for &j in delta {
        if j >= n {
            return Err(AnalysisError::IndexOutOfRange { index: j, n });
        }
        if seen[j] {
            return Err(AnalysisError::DuplicateIndex { index: j });
        }
        seen[j] = true;
    }
    Ok(())
}

/// Run `visit` over the requested atoms; returns how many were visited.
fn for_each_atom(
    family: &SensingFamily,
    budget: AtomBudget,
    mut visit: impl FnMut(&DenseMatrix),
) -> Result<usize, AnalysisError> {
    match budget {
        AtomBudget::Exact => {
            let count = family.exact_atom_count().ok_or(AnalysisError::NotEnumerable)?;
            for t in 0..count {
                visit(&family.atom(t));
            }
            Ok(count)
        }
        AtomBudget::Draws { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                visit(&family.sample_atom(&mut rng));
            }
            Ok(count)
        }
    }
}

/// Row `i` of `B B*` restricted to the columns in `delta`.
fn gram_row_on_delta(b: &DenseMatrix, i: usize, delta: &[usize], out: &mut [Complex64]) {
    let cols = b.cols();
    for (slot, &j) in out.iter_mut().zip(delta) {
        let mut acc = Complex64::ZERO;
        for col in 0..cols {
            acc += b.get(i, col) * b.get(j, col).conj();
        }
        *slot = acc;
    }
}

/// `max over atoms of max_i sum_{j in delta} |(B B*)_{ij}|`.
///
/// Exact budgets return the true almost-sure bound for finite families;
/// draw budgets return a lower bound (the max over the sampled atoms).
pub fn gamma1_empirical(
    family: &SensingFamily,
    delta: &[usize],
    budget: AtomBudget,
) -> Result<f64, AnalysisError> {
    check_delta(delta, family.n())?;
    let n = family.n();
    let mut row = vec![Complex64::ZERO; delta.len()];
    let mut worst = 0.0f64;
    for_each_atom(family, budget, |b| {
        for i in 0..n {
            gram_row_on_delta(b, i, delta, &mut row);
            let sum: f64 = row.iter().map(|v| v.norm()).sum();
            worst = worst.max(sum);
        }
    })?;
    Ok(worst)
}

/// Maximize the Hermitian form `z* M z` over unit-modulus entries by cyclic
/// coordinate ascent: each entry is set to the phase that maximizes the form
/// with the others held fixed, swept until a full pass gains nothing.
fn ascend_phase_form(m: &DenseMatrix, starts: usize, rng: &mut ChaCha8Rng) -> f64 {
    let k = m.rows();
    let form = |z: &[Complex64]| -> f64 {
        let mut acc = Complex64::ZERO;
        for i in 0..k {
            for j in 0..k {
                acc += z[i].conj() * m.get(i, j) * z[j];
            }
        }
        acc.re
    };
    let mut best = 0.0f64;
    for start in 0..starts.max(1) {
        let mut z: Vec<Complex64> = if start == 0 {
            vec![Complex64::ONE; k]
        } else {
            (0..k)
                .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
                .collect()
        };
        let mut val = form(&z);
        for _sweep in 0..200 {
            for j in 0..k {
                let mut w = Complex64::ZERO;
                for l in 0..k {
                    if l != j {
                        w += m.get(j, l) * z[l];
                    }
                }
                if w.norm() > 0.0 {
                    z[j] = w / w.norm();
                }
            }
            let new_val = form(&z);
            if new_val <= val + 1e-12 * (1.0 + val.abs()) {
                val = new_val;
                break;
            }
            val = new_val;
        }
        best = best.max(val);
    }
    best
}

/// Per-anchor expectation matrices `M^(i) = E[g* g]` with
/// `g = (B B*)_{i, delta}`, so that `E |e_i* B B* P_delta z|^2 = z* M^(i) z`.
fn expectation_forms(
    family: &SensingFamily,
    delta: &[usize],
    budget: AtomBudget,
) -> Result<(Vec<DenseMatrix>, usize), AnalysisError> {
    let n = family.n();
    let k = delta.len();
    let mut forms = vec![DenseMatrix::zeros(k, k); n];
    let mut row = vec![Complex64::ZERO; k];
    let used = for_each_atom(family, budget, |b| {
        for i in 0..n {
            gram_row_on_delta(b, i, delta, &mut row);
            let m = &mut forms[i];
            for p in 0..k {
                for q in 0..k {
                    let cur = m.get(p, q);
                    m.set(p, q, cur + row[p].conj() * row[q]);
                }
            }
        }
    })?;
    let weight = 1.0 / used as f64;
    for m in &mut forms {
        m.scale(weight);
    }
    Ok((forms, used))
}

/// Lower bound on `gamma2`: the expectation over atoms is exact (or Monte
/// Carlo under a draw budget), and the sup over unit-modulus `z` is
/// approached from below with `z_budget` ascent starts per anchor index.
pub fn gamma2_estimate(
    family: &SensingFamily,
    delta: &[usize],
    budget: AtomBudget,
    z_budget: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    check_delta(delta, family.n())?;
    let (forms, _) = expectation_forms(family, delta, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for m in &forms {
        best = best.max(ascend_phase_form(m, z_budget, &mut rng));
    }
    Ok(best)
}

/// Joint coherence report over one support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceEstimate {
    /// Exact (or sampled) almost-sure bound `Gamma_1`.
    pub gamma1: f64,
    /// Coordinate-ascent lower bound on `Gamma_2`.
    pub gamma2_lower: f64,
    /// `max(gamma1, gamma2_lower)`.
    pub gamma: f64,
    /// `lambda_effective * s * mu * upsilon`: the analytic ceiling both
    /// functionals provably sit under.
    pub analytic_upper: f64,
    /// The smallest `lambda` for which `delta` passes the per-level caps.
    pub lambda_effective: f64,
    pub upsilon: f64,
    pub delta: Vec<usize>,
    /// Atoms averaged: the family size under an exact budget, the draw
    /// count otherwise.
    pub draws_used: usize,
    /// Whether the expectation was exhaustive rather than Monte Carlo.
    pub exact: bool,
}

/// Compute both coherence functionals plus the analytic bracket for one
/// support. The support's own level histogram determines the effective
/// `lambda` used for the upper bound.
pub fn coherence_report(
    family: &SensingFamily,
    partition: &LevelPartition,
    delta: &[usize],
    budget: AtomBudget,
    z_budget: usize,
    seed: u64,
) -> Result<CoherenceEstimate, AnalysisError> {
    check_delta(delta, family.n())?;
    let gamma1 = gamma1_empirical(family, delta, budget)?;
    let gamma2_lower = gamma2_estimate(family, delta, budget, z_budget, seed)?;
    let draws_used = match budget {
        AtomBudget::Exact => family.exact_atom_count().ok_or(AnalysisError::NotEnumerable)?,
        AtomBudget::Draws { count, .. } => count,
    };
    let ups = upsilon(family.profiles(), partition)?;
    let s = delta.len();
    let d = partition.num_levels();
    let mut counts = vec![0usize; d];
    for &j in delta {
        counts[partition.level_of(j)] += 1;
    }
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let lambda_effective = max_count as f64 * d as f64 / s as f64;
    let analytic_upper = lambda_effective * s as f64 * family.mu() * ups;
    Ok(CoherenceEstimate {
        gamma1,
        gamma2_lower,
        gamma: gamma1.max(gamma2_lower),
        analytic_upper,
        lambda_effective,
        upsilon: ups,
        delta: delta.to_vec(),
        draws_used,
        exact: matches!(budget, AtomBudget::Exact),
    })
}

/// `L = ln(N/eps) + ln(s) ln(s/eps)`, natural logarithms.
pub fn log_factor_l(n: usize, s: usize, epsilon: f64) -> Result<f64, AnalysisError> {
    if n < 2 || s < 2 || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AnalysisError::LogFactorDomain { n, s, epsilon });
    }
    let n = n as f64;
    let s = s as f64;
    Ok((n / epsilon).ln() + s.ln() * (s / epsilon).ln())
}

/// The measurement-count proxy `lambda * s * mu * upsilon * L`. Meaningful
/// for ranking designs against each other; the universal constant hidden in
/// the theory is not included.
pub fn measurement_bound_proxy(s: usize, lambda: f64, mu: f64, upsilon: f64, l: f64) -> f64 {
    lambda * s as f64 * mu * upsilon * l
}

/// The full proxy computation with inputs echoed, for the CLI and sidecars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "L")]
    pub l: f64,
    pub m_proxy: f64,
    pub s: usize,
    pub lambda: f64,
    pub mu: f64,
    pub upsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
}

pub fn bound_report(
    n: usize,
    s: usize,
    lambda: f64,
    mu: f64,
    upsilon: f64,
    epsilon: f64,
) -> Result<BoundReport, AnalysisError> {
    let l = log_factor_l(n, s, epsilon)?;
    Ok(BoundReport {
        l,
        m_proxy: measurement_bound_proxy(s, lambda, mu, upsilon, l),
        s,
        lambda,
        mu,
        upsilon,
        n,
        epsilon,
    })
}
