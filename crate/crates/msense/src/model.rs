//! Signal model: level partitions, local sparsity, and sparse-and-distributed
//! supports.
//!
//! A [`LevelPartition`] splits the index range `{0, .., N-1}` into `D`
//! disjoint non-empty levels. A vector is `(s, lambda)`-distributed when it is
//! `s`-sparse overall and no level carries more than `floor(lambda * s / D)`
//! of the support. `lambda` ranges over `[1, D]`: `lambda = 1` forces an even
//! spread, `lambda = D` allows everything to pile into one level.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Signals are plain complex vectors; the alias marks intent in signatures.
pub type SignalVector = Vec<Complex64>;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("level {level} is empty")]
    EmptyLevel { level: usize },
    #[error("index {index} is out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("index {index} appears in more than one level")]
    DuplicateIndex { index: usize },
    #[error("index {index} is not covered by any level")]
    UncoveredIndex { index: usize },
    #[error("partition needs at least one level and a positive dimension")]
    Degenerate,
    #[error("vector has length {got}, partition covers {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("lambda {lambda} outside [1, D] = [1, {d}]")]
    LambdaOutOfRange { lambda: f64, d: usize },
    #[error("entry {index} is not finite")]
    NonFiniteEntry { index: usize },
    #[error(
        "no (s, lambda)-distributed support of size {s} exists: level caps admit only {capacity} indices"
    )]
    InfeasibleSupport { s: usize, capacity: usize },
}

/// Disjoint cover of `{0, .., n-1}` by `D` non-empty levels.
///
/// Construction validates the cover; the first offending index is reported.
/// Serialized form is `{ "n": ..., "levels": [[...], ...] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct LevelPartition {
    n: usize,
    levels: Vec<Vec<usize>>,
    level_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    n: usize,
    levels: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for LevelPartition {
    type Error = ModelError;

    fn try_from(raw: RawPartition) -> Result<Self, ModelError> {
        LevelPartition::new(raw.n, raw.levels)
    }
}

impl From<LevelPartition> for RawPartition {
    fn from(p: LevelPartition) -> Self {
        RawPartition { n: p.n, levels: p.levels }
    }
}

impl LevelPartition {
    pub fn new(n: usize, levels: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        if n == 0 || levels.is_empty() {
            return Err(ModelError::Degenerate);
        }
        let mut level_of = vec![usize::MAX; n];
        for (d, level) in levels.iter().enumerate() {
            if level.is_empty() {
                return Err(ModelError::EmptyLevel { level: d });
            }
            for &i in level {
                if i >= n {
                    return Err(ModelError::IndexOutOfRange { index: i, n });
                }
                if level_of[i] != usize::MAX {
                    return Err(ModelError::DuplicateIndex { index: i });
                }
                level_of[i] = d;
            }
        }
        if let Some(index) = level_of.iter().position(|&d| d == usize::MAX) {
            return Err(ModelError::UncoveredIndex { index });
        }
        Ok(Self { n, levels, level_of })
    }

    /// Balanced contiguous partition into `d` levels. Level `k` holds
    /// `[k*n/d, (k+1)*n/d)`, so sizes differ by at most one and are exactly
    /// `n/d` when `d` divides `n`.
    pub fn uniform(n: usize, d: usize) -> Result<Self, ModelError> {
        if d == 0 || d > n {
            return Err(ModelError::Degenerate);
        }
        let levels = (0..d)
            .map(|k| (k * n / d..(k + 1) * n / d).collect())
            .collect();
        Self::new(n, levels)
    }

    /// Single level covering everything (the classical unstructured model).
    pub fn single(n: usize) -> Result<Self, ModelError> {
        Self::uniform(n, 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of levels `D`.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn level_indices(&self, d: usize) -> &[usize] {
        &self.levels[d]
    }

    pub fn level_of(&self, index: usize) -> usize {
        self.level_of[index]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    fn check_dim(&self, x: &[Complex64]) -> Result<(), ModelError> {
        if x.len() != self.n {
            return Err(ModelError::DimensionMismatch { got: x.len(), expected: self.n });
        }
        Ok(())
    }

    fn check_lambda(&self, lambda: f64) -> Result<(), ModelError> {
        let d = self.num_levels();
        if !(lambda >= 1.0 && lambda <= d as f64) {
            return Err(ModelError::LambdaOutOfRange { lambda, d });
        }
        Ok(())
    }
}

/// Per-level nonzero counts of a vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSparsity {
    pub per_level: Vec<usize>,
}

impl LocalSparsity {
    pub fn total(&self) -> usize {
        self.per_level.iter().sum()
    }
}

/// Per-level cap `floor(lambda * s / D)`. A tiny epsilon guards against cases
/// like `1.2 * 5 / 3` landing just below an exact integer in floating point.
pub fn distribution_cap(s: usize, lambda: f64, d: usize) -> usize {
    (lambda * s as f64 / d as f64 + 1e-9).floor() as usize
}

/// Counts nonzero entries per level. Zero means exactly zero: thresholding is
/// the caller's business (see `solver::recovery_error` for the reconstruction
/// side).
pub fn level_sparsities(
    x: &[Complex64],
    partition: &LevelPartition,
) -> Result<LocalSparsity, ModelError> {
    partition.check_dim(x)?;
    let mut per_level = vec![0usize; partition.num_levels()];
    for (i, v) in x.iter().enumerate() {
        if *v != Complex64::ZERO {
            per_level[partition.level_of(i)] += 1;
        }
    }
    Ok(LocalSparsity { per_level })
}

/// Does `x` lie in the sparse-and-distributed class for `(s, lambda)`?
pub fn is_sparse_distributed(
    x: &[Complex64],
    partition: &LevelPartition,
    s: usize,
    lambda: f64,
) -> Result<bool, ModelError> {
    partition.check_lambda(lambda)?;
    let local = level_sparsities(x, partition)?;
    let cap = distribution_cap(s, lambda, partition.num_levels());
    Ok(local.total() <= s && local.per_level.iter().all(|&sd| sd <= cap))
}

/// Best approximation of `x` by a support admissible for `(s, lambda)`:
/// returns the chosen support (sorted ascending) and the l1 mass left behind.
///
/// Greedy by magnitude, skipping indices whose level already hit its cap and
/// stopping at `s` kept entries. The admissible supports form (the truncation
/// of) a partition matroid, so the greedy choice is exactly optimal; the
/// tests cross-check against exhaustive search. Ties in magnitude break
/// toward the lower index.
pub fn best_distributed_approximation(
    x: &[Complex64],
    partition: &LevelPartition,
    s: usize,
    lambda: f64,
) -> Result<(Vec<usize>, f64), ModelError> {
    partition.check_dim(x)?;
    partition.check_lambda(lambda)?;
    if let Some(index) = x.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(ModelError::NonFiniteEntry { index });
    }
    let d = partition.num_levels();
    let cap = distribution_cap(s, lambda, d);

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].norm().total_cmp(&x[a].norm()).then(a.cmp(&b)));

    let mut taken_per_level = vec![0usize; d];
    let mut support = Vec::with_capacity(s);
    for i in order {
        if support.len() == s {
            break;
        }
        let lvl = partition.level_of(i);
        if taken_per_level[lvl] < cap {
            taken_per_level[lvl] += 1;
            support.push(i);
        }
    }
    support.sort_unstable();

    let mut kept = vec![false; x.len()];
    for &i in &support {
        kept[i] = true;
    }
    let sigma = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !kept[*i])
        .map(|(_, v)| v.norm())
        .sum();
    Ok((support, sigma))
}

/// How nonzero values are drawn by [`sample_sparse_distributed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnitudeModel {
    /// Unit modulus with uniform phase.
    UnitModulus,
    /// Standard complex Gaussian CN(0, 1).
    Gaussian,
}

/// Draws a vector supported on a uniformly random admissible support, with
/// values from the chosen magnitude model.
///
/// Uniformity is over all supports of size exactly `s` meeting the per-level
/// caps, via a log-domain dynamic program on per-level counts. Errors when no
/// such support exists.
pub fn sample_sparse_distributed<R: Rng>(
    partition: &LevelPartition,
    s: usize,
    lambda: f64,
    magnitudes: MagnitudeModel,
    rng: &mut R,
) -> Result<SignalVector, ModelError> {
    partition.check_lambda(lambda)?;
    let d = partition.num_levels();
    let sizes = partition.level_sizes();
    let cap = distribution_cap(s, lambda, d);
    let max_per_level: Vec<usize> = sizes.iter().map(|&nd| nd.min(cap)).collect();
    let capacity: usize = max_per_level.iter().sum();
    if capacity < s {
        return Err(ModelError::InfeasibleSupport { s, capacity });
    }

    let mut x = vec![Complex64::ZERO; partition.n()];
    if s == 0 {
        return Ok(x);
    }

    // ln binomial coefficients via a ln-factorial table.
    let n_max = sizes.iter().copied().max().unwrap();
    let mut ln_fact = vec![0.0f64; n_max + 1];
    for k in 1..=n_max {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let ln_choose = |n: usize, k: usize| ln_fact[n] - ln_fact[k] - ln_fact[n - k];

    // ways[d][t]: ln of the number of admissible placements of t indices into
    // levels d.. (log-sum-exp over the count chosen for level d).
    const NEG_INF: f64 = f64::NEG_INFINITY;
    let mut ways = vec![vec![NEG_INF; s + 1]; d + 1];
    ways[d][0] = 0.0;
    for lvl in (0..d).rev() {
        for t in 0..=s {
            let mut terms: Vec<f64> = Vec::new();
            for k in 0..=max_per_level[lvl].min(t) {
                let rest = ways[lvl + 1][t - k];
                if rest > NEG_INF {
                    terms.push(ln_choose(sizes[lvl], k) + rest);
                }
            }
            ways[lvl][t] = log_sum_exp(&terms);
        }
    }

    let mut remaining = s;
    let mut support: Vec<usize> = Vec::with_capacity(s);
    for lvl in 0..d {
        let mut weights: Vec<(usize, f64)> = Vec::new();
        for k in 0..=max_per_level[lvl].min(remaining) {
            let rest = ways[lvl + 1][remaining - k];
            if rest > NEG_INF {
                weights.push((k, ln_choose(sizes[lvl], k) + rest));
            }
        }
        let k = sample_log_weights(&weights, rng);
        let picks = rand::seq::index::sample(rng, sizes[lvl], k);
        for p in picks.iter() {
            support.push(partition.level_indices(lvl)[p]);
        }
        remaining -= k;
    }
    debug_assert_eq!(remaining, 0);

    for &i in &support {
        x[i] = match magnitudes {
            MagnitudeModel::UnitModulus => {
                Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
            }
            MagnitudeModel::Gaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        };
    }
    Ok(x)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn sample_log_weights<R: Rng>(weights: &[(usize, f64)], rng: &mut R) -> usize {
    debug_assert!(!weights.is_empty());
    let m = weights.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    let probs: Vec<f64> = weights.iter().map(|w| (w.1 - m).exp()).collect();
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (w, p) in weights.iter().zip(&probs) {
        if u < *p {
            return w.0;
        }
        u -= p;
    }
    weights.last().unwrap().0
}
