//! Basis-pursuit recovery with a noise ball, plus small-scale verification
//! oracles.
//!
//! The solve is `min ||z||_1 subject to ||A z - y||_2 <= eta`, handled by a
//! first-order primal-dual splitting (Chambolle-Pock). Each iteration costs
//! one `apply` and one `adjoint_apply`; convergence is certified by a
//! computable primal-dual gap rather than iterate stagnation, so a
//! `converged` result is a genuine optimality statement.

use crate::mat::{inner, norm1, norm2, norm_inf, solve_dense, DenseMatrix, LinearOperator};
use crate::model::{distribution_cap, LevelPartition};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("exhaustive oracle limited to N <= {max_n} and s_max <= {max_s}, got N = {n}, s_max = {s_max}")]
    InstanceTooLarge { n: usize, s_max: usize, max_n: usize, max_s: usize },
    #[error("operator maps dimension {cols} but measurement has length {got}")]
    DimensionMismatch { cols: usize, got: usize },
}

/// Options for [`basis_pursuit`]. The two tolerances are relative: they are
/// multiplied by `max(1, ||y||_2)` inside the solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Radius of the noise ball, `eta >= 0`.
    pub eta: f64,
    pub max_iterations: usize,
    /// Primal-dual gap certificate threshold (relative).
    pub primal_dual_gap_tol: f64,
    /// Allowed overshoot of the ball constraint (relative).
    pub feasibility_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eta: 0.0,
            max_iterations: 20_000,
            primal_dual_gap_tol: 1e-8,
            feasibility_tol: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn with_eta(eta: f64) -> Self {
        Self { eta, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub x_hat: Vec<Complex64>,
    pub iterations: usize,
    /// `||A x_hat - y||_2` at the returned iterate.
    pub residual_norm: f64,
    /// `||x_hat||_1`.
    pub objective: f64,
    /// Certified: the primal-dual gap and the feasibility overshoot both
    /// passed their thresholds. When false the best iterate seen is returned.
    pub converged: bool,
    /// Last evaluated primal-dual gap (clamped at zero).
    pub gap: f64,
}

/// Largest singular value of `A` by power iteration on `A^* A`: 20 rounds or
/// a relative change below 1e-6, whichever comes first. The start vector is
/// drawn from a fixed internal seed so the estimate is deterministic.
pub fn power_method<Op: LinearOperator + ?Sized>(a: &Op) -> f64 {
    let n = a.cols();
    let m = a.rows();
    if n == 0 || m == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E37_79B9_7F4A_7C15);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let nv = norm2(&v);
    if nv == 0.0 {
        return 0.0;
    }
    for x in &mut v {
        *x /= nv;
    }
    let mut av = vec![Complex64::ZERO; m];
    let mut atav = vec![Complex64::ZERO; n];
    let mut lambda = 0.0f64;
    for _ in 0..20 {
        a.apply_into(&v, &mut av);
        a.adjoint_apply_into(&av, &mut atav);
        let new_lambda = norm2(&atav);
        if new_lambda == 0.0 {
            return 0.0;
        }
        for (x, t) in v.iter_mut().zip(&atav) {
            *x = t / new_lambda;
        }
        if (new_lambda - lambda).abs() <= 1e-6 * new_lambda {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.sqrt()
}

/// Soft threshold for complex entries: shrink the modulus by `tau`, keep the
/// phase.
fn soft_threshold(x: &mut [Complex64], tau: f64) {
    for v in x.iter_mut() {
        let r = v.norm();
        if r <= tau {
            *v = Complex64::ZERO;
        } else {
            *v *= 1.0 - tau / r;
        }
    }
}

/// Solve `min ||z||_1 s.t. ||A z - y||_2 <= eta`.
///
/// Panics if `opts` is malformed (non-positive tolerances, negative eta) or
/// if `y` does not match the operator's row count. Non-convergence is not an
/// error: the result carries `converged = false` and the best iterate seen.
pub fn basis_pursuit<Op: LinearOperator + ?Sized>(
    a: &Op,
    y: &[Complex64],
    opts: &SolverOptions,
) -> RecoveryResult {
    assert!(opts.eta >= 0.0, "eta must be non-negative");
    assert!(
        opts.primal_dual_gap_tol > 0.0 && opts.feasibility_tol > 0.0,
        "tolerances must be positive"
    );
    assert_eq!(y.len(), a.rows(), "measurement length must match operator rows");
    let n = a.cols();
    let m = a.rows();
    let y_scale = norm2(y).max(1.0);
    let gap_tol = opts.primal_dual_gap_tol * y_scale;
    let feas_tol = opts.feasibility_tol * y_scale;

    let op_norm = power_method(a);
    if op_norm <= 1e-14 {
        // A = 0: the ball constraint is ||y|| <= eta, independent of z, and
        // the l1 minimum is z = 0 either way.
        let residual = norm2(y);
        return RecoveryResult {
            x_hat: vec![Complex64::ZERO; n],
            iterations: 0,
            residual_norm: residual,
            objective: 0.0,
            converged: residual <= opts.eta + feas_tol,
            gap: 0.0,
        };
    }
    // 2% headroom over the power-method estimate keeps tau * sigma * ||A||^2
    // strictly below 1 even if the estimate is slightly low.
    let step = 0.99 / (1.02 * op_norm);
    let (tau, sigma) = (step, step);

    let mut x = vec![Complex64::ZERO; n];
    let mut ax = vec![Complex64::ZERO; m];
    let mut ax_old = vec![Complex64::ZERO; m];
    let mut az_bar = vec![Complex64::ZERO; m];
    let mut w = vec![Complex64::ZERO; m];
    let mut u = vec![Complex64::ZERO; m];
    let mut atw = vec![Complex64::ZERO; n];

    let mut best_x = x.clone();
    let mut best_score = f64::INFINITY;
    let mut best_residual = norm2(y);
    let mut last_gap = f64::INFINITY;
    let mut iterations = 0;

    for it in 1..=opts.max_iterations {
        iterations = it;
        // dual step: w <- prox_{sigma f*}(w + sigma A z_bar)
        for i in 0..m {
            u[i] = w[i] + sigma * az_bar[i] - sigma * y[i];
        }
        let un = norm2(&u);
        let shrink = if un > 0.0 { (1.0 - sigma * opts.eta / un).max(0.0) } else { 0.0 };
        for i in 0..m {
            w[i] = u[i] * shrink;
        }
        // primal step: x <- soft_threshold(x - tau A^* w, tau)
        a.adjoint_apply_into(&w, &mut atw);
        for j in 0..n {
            x[j] -= tau * atw[j];
        }
        soft_threshold(&mut x, tau);
        std::mem::swap(&mut ax, &mut ax_old);
        a.apply_into(&x, &mut ax);
        // extrapolation, tracked in measurement space: A(2 x_new - x_old)
        for i in 0..m {
            az_bar[i] = 2.0 * ax[i] - ax_old[i];
        }

        if it % 10 == 0 || it == opts.max_iterations {
            let residual_vec: Vec<Complex64> = ax.iter().zip(y).map(|(a, b)| a - b).collect();
            let residual = norm2(&residual_vec);
            let feas_gap = (residual - opts.eta).max(0.0);
            // admissible dual point: scale w into ||A^* w||_inf <= 1
            a.adjoint_apply_into(&w, &mut atw);
            let dual_inf = norm_inf(&atw).max(1.0);
            let scale = 1.0 / dual_inf;
            let dual_value =
                -(inner(&w, y).re * scale) - opts.eta * norm2(&w) * scale;
            let objective = norm1(&x);
            let gap = (objective - dual_value).max(0.0);
            last_gap = gap;

            let score = (gap / y_scale).max(feas_gap / y_scale);
            if score < best_score {
                best_score = score;
                best_x.copy_from_slice(&x);
                best_residual = residual;
            }
            if gap <= gap_tol && feas_gap <= feas_tol {
                return RecoveryResult {
                    x_hat: x,
                    iterations: it,
                    residual_norm: residual,
                    objective,
                    converged: true,
                    gap,
                };
            }
        }
    }
    RecoveryResult {
        residual_norm: best_residual,
        objective: norm1(&best_x),
        x_hat: best_x,
        iterations,
        converged: false,
        gap: last_gap,
    }
}

/// Least squares of `y` against the columns of `a` restricted to `support`;
/// returns the coefficient vector embedded in `C^N` and the residual norm.
fn least_squares_on_support(
    a: &DenseMatrix,
    y: &[Complex64],
    support: &[usize],
) -> Option<(Vec<Complex64>, f64)> {
    let n = a.cols();
    let m = a.rows();
    let k = support.len();
    if k == 0 {
        return Some((vec![Complex64::ZERO; n], norm2(y)));
    }
    // normal equations on the k x k Gram; k <= 3 so conditioning is a
    // non-issue at these scales
    let mut gram = DenseMatrix::zeros(k, k);
    let mut rhs = vec![Complex64::ZERO; k];
    for (p, &jp) in support.iter().enumerate() {
        for (q, &jq) in support.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for r in 0..m {
                acc += a.get(r, jp).conj() * a.get(r, jq);
            }
            gram.set(p, q, acc);
        }
        let mut acc = Complex64::ZERO;
        for r in 0..m {
            acc += a.get(r, jp).conj() * y[r];
        }
        rhs[p] = acc;
    }
    let coeffs = solve_dense(&gram, &rhs)?;
    let mut x = vec![Complex64::ZERO; n];
    for (p, &j) in support.iter().enumerate() {
        x[j] = coeffs[p];
    }
    let mut residual = 0.0;
    for r in 0..m {
        let mut v = -y[r];
        for (p, &j) in support.iter().enumerate() {
            v += a.get(r, j) * coeffs[p];
        }
        residual += v.norm_sqr();
    }
    Some((x, residual.sqrt()))
}

/// Brute-force sparse recovery for verification: enumerate every support of
/// size at most `s_max` (optionally only those passing the per-level
/// distribution caps), least-squares fit each, and return the sparsest
/// consistent solution, falling back to the best fit found.
///
/// Deliberately restricted to tiny instances; this is the independent check
/// against which [`basis_pursuit`] is validated.
pub fn l0_oracle(
    a: &DenseMatrix,
    y: &[Complex64],
    s_max: usize,
    partition: Option<&LevelPartition>,
    lambda: Option<f64>,
) -> Result<Vec<Complex64>, SolverError> {
    const MAX_N: usize = 16;
    const MAX_S: usize = 3;
    let n = a.cols();
    if n > MAX_N || s_max > MAX_S {
        return Err(SolverError::InstanceTooLarge { n, s_max, max_n: MAX_N, max_s: MAX_S });
    }
    if y.len() != a.rows() {
        return Err(SolverError::DimensionMismatch { cols: a.rows(), got: y.len() });
    }
    let consistent_tol = 1e-8 * norm2(y).max(1.0);

    let admissible = |support: &[usize]| -> bool {
        let (Some(part), Some(lam)) = (partition, lambda) else {
            return true;
        };
        let cap = distribution_cap(support.len(), lam, part.num_levels());
        let mut counts = vec![0usize; part.num_levels()];
        for &j in support {
            counts[part.level_of(j)] += 1;
            if counts[part.level_of(j)] > cap {
                return false;
            }
        }
        true
    };

    let mut best: Option<(Vec<Complex64>, f64, usize)> = None;
    let mut support = Vec::with_capacity(s_max);
    // supports enumerated in order of increasing size so the first
    // consistent hit is the sparsest
    for size in 0..=s_max.min(n) {
        let mut found_consistent: Option<(Vec<Complex64>, f64)> = None;
        enumerate_supports(n, size, &mut support, 0, &mut |s| {
            if !admissible(s) {
                return;
            }
            if let Some((x, r)) = least_squares_on_support(a, y, s) {
                let better_overall = best.as_ref().map_or(true, |(_, br, bs)| {
                    r < *br - 1e-15 || (r <= *br + 1e-15 && size < *bs)
                });
                if better_overall {
                    best = Some((x.clone(), r, size));
                }
                if r <= consistent_tol {
                    let better = found_consistent.as_ref().map_or(true, |(_, cr)| r < *cr);
                    if better {
                        found_consistent = Some((x, r));
                    }
                }
            }
        });
        if let Some((x, _)) = found_consistent {
            return Ok(x);
        }
    }
    Ok(best.map(|(x, _, _)| x).unwrap_or_else(|| vec![Complex64::ZERO; n]))
}

fn enumerate_supports(
    n: usize,
    size: usize,
    current: &mut Vec<usize>,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if current.len() == size {
        visit(current);
        return;
    }
    let remaining = size - current.len();
    for j in start..=(n - remaining) {
        current.push(j);
        enumerate_supports(n, size, current, j + 1, visit);
        current.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub abs_l2: f64,
    pub rel_l2: f64,
    /// Supports agree after zeroing entries below `1e-7 * ||x_hat||_inf`
    /// (ten times the default feasibility tolerance).
    pub support_match: bool,
}

/// Standard recovery error metrics between an estimate and the truth.
pub fn recovery_error(x_hat: &[Complex64], x: &[Complex64]) -> ErrorReport {
    assert_eq!(x_hat.len(), x.len(), "vectors must have equal length");
    let mut diff_sq = 0.0;
    for (a, b) in x_hat.iter().zip(x) {
        diff_sq += (a - b).norm_sqr();
    }
    let abs_l2 = diff_sq.sqrt();
    let truth_norm = norm2(x);
    let rel_l2 = if truth_norm > 0.0 {
        abs_l2 / truth_norm
    } else if abs_l2 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let threshold = 10.0 * 1e-8 * norm_inf(x_hat);
    let support_match = x_hat
        .iter()
        .zip(x)
        .all(|(a, b)| (a.norm() > threshold) == (b.norm() > threshold));
    ErrorReport { abs_l2, rel_l2, support_match }
}
