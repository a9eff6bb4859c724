//! Phase-transition experiments: sweep (C, m, s) cells, run seeded recovery
//! trials in parallel, and emit grids, 50% contours, and plot data.
//!
//! Determinism is the load-bearing property here. Every trial derives its
//! signal, matrix, and noise seeds by hashing (master_seed, tag, C, m, s,
//! trial), so cells can run on any number of threads in any order and still
//! produce bit-identical grids. Success counts are integers divided once at
//! the end, which keeps the averages exact as well.

use crate::io::{write_sidecar, IoError};
use crate::mat::LinearOperator;
use crate::model::{
    distribution_cap, sample_sparse_distributed, LevelPartition, MagnitudeModel, ModelError,
};
use crate::profiles::{
    banded_profiles, piecewise_constant_profiles, BandShape, DiagonalProfileSet, IsometryMatrix,
    ProfileError, SamplingMode,
};
use crate::sampling::{assemble, RowAllocation, RowKind, SamplingError, SensingFamily};
use crate::solver::{basis_pursuit, recovery_error, SolverOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{field} must be non-empty")]
    EmptyField { field: &'static str },
    #[error("trials_per_cell must be at least 1")]
    ZeroTrials,
    #[error("max_solver_iterations must be at least 1")]
    ZeroIterations,
    #[error("sparsity {s} exceeds the signal dimension {n}")]
    SparsityTooLarge { s: usize, n: usize },
    #[error("eta must be finite and non-negative, got {eta}")]
    BadEta { eta: f64 },
    #[error("success_threshold must be positive and finite, got {threshold}")]
    BadThreshold { threshold: f64 },
    #[error("C = {c} does not divide m = {m}, but the configuration splits rows evenly")]
    RowsNotDivisibleByC { c: usize, m: usize },
    #[error("lambda = {lambda} is outside [1, {d}] for the C = {c} partition")]
    LambdaOutOfRange { lambda: f64, c: usize, d: usize },
    #[error("cell (C = {c}, s = {s}) cannot place {s} nonzeros under its per-level caps")]
    InfeasibleCell { c: usize, s: usize },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which diagonal profile construction the sweep uses. `C = 1` always falls
/// back to the trivial all-ones profile with a single level, whatever the
/// family says, because both constructions need at least two sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileFamily {
    /// Blend of a `C x levels` Fourier isometry over a uniform partition.
    PiecewiseConstant { levels: usize },
    /// Banded overlap profiles over `D = C - 1` uniform levels.
    Banded {
        r1: usize,
        r2: usize,
        #[serde(default = "default_band_shape")]
        shape: BandShape,
    },
}

fn default_band_shape() -> BandShape {
    BandShape::Flat
}

fn default_success_threshold() -> f64 {
    1e-3
}

fn default_allocation() -> RowAllocation {
    RowAllocation::EqualSplit
}

fn default_magnitudes() -> MagnitudeModel {
    MagnitudeModel::UnitModulus
}

fn default_max_solver_iterations() -> usize {
    2500
}

/// Full description of one phase-transition sweep. Serializable so runs are
/// reproducible from the config file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "C_list")]
    pub c_list: Vec<usize>,
    pub mode: SamplingMode,
    pub profile_family: ProfileFamily,
    pub distribution: RowKind,
    pub m_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub trials_per_cell: usize,
    /// Distribution slack for sampled supports; `None` uses the loosest
    /// admissible value (the level count), which leaves supports
    /// unconstrained.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub eta: f64,
    /// Relative l2 error below which a trial counts as a success.
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
    pub master_seed: u64,
    #[serde(default = "default_allocation")]
    pub allocation: RowAllocation,
    #[serde(default = "default_magnitudes")]
    pub magnitudes: MagnitudeModel,
    /// Per-trial solver budget. Experiments cap iterations well below the
    /// solver default; a trial that fails to certify within the budget
    /// counts as a failure, not an error.
    #[serde(default = "default_max_solver_iterations")]
    pub max_solver_iterations: usize,
}

impl ExperimentConfig {
    /// Profiles and partition for one sensor count from this config.
    pub fn profile_and_partition(
        &self,
        c: usize,
    ) -> Result<(DiagonalProfileSet, LevelPartition), HarnessError> {
        if c == 1 {
            let set = DiagonalProfileSet::all_ones(self.n, self.mode);
            return Ok((set, LevelPartition::single(self.n)?));
        }
        match self.profile_family {
            ProfileFamily::PiecewiseConstant { levels } => {
                let v = IsometryMatrix::fourier(c, levels)?;
                let partition = LevelPartition::uniform(self.n, levels)?;
                let set = piecewise_constant_profiles(&v, &partition, self.mode)?;
                Ok((set, partition))
            }
            ProfileFamily::Banded { r1, r2, shape } => {
                Ok(banded_profiles(c, self.n, r1, r2, shape, self.mode)?)
            }
        }
    }

    fn lambda_for(&self, partition: &LevelPartition) -> f64 {
        self.lambda
            .unwrap_or_else(|| partition.num_levels() as f64)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (field, empty) in [
            ("C_list", self.c_list.is_empty()),
            ("m_grid", self.m_grid.is_empty()),
            ("s_grid", self.s_grid.is_empty()),
        ] {
            if empty {
                return Err(HarnessError::EmptyField { field });
            }
        }
        if self.trials_per_cell == 0 {
            return Err(HarnessError::ZeroTrials);
        }
        if self.max_solver_iterations == 0 {
            return Err(HarnessError::ZeroIterations);
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(HarnessError::BadEta { eta: self.eta });
        }
        if !(self.success_threshold > 0.0 && self.success_threshold.is_finite()) {
            return Err(HarnessError::BadThreshold {
                threshold: self.success_threshold,
            });
        }
        for &s in &self.s_grid {
            if s == 0 || s > self.n {
                return Err(HarnessError::SparsityTooLarge { s, n: self.n });
            }
        }
        let split_rows = self.mode == SamplingMode::Identical
            || self.allocation == RowAllocation::EqualSplit;
        for &c in &self.c_list {
            if split_rows {
                for &m in &self.m_grid {
                    if m == 0 || m % c != 0 {
                        return Err(HarnessError::RowsNotDivisibleByC { c, m });
                    }
                }
            }
            let (_, partition) = self.profile_and_partition(c)?;
            let d = partition.num_levels();
            let lambda = self.lambda_for(&partition);
            if !(1.0..=d as f64).contains(&lambda) {
                return Err(HarnessError::LambdaOutOfRange { lambda, c, d });
            }
            let sizes = partition.level_sizes();
            for &s in &self.s_grid {
                let cap = distribution_cap(s, lambda, d);
                let reachable: usize = sizes.iter().map(|&len| len.min(cap)).sum();
                if reachable < s {
                    return Err(HarnessError::InfeasibleCell { c, s });
                }
            }
        }
        Ok(())
    }
}

/// One (C, m, s) cell of a completed sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    #[serde(rename = "C")]
    pub c: usize,
    pub m: usize,
    pub s: usize,
    pub success_prob: f64,
}

/// A completed sweep: the config echo plus one success probability per cell,
/// ordered by (C, m, s) with s fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub config: ExperimentConfig,
    pub cells: Vec<PhaseCell>,
}

impl PhaseGrid {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    fn cell_index(&self, ci: usize, mi: usize, si: usize) -> usize {
        (ci * self.config.m_grid.len() + mi) * self.config.s_grid.len() + si
    }

    pub fn success(&self, c: usize, m: usize, s: usize) -> Option<f64> {
        let ci = self.config.c_list.iter().position(|&v| v == c)?;
        let mi = self.config.m_grid.iter().position(|&v| v == m)?;
        let si = self.config.s_grid.iter().position(|&v| v == s)?;
        Some(self.cells[self.cell_index(ci, mi, si)].success_prob)
    }

    /// The s-sweep for one (C, m) slice, in s_grid order.
    fn s_slice(&self, ci: usize, mi: usize) -> Vec<(usize, f64)> {
        (0..self.config.s_grid.len())
            .map(|si| {
                let cell = &self.cells[self.cell_index(ci, mi, si)];
                (cell.s, cell.success_prob)
            })
            .collect()
    }
}

const TAG_SIGNAL: u64 = 1;
const TAG_MATRIX: u64 = 2;
const TAG_NOISE: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with a list of coordinates into an independent stream
/// seed. Platform-stable, order-sensitive, and collision-resistant enough
/// for experiment bookkeeping.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &p in parts {
        h = splitmix64(h ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    h
}

/// A complex vector drawn uniformly from the sphere of radius `eta`
/// (all-zero when `eta = 0`).
pub fn uniform_sphere_noise<R: Rng>(dim: usize, eta: f64, rng: &mut R) -> Vec<Complex64> {
    assert!(eta >= 0.0, "eta must be non-negative");
    if eta == 0.0 || dim == 0 {
        return vec![Complex64::ZERO; dim];
    }
    loop {
        let mut e: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = e.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            let scale = eta / norm;
            for v in &mut e {
                *v *= scale;
            }
            return e;
        }
    }
}

struct CellJob<'a> {
    config: &'a ExperimentConfig,
    family: &'a SensingFamily,
    partition: &'a LevelPartition,
    lambda: f64,
    c: usize,
    m: usize,
    s: usize,
}

fn trial_success(job: &CellJob, trial: usize) -> Result<bool, HarnessError> {
    let coords = [job.c as u64, job.m as u64, job.s as u64, trial as u64];
    let master = job.config.master_seed;
    let seed_of = |tag: u64| {
        let mut parts = [0u64; 5];
        parts[0] = tag;
        parts[1..].copy_from_slice(&coords);
        derive_seed(master, &parts)
    };

    let mut signal_rng = ChaCha8Rng::seed_from_u64(seed_of(TAG_SIGNAL));
    let x = sample_sparse_distributed(
        job.partition,
        job.s,
        job.lambda,
        job.config.magnitudes,
        &mut signal_rng,
    )?;
    let ensemble = assemble(job.family, job.m, job.config.allocation, seed_of(TAG_MATRIX))?;
    let mut y = ensemble.apply(&x);
    if job.config.eta > 0.0 {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed_of(TAG_NOISE));
        let e = uniform_sphere_noise(y.len(), job.config.eta, &mut noise_rng);
        for (yi, ei) in y.iter_mut().zip(&e) {
            *yi += ei;
        }
    }
    let opts = SolverOptions {
        eta: job.config.eta,
        max_iterations: job.config.max_solver_iterations,
        ..SolverOptions::default()
    };
    let result = basis_pursuit(&ensemble, &y, &opts);
    let err = recovery_error(&result.x_hat, &x);
    Ok(result.converged && err.rel_l2 <= job.config.success_threshold)
}

fn cell_success_prob(job: &CellJob) -> Result<f64, HarnessError> {
    let trials = job.config.trials_per_cell;
    let mut successes = 0usize;
    for t in 0..trials {
        if trial_success(job, t)? {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}

/// Run the full sweep. Cells execute in parallel on the ambient rayon pool;
/// per-trial seeding makes the result independent of scheduling.
pub fn run_phase_transition(config: &ExperimentConfig) -> Result<PhaseGrid, HarnessError> {
    config.validate()?;
    let mut per_c = Vec::with_capacity(config.c_list.len());
    for &c in &config.c_list {
        let (set, partition) = config.profile_and_partition(c)?;
        let lambda = config.lambda_for(&partition);
        let family = SensingFamily::uniform_rows(set, config.distribution)?;
        per_c.push((c, family, partition, lambda));
    }

    let mut coords = Vec::new();
    for ci in 0..config.c_list.len() {
        for &m in &config.m_grid {
            for &s in &config.s_grid {
                coords.push((ci, m, s));
            }
        }
    }

    let cells: Result<Vec<PhaseCell>, HarnessError> = coords
        .par_iter()
        .map(|&(ci, m, s)| {
            let (c, ref family, ref partition, lambda) = per_c[ci];
            let job = CellJob {
                config,
                family,
                partition,
                lambda,
                c,
                m,
                s,
            };
            Ok(PhaseCell {
                c,
                m,
                s,
                success_prob: cell_success_prob(&job)?,
            })
        })
        .collect();

    Ok(PhaseGrid {
        config: config.clone(),
        cells: cells?,
    })
}

/// One point of a 50% contour: the interpolated sparsity at which success
/// probability crosses one half for a fixed (C, m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub m: usize,
    pub s_star: f64,
    /// True when the slice never crosses 0.5 and the value is pinned to the
    /// boundary of the s grid.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourCurve {
    #[serde(rename = "C")]
    pub c: usize,
    pub points: Vec<ContourPoint>,
}

/// Contours for every sensor count in a grid, with the config echo kept for
/// sidecars and plot labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub config: ExperimentConfig,
    pub curves: Vec<ContourCurve>,
}

fn contour_point(slice: &[(usize, f64)], m: usize) -> ContourPoint {
    let last_above = slice.iter().rposition(|&(_, p)| p >= 0.5);
    match last_above {
        None => ContourPoint {
            m,
            s_star: slice[0].0 as f64,
            clamped: true,
        },
        Some(i) if i + 1 == slice.len() => ContourPoint {
            m,
            s_star: slice[i].0 as f64,
            clamped: true,
        },
        Some(i) => {
            let (s_lo, p_lo) = slice[i];
            let (s_hi, p_hi) = slice[i + 1];
            // p_lo >= 0.5 > p_hi by choice of i, so the denominator is positive
            let t = (p_lo - 0.5) / (p_lo - p_hi);
            ContourPoint {
                m,
                s_star: s_lo as f64 + t * (s_hi - s_lo) as f64,
                clamped: false,
            }
        }
    }
}

/// Interpolate the 50% success contour of each sensor count: per m, the
/// largest s at which the linearly interpolated success probability still
/// reaches one half. Slices that never cross are pinned to the s-grid
/// boundary and flagged.
pub fn contour50(grid: &PhaseGrid) -> ContourSet {
    let mut curves = Vec::with_capacity(grid.config.c_list.len());
    for (ci, &c) in grid.config.c_list.iter().enumerate() {
        let points = grid
            .config
            .m_grid
            .iter()
            .enumerate()
            .map(|(mi, &m)| contour_point(&grid.s_slice(ci, mi), m))
            .collect();
        curves.push(ContourCurve { c, points });
    }
    ContourSet {
        config: grid.config.clone(),
        curves,
    }
}

/// Output encodings for grids and contour curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmitFormat {
    Csv,
    Json,
    SvgPolyline,
}

fn write_csv_records(
    path: &Path,
    header: &[&str],
    records: impl Iterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(IoError::from)?;
    w.write_record(header).map_err(IoError::from)?;
    for rec in records {
        w.write_record(&rec).map_err(IoError::from)?;
    }
    w.flush().map_err(IoError::from)?;
    Ok(())
}

/// Write a grid as CSV (`C,m,s,success_prob`), JSON (the full [`PhaseGrid`]),
/// or an SVG of its 50% contours. Every file gets a `.meta.json` sidecar;
/// the sidecar path is returned.
pub fn emit_grid(
    grid: &PhaseGrid,
    format: EmitFormat,
    path: &Path,
) -> Result<PathBuf, HarnessError> {
    match format {
        EmitFormat::Csv => {
            write_csv_records(
                path,
                &["C", "m", "s", "success_prob"],
                grid.cells.iter().map(|cell| {
                    vec![
                        cell.c.to_string(),
                        cell.m.to_string(),
                        cell.s.to_string(),
                        cell.success_prob.to_string(),
                    ]
                }),
            )?;
        }
        EmitFormat::Json => {
            fs::write(path, serde_json::to_string_pretty(grid)?).map_err(IoError::from)?;
        }
        EmitFormat::SvgPolyline => {
            fs::write(path, render_contour_svg(&contour50(grid))).map_err(IoError::from)?;
        }
    }
    Ok(write_sidecar(path, &serde_json::to_value(&grid.config)?)?)
}

/// Write contour curves as CSV (`C,m,s_star,clamped`), JSON, or SVG, with a
/// sidecar as in [`emit_grid`].
pub fn emit_curves(
    set: &ContourSet,
    format: EmitFormat,
    path: &Path,
) -> Result<PathBuf, HarnessError> {
    match format {
        EmitFormat::Csv => {
            write_csv_records(
                path,
                &["C", "m", "s_star", "clamped"],
                set.curves.iter().flat_map(|curve| {
                    curve.points.iter().map(|p| {
                        vec![
                            curve.c.to_string(),
                            p.m.to_string(),
                            p.s_star.to_string(),
                            p.clamped.to_string(),
                        ]
                    })
                }),
            )?;
        }
        EmitFormat::Json => {
            fs::write(path, serde_json::to_string_pretty(set)?).map_err(IoError::from)?;
        }
        EmitFormat::SvgPolyline => {
            fs::write(path, render_contour_svg(set)).map_err(IoError::from)?;
        }
    }
    Ok(write_sidecar(path, &serde_json::to_value(&set.config)?)?)
}

pub fn load_grid_json(path: &Path) -> Result<PhaseGrid, HarnessError> {
    let text = fs::read_to_string(path).map_err(IoError::from)?;
    Ok(serde_json::from_str(&text)?)
}

const SVG_PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

/// A minimal self-contained plot: one polyline per sensor count, m on the
/// horizontal axis, interpolated s* on the vertical.
fn render_contour_svg(set: &ContourSet) -> String {
    let (width, height) = (640.0, 440.0);
    let (left, right, top, bottom) = (60.0, 610.0, 40.0, 400.0);

    let all_points: Vec<&ContourPoint> =
        set.curves.iter().flat_map(|c| c.points.iter()).collect();
    let (m_min, m_max) = all_points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.m as f64), hi.max(p.m as f64))
        });
    let (s_min, s_max) = all_points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.s_star), hi.max(p.s_star))
        });
    let m_span = (m_max - m_min).max(1e-9);
    let s_span = (s_max - s_min).max(1e-9);
    let x = |m: f64| left + (m - m_min) / m_span * (right - left);
    let y = |s: f64| bottom - (s - s_min) / s_span * (bottom - top);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"black\"/>\n\
         <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">m</text>\n",
        (left + right) / 2.0,
        bottom + 32.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">s at 50% success</text>\n",
        18.0,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{left}\" y=\"{}\" text-anchor=\"middle\">{m_min}</text>\n\
         <text x=\"{right}\" y=\"{0}\" text-anchor=\"middle\">{m_max}</text>\n",
        bottom + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{s_min:.1}</text>\n\
         <text x=\"{0}\" y=\"{}\" text-anchor=\"end\">{s_max:.1}</text>\n",
        left - 6.0,
        bottom + 4.0,
        top + 4.0
    ));

    for (k, curve) in set.curves.iter().enumerate() {
        let color = SVG_PALETTE[k % SVG_PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.m as f64), y(p.s_star)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        if let Some(last) = curve.points.last() {
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">C={}</text>\n",
                x(last.m as f64) + 6.0,
                y(last.s_star),
                curve.c
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
