//! Diagonal sensor profiles and the interference factor Υ.
//!
//! Sensor `c` sees `H_c x` where `H_c = diag(h_c)`. Profile sets come in two
//! normalizations, tied to how rows are drawn downstream:
//!
//! * distinct sampling (every sensor draws its own rows, M = 1):
//!   `(1/C) * sum_c |h_{c,i}|^2 = 1` for every index `i`;
//! * identical sampling (one shared draw, M = C):
//!   `sum_c |h_{c,i}|^2 = 1` for every index `i`.
//!
//! Υ measures how much the profiles concentrate energy against a level
//! partition; it multiplies the sparsity budget in the measurement-count
//! proxy. Small Υ (close to 1) means the sensor geometry is benign.

use crate::model::{LevelPartition, ModelError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How rows are shared between sensors; fixed at profile construction because
/// the isometry normalization differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Independent row draws per sensor; each block contributes M = 1 column.
    Distinct,
    /// One shared row draw pushed through every profile; M = C.
    Identical,
}

impl SamplingMode {
    /// Number of columns an atom contributes for `c` sensors.
    pub fn atom_cols(self, c: usize) -> usize {
        match self {
            SamplingMode::Distinct => 1,
            SamplingMode::Identical => c,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile set needs at least one sensor and a positive dimension")]
    Empty,
    #[error("profile {sensor} has length {got}, expected {expected}")]
    RaggedProfile { sensor: usize, got: usize, expected: usize },
    #[error("profile {sensor} entry {index} is not finite")]
    NonFiniteEntry { sensor: usize, index: usize },
    #[error("operation expects {expected:?} mode, profile set is {got:?}")]
    ModeMismatch { expected: SamplingMode, got: SamplingMode },
    #[error("profiles cover dimension {profiles}, partition covers {partition}")]
    DimensionMismatch { profiles: usize, partition: usize },
    #[error("isometry matrix must be tall: got {c} rows, {d} columns")]
    NotTall { c: usize, d: usize },
    #[error("matrix is not an isometry: residual {residual:.3e} exceeds 1e-10")]
    NotIsometry { residual: f64 },
    #[error("isometry has {d} columns but the partition has {levels} levels")]
    LevelCountMismatch { d: usize, levels: usize },
    #[error("banded profiles need at least two sensors, got {c}")]
    TooFewSensors { c: usize },
    #[error("band [{r1}, {r2}] exceeds the {d} available levels")]
    BandTooWide { r1: usize, r2: usize, d: usize },
    #[error("smooth-overlap tapers are only defined for the (r1, r2) = (1, 0) band")]
    UnsupportedShape,
    #[error("could not parse profile JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A set of `C` diagonal sensor profiles over `C^N`, tagged with the sampling
/// mode its normalization targets.
///
/// Construction checks shape and finiteness only; whether the set actually
/// satisfies the joint isometry condition is a measured quantity, see
/// [`DiagonalProfileSet::joint_isometry_residual`]. The constructors in this
/// module ([`piecewise_constant_profiles`], [`banded_profiles`]) produce sets
/// with residual at floating-point level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalProfileSet {
    mode: SamplingMode,
    profiles: Vec<Vec<Complex64>>,
}

impl DiagonalProfileSet {
    pub fn new(mode: SamplingMode, profiles: Vec<Vec<Complex64>>) -> Result<Self, ProfileError> {
        if profiles.is_empty() || profiles[0].is_empty() {
            return Err(ProfileError::Empty);
        }
        let n = profiles[0].len();
        for (sensor, p) in profiles.iter().enumerate() {
            if p.len() != n {
                return Err(ProfileError::RaggedProfile { sensor, got: p.len(), expected: n });
            }
            if let Some(index) = p.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(ProfileError::NonFiniteEntry { sensor, index });
            }
        }
        Ok(Self { mode, profiles })
    }

    /// The trivial single-sensor set `h_1 = (1, .., 1)`, which satisfies the
    /// joint isometry condition in either mode.
    pub fn all_ones(n: usize, mode: SamplingMode) -> Self {
        Self { mode, profiles: vec![vec![Complex64::ONE; n]] }
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn sensors(&self) -> usize {
        self.profiles.len()
    }

    pub fn n(&self) -> usize {
        self.profiles[0].len()
    }

    /// Columns per atom (M): 1 for distinct, C for identical.
    pub fn atom_cols(&self) -> usize {
        self.mode.atom_cols(self.sensors())
    }

    pub fn profile(&self, c: usize) -> &[Complex64] {
        &self.profiles[c]
    }

    pub fn profiles(&self) -> &[Vec<Complex64>] {
        &self.profiles
    }

    /// Largest deviation of the per-index energy sum from its target:
    /// `max_i | scale * sum_c |h_{c,i}|^2 - 1 |` with `scale = 1/C` for
    /// distinct mode and `1` for identical mode.
    pub fn joint_isometry_residual(&self) -> f64 {
        let scale = match self.mode {
            SamplingMode::Distinct => 1.0 / self.sensors() as f64,
            SamplingMode::Identical => 1.0,
        };
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            let energy: f64 = self.profiles.iter().map(|p| p[i].norm_sqr()).sum();
            worst = worst.max((scale * energy - 1.0).abs());
        }
        worst
    }

    /// JSON form `{"C", "N", "mode", "profiles": [[[re, im], ..], ..]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProfileSetJson::from(self)).expect("serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let raw: ProfileSetJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileSetJson {
    #[serde(rename = "C")]
    c: usize,
    #[serde(rename = "N")]
    n: usize,
    mode: SamplingMode,
    profiles: Vec<Vec<[f64; 2]>>,
}

impl From<&DiagonalProfileSet> for ProfileSetJson {
    fn from(set: &DiagonalProfileSet) -> Self {
        ProfileSetJson {
            c: set.sensors(),
            n: set.n(),
            mode: set.mode,
            profiles: set
                .profiles
                .iter()
                .map(|p| p.iter().map(|v| [v.re, v.im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<ProfileSetJson> for DiagonalProfileSet {
    type Error = ProfileError;

    fn try_from(raw: ProfileSetJson) -> Result<Self, ProfileError> {
        if raw.profiles.len() != raw.c {
            return Err(ProfileError::Empty);
        }
        let profiles: Vec<Vec<Complex64>> = raw
            .profiles
            .into_iter()
            .map(|p| p.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect();
        let set = DiagonalProfileSet::new(raw.mode, profiles)?;
        if set.n() != raw.n {
            return Err(ProfileError::RaggedProfile {
                sensor: 0,
                got: set.n(),
                expected: raw.n,
            });
        }
        Ok(set)
    }
}

fn check_pair(
    set: &DiagonalProfileSet,
    partition: &LevelPartition,
    expected: SamplingMode,
) -> Result<(), ProfileError> {
    if set.mode() != expected {
        return Err(ProfileError::ModeMismatch { expected, got: set.mode() });
    }
    if set.n() != partition.n() {
        return Err(ProfileError::DimensionMismatch {
            profiles: set.n(),
            partition: partition.n(),
        });
    }
    Ok(())
}

/// Interference factor for distinct sampling:
/// `Υ = (1/D) max_c sum_d ||h_c||_inf * ||P_{I_d} h_c||_inf`. Cost O(CN).
pub fn upsilon_distinct(
    set: &DiagonalProfileSet,
    partition: &LevelPartition,
) -> Result<f64, ProfileError> {
    check_pair(set, partition, SamplingMode::Distinct)?;
    let d = partition.num_levels() as f64;
    let mut worst = 0.0f64;
    for c in 0..set.sensors() {
        let h = set.profile(c);
        let global: f64 = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut sum = 0.0;
        for level in partition.levels() {
            let local: f64 = level.iter().map(|&i| h[i].norm()).fold(0.0, f64::max);
            sum += global * local;
        }
        worst = worst.max(sum / d);
    }
    Ok(worst)
}

/// Interference factor for identical sampling:
/// `Υ = (C/D) max_i sum_d max_{j in I_d} | sum_c conj(h_{c,i}) h_{c,j} |`.
/// Cost O(CN^2); fine at desk scale, this is the honest quadratic form.
pub fn upsilon_identical(
    set: &DiagonalProfileSet,
    partition: &LevelPartition,
) -> Result<f64, ProfileError> {
    check_pair(set, partition, SamplingMode::Identical)?;
    let n = set.n();
    let c_count = set.sensors();
    let d = partition.num_levels();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut level_max = vec![0.0f64; d];
        for j in 0..n {
            let mut k = Complex64::ZERO;
            for c in 0..c_count {
                k += set.profiles[c][i].conj() * set.profiles[c][j];
            }
            let lvl = partition.level_of(j);
            level_max[lvl] = level_max[lvl].max(k.norm());
        }
        let sum: f64 = level_max.iter().sum();
        worst = worst.max(sum);
    }
    Ok(worst * c_count as f64 / d as f64)
}

/// Υ in whichever mode the set is tagged with.
pub fn upsilon(
    set: &DiagonalProfileSet,
    partition: &LevelPartition,
) -> Result<f64, ProfileError> {
    match set.mode() {
        SamplingMode::Distinct => upsilon_distinct(set, partition),
        SamplingMode::Identical => upsilon_identical(set, partition),
    }
}

/// A tall complex matrix `V` (C x D, D <= C) with `V^* V = I`, used to blend
/// sensors across levels in [`piecewise_constant_profiles`].
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryMatrix {
    c: usize,
    d: usize,
    /// Row-major, `c * d` entries.
    data: Vec<Complex64>,
}

impl IsometryMatrix {
    /// Wraps entries without checking the isometry property; callers that
    /// need a certified isometry look at [`IsometryMatrix::residual`].
    pub fn new(c: usize, d: usize, data: Vec<Complex64>) -> Result<Self, ProfileError> {
        if d == 0 || d > c {
            return Err(ProfileError::NotTall { c, d });
        }
        if data.len() != c * d {
            return Err(ProfileError::RaggedProfile { sensor: 0, got: data.len(), expected: c * d });
        }
        Ok(Self { c, d, data })
    }

    pub fn rows(&self) -> usize {
        self.c
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.d + col]
    }

    /// First `d` columns of the unitary DFT on `C` points; every entry has
    /// magnitude `1/sqrt(C)`, the flattest possible isometry.
    pub fn fourier(c: usize, d: usize) -> Result<Self, ProfileError> {
        if d == 0 || d > c {
            return Err(ProfileError::NotTall { c, d });
        }
        let scale = 1.0 / (c as f64).sqrt();
        let mut data = Vec::with_capacity(c * d);
        for row in 0..c {
            for col in 0..d {
                let angle = -std::f64::consts::TAU * (row * col) as f64 / c as f64;
                data.push(Complex64::from_polar(scale, angle));
            }
        }
        Ok(Self { c, d, data })
    }

    /// Haar-ish random isometry: complex Gaussian entries orthonormalized by
    /// modified Gram-Schmidt with one re-orthogonalization pass.
    pub fn random<R: Rng>(c: usize, d: usize, rng: &mut R) -> Result<Self, ProfileError> {
        if d == 0 || d > c {
            return Err(ProfileError::NotTall { c, d });
        }
        let mut cols: Vec<Vec<Complex64>> = (0..d)
            .map(|_| {
                (0..c)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re, im)
                    })
                    .collect()
            })
            .collect();
        for j in 0..d {
            for _pass in 0..2 {
                for k in 0..j {
                    let proj: Complex64 = cols[k]
                        .iter()
                        .zip(&cols[j])
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    let prev = cols[k].clone();
                    for (v, p) in cols[j].iter_mut().zip(&prev) {
                        *v -= proj * p;
                    }
                }
            }
            let norm: f64 = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm > 1e-12, "degenerate Gaussian draw");
            for v in &mut cols[j] {
                *v /= norm;
            }
        }
        let mut data = vec![Complex64::ZERO; c * d];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * d + j] = *v;
            }
        }
        Ok(Self { c, d, data })
    }

    /// `max |(V^* V - I)_{kl}|`.
    pub fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.d {
            for l in 0..self.d {
                let mut acc = Complex64::ZERO;
                for row in 0..self.c {
                    acc += self.get(row, k).conj() * self.get(row, l);
                }
                let target = if k == l { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    /// Largest squared entry magnitude, `mu(V) = max |V_{c,d}|^2`.
    pub fn coherence(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }
}

/// `mu(V) = max |V_{c,d}|^2`; the flattest isometries reach `1/C`.
pub fn matrix_coherence(v: &IsometryMatrix) -> f64 {
    v.coherence()
}

/// Piecewise-constant profiles `h_{c,i} = sqrt(C/M) * V[c, level(i)]`.
///
/// Requires `V` to be an isometry to within 1e-10 and to have one column per
/// level. The resulting set satisfies joint isometry exactly up to the
/// isometry residual of `V`, and in identical mode its Υ is exactly `C/D`.
pub fn piecewise_constant_profiles(
    v: &IsometryMatrix,
    partition: &LevelPartition,
    mode: SamplingMode,
) -> Result<DiagonalProfileSet, ProfileError> {
    let residual = v.residual();
    if residual > 1e-10 {
        return Err(ProfileError::NotIsometry { residual });
    }
    if v.cols() != partition.num_levels() {
        return Err(ProfileError::LevelCountMismatch {
            d: v.cols(),
            levels: partition.num_levels(),
        });
    }
    let c = v.rows();
    let n = partition.n();
    let scale = (c as f64 / mode.atom_cols(c) as f64).sqrt();
    let profiles = (0..c)
        .map(|sensor| {
            (0..n)
                .map(|i| v.get(sensor, partition.level_of(i)) * scale)
                .collect()
        })
        .collect();
    DiagonalProfileSet::new(mode, profiles)
}

/// Taper shape for [`banded_profiles`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandShape {
    /// Constant magnitude on the band, split evenly between covering sensors.
    Flat,
    /// Raised-cosine energy cross-fade between the two sensors covering each
    /// level. Only defined for the `(r1, r2) = (1, 0)` band, where every
    /// level is covered by exactly two sensors.
    SmoothOverlap,
}

/// Banded profiles over `D = C - 1` balanced contiguous levels: sensor `c`
/// (0-based) is supported on levels `c - r1 ..= c + r2` clipped to range.
///
/// With `r1 = 1, r2 = 0` this is the parallel-acquisition layout where
/// neighbouring sensors overlap on one shared level. Returns the profile set
/// together with the partition it was built against. Levels are balanced
/// (sizes differ by at most one), exact `N/D` when `D` divides `N`.
pub fn banded_profiles(
    c: usize,
    n: usize,
    r1: usize,
    r2: usize,
    shape: BandShape,
    mode: SamplingMode,
) -> Result<(DiagonalProfileSet, LevelPartition), ProfileError> {
    if c < 2 {
        return Err(ProfileError::TooFewSensors { c });
    }
    let d = c - 1;
    if r1 + r2 > d || r1 >= c {
        return Err(ProfileError::BandTooWide { r1, r2, d });
    }
    let partition = LevelPartition::uniform(n, d)?;
    let scale = (c as f64 / mode.atom_cols(c) as f64).sqrt();
    let mut profiles = vec![vec![Complex64::ZERO; n]; c];

    match shape {
        BandShape::Flat => {
            for lvl in 0..d {
                let lo = lvl.saturating_sub(r2);
                let hi = (lvl + r1).min(c - 1);
                let cover = (hi - lo + 1) as f64;
                let amp = scale / cover.sqrt();
                for sensor in lo..=hi {
                    for &i in partition.level_indices(lvl) {
                        profiles[sensor][i] = Complex64::new(amp, 0.0);
                    }
                }
            }
        }
        BandShape::SmoothOverlap => {
            if (r1, r2) != (1, 0) {
                return Err(ProfileError::UnsupportedShape);
            }
            // Level lvl is covered by sensor lvl (handing off) and sensor
            // lvl + 1 (taking over); the raised-cosine split keeps
            // |h_lvl|^2 + |h_{lvl+1}|^2 constant across the level.
            for lvl in 0..d {
                let ids = partition.level_indices(lvl);
                let len = ids.len() as f64;
                for (p, &i) in ids.iter().enumerate() {
                    let t = (p as f64 + 0.5) / len;
                    let phase = std::f64::consts::FRAC_PI_2 * t;
                    profiles[lvl][i] = Complex64::new(scale * phase.cos(), 0.0);
                    profiles[lvl + 1][i] = Complex64::new(scale * phase.sin(), 0.0);
                }
            }
        }
    }
    let set = DiagonalProfileSet::new(mode, profiles)?;
    Ok((set, partition))
}

/// Random profile set that satisfies joint isometry exactly: each index gets
/// a random energy split across sensors (normalized) with uniform phases.
/// Handy for property tests and stress checks; not a physical design.
pub fn random_profiles<R: Rng>(
    c: usize,
    n: usize,
    mode: SamplingMode,
    rng: &mut R,
) -> DiagonalProfileSet {
    let target = match mode {
        SamplingMode::Distinct => c as f64,
        SamplingMode::Identical => 1.0,
    };
    let mut profiles = vec![vec![Complex64::ZERO; n]; c];
    for i in 0..n {
        let mut energies: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = energies.iter().sum();
        for e in &mut energies {
            *e *= target / total;
        }
        for (sensor, e) in energies.iter().enumerate() {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            profiles[sensor][i] = Complex64::from_polar(e.sqrt(), phase);
        }
    }
    DiagonalProfileSet::new(mode, profiles).expect("shape is valid by construction")
}
