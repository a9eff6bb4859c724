//! Isotropic row families and assembly of the measurement matrix.
//!
//! A base row family supplies vectors with `E[a a*] = I` and unit-modulus
//! entries. Pushing a base vector through a sensor profile gives the actual
//! sensing atoms:
//!
//! * distinct: one sensor per row, atom `H_c^* a` (an N-vector);
//! * identical: one shared draw feeds all sensors at once, atom
//!   `B = [H_1^* a | .. | H_C^* a]` (an N x C block).
//!
//! Assembly stacks `m` conjugated atom rows with the global `1/sqrt(p)`
//! scale already folded in, so the stored matrix is exactly the operator the
//! solver sees.

use crate::mat::DenseMatrix;
use crate::profiles::{DiagonalProfileSet, SamplingMode};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("expected {expected:?} mode, got {got:?}")]
    ModeMismatch { expected: SamplingMode, got: SamplingMode },
    #[error("{m} rows cannot be split into blocks of {divisor}")]
    RowsNotDivisible { m: usize, divisor: usize },
    #[error("an ensemble needs at least one row")]
    ZeroRows,
    #[error("expected {expected} row distributions, got {got}")]
    DistributionCount { expected: usize, got: usize },
    #[error("row distribution lives in dimension {dist}, profiles in {profiles}")]
    DimensionMismatch { dist: usize, profiles: usize },
    #[error("the family has no finite atom enumeration; use the Monte Carlo estimate")]
    NotEnumerable,
}

/// Base row family with unit coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    /// Rows of the N-point DFT at unit modulus: `a_k[j] = exp(-2 pi i k j / N)`,
    /// index `k` uniform. A finite family of N atoms.
    Fourier,
    /// Independent Rademacher entries, `a[j] = +/-1`. Isotropic with unit
    /// coherence but no tractable enumeration.
    RandomSign,
}

/// A concrete base distribution: a row kind pinned to a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDistribution {
    pub kind: RowKind,
    pub n: usize,
}

impl RowDistribution {
    pub fn new(kind: RowKind, n: usize) -> Self {
        Self { kind, n }
    }

    /// Smallest almost-sure bound on `||a||_inf^2`; 1 for both families.
    pub fn mu(&self) -> f64 {
        1.0
    }

    /// Number of atoms when the family is finite and uniformly weighted.
    pub fn exact_atom_count(&self) -> Option<usize> {
        match self.kind {
            RowKind::Fourier => Some(self.n),
            RowKind::RandomSign => None,
        }
    }

    /// The `k`-th atom of a finite family. Only valid when
    /// [`RowDistribution::exact_atom_count`] is `Some`.
    pub fn atom(&self, k: usize) -> Vec<Complex64> {
        match self.kind {
            RowKind::Fourier => {
                let n = self.n;
                (0..n)
                    .map(|j| {
                        let angle = -std::f64::consts::TAU * (k as f64) * (j as f64) / n as f64;
                        Complex64::from_polar(1.0, angle)
                    })
                    .collect()
            }
            RowKind::RandomSign => panic!("random-sign rows have no finite enumeration"),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<Complex64> {
        match self.kind {
            RowKind::Fourier => {
                let k = rng.random_range(0..self.n);
                self.atom(k)
            }
            RowKind::RandomSign => (0..self.n)
                .map(|_| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    Complex64::new(sign, 0.0)
                })
                .collect(),
        }
    }

    /// Sample and report the atom index when the family is finite.
    fn sample_labeled<R: Rng>(&self, rng: &mut R) -> (Vec<Complex64>, Option<usize>) {
        match self.kind {
            RowKind::Fourier => {
                let k = rng.random_range(0..self.n);
                (self.atom(k), Some(k))
            }
            RowKind::RandomSign => (self.sample(rng), None),
        }
    }
}

/// Sensor profiles paired with the base distributions feeding them: the
/// complete description of the sensing atom family.
///
/// Distinct mode carries one distribution per sensor (they may differ);
/// identical mode carries exactly one shared distribution.
#[derive(Debug, Clone)]
pub struct SensingFamily {
    profiles: DiagonalProfileSet,
    dists: Vec<RowDistribution>,
}

impl SensingFamily {
    pub fn new(
        profiles: DiagonalProfileSet,
        dists: Vec<RowDistribution>,
    ) -> Result<Self, SamplingError> {
        let expected = match profiles.mode() {
            SamplingMode::Distinct => profiles.sensors(),
            SamplingMode::Identical => 1,
        };
        if dists.len() != expected {
            return Err(SamplingError::DistributionCount { expected, got: dists.len() });
        }
        if let Some(bad) = dists.iter().find(|d| d.n != profiles.n()) {
            return Err(SamplingError::DimensionMismatch {
                dist: bad.n,
                profiles: profiles.n(),
            });
        }
        Ok(Self { profiles, dists })
    }

    /// Every sensor fed by the same base family.
    pub fn uniform_rows(
        profiles: DiagonalProfileSet,
        kind: RowKind,
    ) -> Result<Self, SamplingError> {
        let n = profiles.n();
        let count = match profiles.mode() {
            SamplingMode::Distinct => profiles.sensors(),
            SamplingMode::Identical => 1,
        };
        Self::new(profiles, vec![RowDistribution::new(kind, n); count])
    }

    pub fn profiles(&self) -> &DiagonalProfileSet {
        &self.profiles
    }

    pub fn distributions(&self) -> &[RowDistribution] {
        &self.dists
    }

    pub fn mode(&self) -> SamplingMode {
        self.profiles.mode()
    }

    pub fn n(&self) -> usize {
        self.profiles.n()
    }

    pub fn sensors(&self) -> usize {
        self.profiles.sensors()
    }

    /// Columns per atom: 1 (distinct) or C (identical).
    pub fn atom_cols(&self) -> usize {
        self.profiles.atom_cols()
    }

    /// Coherence of the base rows, `max_c mu(G_c)`.
    pub fn mu(&self) -> f64 {
        self.dists.iter().map(|d| d.mu()).fold(0.0, f64::max)
    }

    /// Total atom count when every base family is finite: `sum_c N_c` for
    /// distinct (sensor and base index enumerated jointly), `N` for identical.
    pub fn exact_atom_count(&self) -> Option<usize> {
        match self.mode() {
            SamplingMode::Distinct => {
                self.dists.iter().map(|d| d.exact_atom_count()).sum::<Option<usize>>()
            }
            SamplingMode::Identical => self.dists[0].exact_atom_count(),
        }
    }

    /// The `t`-th atom of a finite family, as an N x M block. Distinct mode
    /// enumerates sensor-major: `t = c * N_c + k`.
    pub fn atom(&self, t: usize) -> DenseMatrix {
        match self.mode() {
            SamplingMode::Distinct => {
                let per = self.dists[0].exact_atom_count().expect("finite family");
                let (c, k) = (t / per, t % per);
                self.atom_from_base(Some(c), &self.dists[c].atom(k))
            }
            SamplingMode::Identical => {
                self.atom_from_base(None, &self.dists[0].atom(t))
            }
        }
    }

    pub fn sample_atom<R: Rng>(&self, rng: &mut R) -> DenseMatrix {
        match self.mode() {
            SamplingMode::Distinct => {
                let c = rng.random_range(0..self.sensors());
                let base = self.dists[c].sample(rng);
                self.atom_from_base(Some(c), &base)
            }
            SamplingMode::Identical => {
                let base = self.dists[0].sample(rng);
                self.atom_from_base(None, &base)
            }
        }
    }

    /// Weight a base vector by profiles: column `c` holds `H_c^* a`.
    /// `sensor` picks a single column (distinct mode).
    fn atom_from_base(&self, sensor: Option<usize>, base: &[Complex64]) -> DenseMatrix {
        let n = self.n();
        match sensor {
            Some(c) => {
                let h = self.profiles.profile(c);
                DenseMatrix::from_fn(n, 1, |j, _| h[j].conj() * base[j])
            }
            None => {
                let c_count = self.sensors();
                DenseMatrix::from_fn(n, c_count, |j, c| {
                    self.profiles.profile(c)[j].conj() * base[j]
                })
            }
        }
    }
}

/// `||mean(B B*) - I||_max` by exhaustive enumeration of a finite atom
/// family. The residual is zero exactly when the weighted family is
/// isotropic, which for profile-weighted rows is the joint isometry
/// condition.
pub fn isotropy_residual_exact(family: &SensingFamily) -> Result<f64, SamplingError> {
    let n = family.n();
    let mut acc = DenseMatrix::zeros(n, n);
    match family.mode() {
        SamplingMode::Distinct => {
            // uniform over sensors, then uniform within each sensor's family
            let c_count = family.sensors();
            for c in 0..c_count {
                let count = family.dists[c]
                    .exact_atom_count()
                    .ok_or(SamplingError::NotEnumerable)?;
                let weight = 1.0 / (c_count * count) as f64;
                for k in 0..count {
                    let atom = family.atom_from_base(Some(c), &family.dists[c].atom(k));
                    accumulate_outer(&mut acc, &atom, weight);
                }
            }
        }
        SamplingMode::Identical => {
            let count = family.dists[0]
                .exact_atom_count()
                .ok_or(SamplingError::NotEnumerable)?;
            let weight = 1.0 / count as f64;
            for k in 0..count {
                let atom = family.atom_from_base(None, &family.dists[0].atom(k));
                accumulate_outer(&mut acc, &atom, weight);
            }
        }
    }
    Ok(acc.residual_from_identity())
}

/// Monte Carlo counterpart of [`isotropy_residual_exact`]: averages
/// `B B*` over `draws` sampled atoms. Error decays like `draws^{-1/2}`.
pub fn isotropy_residual_mc<R: Rng>(
    family: &SensingFamily,
    draws: usize,
    rng: &mut R,
) -> f64 {
    let n = family.n();
    let mut acc = DenseMatrix::zeros(n, n);
    let weight = 1.0 / draws as f64;
    for _ in 0..draws {
        let atom = family.sample_atom(rng);
        accumulate_outer(&mut acc, &atom, weight);
    }
    acc.residual_from_identity()
}

/// `acc += weight * B B*`.
fn accumulate_outer(acc: &mut DenseMatrix, b: &DenseMatrix, weight: f64) {
    let n = b.rows();
    let m = b.cols();
    for i in 0..n {
        for j in 0..n {
            let mut v = Complex64::ZERO;
            for col in 0..m {
                v += b.get(i, col) * b.get(j, col).conj();
            }
            let cur = acc.get(i, j);
            acc.set(i, j, cur + weight * v);
        }
    }
}

/// How distinct-mode rows are split across sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowAllocation {
    /// Each sensor contributes exactly `m / C` rows; requires `C | m`.
    EqualSplit,
    /// Every row first draws its sensor uniformly at random.
    RandomMixture,
}

/// Where one matrix row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowProvenance {
    pub sensor: usize,
    /// Draw ordinal: per sensor for equal-split, global for random-mixture,
    /// block index for identical mode.
    pub draw: usize,
    /// Base atom index when the family is finite (Fourier).
    pub atom: Option<usize>,
}

/// The assembled sensing operator: a dense `m x N` matrix with the
/// `1/sqrt(p)` scale folded in, plus per-row provenance and the seed that
/// produced it.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    matrix: DenseMatrix,
    mode: SamplingMode,
    sensors: usize,
    rows: Vec<RowProvenance>,
    seed: u64,
    scale: f64,
}

impl MeasurementEnsemble {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn row_provenance(&self) -> &[RowProvenance] {
        &self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The folded-in global scale `1/sqrt(p)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of base draws `p = m / M`.
    pub fn draws(&self) -> usize {
        let m_cols = self.mode.atom_cols(self.sensors);
        self.matrix.rows() / m_cols
    }
}

impl crate::mat::LinearOperator for MeasurementEnsemble {
    fn rows(&self) -> usize {
        self.matrix.rows()
    }

    fn cols(&self) -> usize {
        self.matrix.cols()
    }

    fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        self.matrix.apply_into(x, out)
    }

    fn adjoint_apply_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        self.matrix.adjoint_apply_into(y, out)
    }
}

fn push_row(
    matrix: &mut DenseMatrix,
    r: usize,
    base: &[Complex64],
    h: &[Complex64],
    scale: f64,
) {
    let row = matrix.row_mut(r);
    for (j, slot) in row.iter_mut().enumerate() {
        *slot = base[j].conj() * h[j] * scale;
    }
}

/// Stack `m` rows for distinct sampling: row `r` of sensor `c` is
/// `(1/sqrt(m)) a* H_c` with `a` drawn from that sensor's base family.
pub fn assemble_distinct(
    family: &SensingFamily,
    m: usize,
    allocation: RowAllocation,
    seed: u64,
) -> Result<MeasurementEnsemble, SamplingError> {
    if family.mode() != SamplingMode::Distinct {
        return Err(SamplingError::ModeMismatch {
            expected: SamplingMode::Distinct,
            got: family.mode(),
        });
    }
    if m == 0 {
        return Err(SamplingError::ZeroRows);
    }
    let c_count = family.sensors();
    if allocation == RowAllocation::EqualSplit && m % c_count != 0 {
        return Err(SamplingError::RowsNotDivisible { m, divisor: c_count });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = family.n();
    let scale = 1.0 / (m as f64).sqrt();
    let mut matrix = DenseMatrix::zeros(m, n);
    let mut rows = Vec::with_capacity(m);
    match allocation {
        RowAllocation::EqualSplit => {
            let per_sensor = m / c_count;
            let mut r = 0;
            for c in 0..c_count {
                for draw in 0..per_sensor {
                    let (base, atom) = family.dists[c].sample_labeled(&mut rng);
                    push_row(&mut matrix, r, &base, family.profiles.profile(c), scale);
                    rows.push(RowProvenance { sensor: c, draw, atom });
                    r += 1;
                }
            }
        }
        RowAllocation::RandomMixture => {
            for r in 0..m {
                let c = rng.random_range(0..c_count);
                let (base, atom) = family.dists[c].sample_labeled(&mut rng);
                push_row(&mut matrix, r, &base, family.profiles.profile(c), scale);
                rows.push(RowProvenance { sensor: c, draw: r, atom });
            }
        }
    }
    Ok(MeasurementEnsemble {
        matrix,
        mode: SamplingMode::Distinct,
        sensors: c_count,
        rows,
        seed,
        scale,
    })
}

/// Stack rows for identical sampling: each of the `p = m / C` base draws
/// contributes `C` consecutive rows `(1/sqrt(p)) a* H_c`, one per sensor.
pub fn assemble_identical(
    family: &SensingFamily,
    m: usize,
    seed: u64,
) -> Result<MeasurementEnsemble, SamplingError> {
    if family.mode() != SamplingMode::Identical {
        return Err(SamplingError::ModeMismatch {
            expected: SamplingMode::Identical,
            got: family.mode(),
        });
    }
    if m == 0 {
        return Err(SamplingError::ZeroRows);
    }
    let c_count = family.sensors();
    if m % c_count != 0 {
        return Err(SamplingError::RowsNotDivisible { m, divisor: c_count });
    }
    let p = m / c_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = family.n();
    let scale = 1.0 / (p as f64).sqrt();
    let mut matrix = DenseMatrix::zeros(m, n);
    let mut rows = Vec::with_capacity(m);
    for draw in 0..p {
        let (base, atom) = family.dists[0].sample_labeled(&mut rng);
        for c in 0..c_count {
            let r = draw * c_count + c;
            push_row(&mut matrix, r, &base, family.profiles.profile(c), scale);
            rows.push(RowProvenance { sensor: c, draw, atom });
        }
    }
    Ok(MeasurementEnsemble {
        matrix,
        mode: SamplingMode::Identical,
        sensors: c_count,
        rows,
        seed,
        scale,
    })
}

/// Assemble in whichever mode the family is tagged with. The allocation is
/// only meaningful for distinct sampling and is ignored otherwise.
pub fn assemble(
    family: &SensingFamily,
    m: usize,
    allocation: RowAllocation,
    seed: u64,
) -> Result<MeasurementEnsemble, SamplingError> {
    match family.mode() {
        SamplingMode::Distinct => assemble_distinct(family, m, allocation, seed),
        SamplingMode::Identical => assemble_identical(family, m, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::LinearOperator;
    use crate::profiles::{banded_profiles, random_profiles, BandShape};

    fn fourier_dist(n: usize) -> RowDistribution {
        RowDistribution::new(RowKind::Fourier, n)
    }

    #[test]
    fn fourier_atoms_unit_modulus_and_orthogonal() {
        let d = fourier_dist(8);
        assert_eq!(d.exact_atom_count(), Some(8));
        let mut worst_inf: f64 = 0.0;
        for k in 0..8 {
            let a = d.atom(k);
            for v in &a {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            worst_inf = worst_inf.max(a.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max));
            for l in (k + 1)..8 {
                let b = d.atom(l);
                let ip: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
                assert!(ip.norm() < 1e-12, "atoms {k},{l} not orthogonal");
            }
        }
        // mu is the exhaustive sup of ||a||_inf^2 over the family
        assert!((worst_inf - d.mu()).abs() < 1e-14);
    }

    #[test]
    fn exact_isotropy_matches_joint_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let set = random_profiles(3, 10, SamplingMode::Distinct, &mut rng);
        let family = SensingFamily::uniform_rows(set, RowKind::Fourier).unwrap();
        assert!(isotropy_residual_exact(&family).unwrap() < 1e-12);

        let set = random_profiles(3, 10, SamplingMode::Identical, &mut rng);
        let family = SensingFamily::uniform_rows(set, RowKind::Fourier).unwrap();
        assert!(isotropy_residual_exact(&family).unwrap() < 1e-12);

        // a profile set that double-counts energy shows up as residual 1
        let bad = DiagonalProfileSet::new(
            SamplingMode::Identical,
            vec![vec![Complex64::ONE; 6], vec![Complex64::ONE; 6]],
        )
        .unwrap();
        let family = SensingFamily::uniform_rows(bad, RowKind::Fourier).unwrap();
        let r = isotropy_residual_exact(&family).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn random_sign_family_is_not_enumerable() {
        let set = DiagonalProfileSet::all_ones(6, SamplingMode::Identical);
        let family = SensingFamily::uniform_rows(set, RowKind::RandomSign).unwrap();
        assert!(family.exact_atom_count().is_none());
        assert!(matches!(
            isotropy_residual_exact(&family),
            Err(SamplingError::NotEnumerable)
        ));
    }

    /// Independent oracle: enumerate all 2^N sign patterns by hand and
    /// average the weighted outer products; the mean must be the identity.
    #[test]
    fn random_sign_exhaustive_oracle_identical_mode() {
        let n = 8;
        let (set, _) =
            banded_profiles(3, n, 1, 0, BandShape::SmoothOverlap, SamplingMode::Identical)
                .unwrap();
        let family = SensingFamily::uniform_rows(set, RowKind::RandomSign).unwrap();
        let mut acc = DenseMatrix::zeros(n, n);
        let total = 1usize << n;
        for pattern in 0..total {
            let base: Vec<Complex64> = (0..n)
                .map(|j| {
                    let sign = if pattern >> j & 1 == 1 { 1.0 } else { -1.0 };
                    Complex64::new(sign, 0.0)
                })
                .collect();
            let atom = family.atom_from_base(None, &base);
            accumulate_outer(&mut acc, &atom, 1.0 / total as f64);
        }
        assert!(acc.residual_from_identity() < 1e-12);
    }

    #[test]
    fn mc_isotropy_residual_decays_with_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let set = random_profiles(2, 8, SamplingMode::Distinct, &mut rng);
        let family = SensingFamily::uniform_rows(set, RowKind::RandomSign).unwrap();
        let mut rng_small = ChaCha8Rng::seed_from_u64(100);
        let small = isotropy_residual_mc(&family, 100, &mut rng_small);
        let mut rng_big = ChaCha8Rng::seed_from_u64(101);
        let big = isotropy_residual_mc(&family, 10_000, &mut rng_big);
        let ratio = small / big;
        assert!(
            (5.0..=20.0).contains(&ratio),
            "expected roughly sqrt(100) decay, got ratio {ratio} ({small} -> {big})"
        );
    }

    #[test]
    fn equal_split_layout_and_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = random_profiles(3, 6, SamplingMode::Distinct, &mut rng);
        let family = SensingFamily::uniform_rows(set.clone(), RowKind::Fourier).unwrap();
        let m = 9;
        let e = assemble_distinct(&family, m, RowAllocation::EqualSplit, 77).unwrap();
        assert_eq!((e.m(), e.n()), (9, 6));
        assert_eq!(e.draws(), 9);
        let scale = 1.0 / (m as f64).sqrt();
        assert_eq!(e.scale(), scale);
        for (r, prov) in e.row_provenance().iter().enumerate() {
            // sensor blocks are contiguous: rows 0..3 sensor 0, etc.
            assert_eq!(prov.sensor, r / 3);
            assert_eq!(prov.draw, r % 3);
            // bit-exact decomposition: row = conj(atom) .* h_c * scale
            let base = family.distributions()[prov.sensor].atom(prov.atom.unwrap());
            let h = set.profile(prov.sensor);
            for j in 0..6 {
                assert_eq!(e.matrix().get(r, j), base[j].conj() * h[j] * scale);
            }
        }
    }

    #[test]
    fn random_mixture_covers_sensors() {
        let set = random_profiles(
            4,
            6,
            SamplingMode::Distinct,
            &mut ChaCha8Rng::seed_from_u64(2),
        );
        let family = SensingFamily::uniform_rows(set, RowKind::Fourier).unwrap();
        // odd m is fine for the mixture
        let e = assemble_distinct(&family, 401, RowAllocation::RandomMixture, 3).unwrap();
        let mut seen = [false; 4];
        for prov in e.row_provenance() {
            seen[prov.sensor] = true;
        }
        assert!(seen.iter().all(|&s| s), "401 mixture rows missed a sensor");
    }

    #[test]
    fn identical_blocks_share_the_base_draw() {
        let n = 6;
        let (set, _) =
            banded_profiles(3, n, 1, 0, BandShape::Flat, SamplingMode::Identical).unwrap();
        let family = SensingFamily::uniform_rows(set.clone(), RowKind::RandomSign).unwrap();
        let e = assemble_identical(&family, 12, 9).unwrap();
        assert_eq!(e.draws(), 4);
        for block in 0..4 {
            for c in 0..3 {
                assert_eq!(e.row_provenance()[block * 3 + c].sensor, c);
                assert_eq!(e.row_provenance()[block * 3 + c].draw, block);
            }
            // rows of one block are profile-weighted copies of one vector:
            // row_c[j] * h_{c',j} == row_{c'}[j] * h_{c,j}
            for c in 0..3 {
                for c2 in (c + 1)..3 {
                    for j in 0..n {
                        let lhs = e.matrix().get(block * 3 + c, j) * set.profile(c2)[j];
                        let rhs = e.matrix().get(block * 3 + c2, j) * set.profile(c)[j];
                        assert!((lhs - rhs).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn assembly_rejects_bad_shapes() {
        let set = random_profiles(
            3,
            6,
            SamplingMode::Distinct,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let family = SensingFamily::uniform_rows(set, RowKind::Fourier).unwrap();
        assert!(matches!(
            assemble_distinct(&family, 10, RowAllocation::EqualSplit, 0),
            Err(SamplingError::RowsNotDivisible { .. })
        ));
        assert!(matches!(
            assemble_distinct(&family, 0, RowAllocation::RandomMixture, 0),
            Err(SamplingError::ZeroRows)
        ));
        assert!(matches!(
            assemble_identical(&family, 6, 0),
            Err(SamplingError::ModeMismatch { .. })
        ));

        let set = random_profiles(
            3,
            6,
            SamplingMode::Identical,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let family = SensingFamily::uniform_rows(set.clone(), RowKind::Fourier).unwrap();
        assert!(matches!(
            assemble_identical(&family, 8, 0),
            Err(SamplingError::RowsNotDivisible { .. })
        ));
        // identical families carry exactly one distribution
        assert!(matches!(
            SensingFamily::new(set, vec![fourier_dist(6); 3]),
            Err(SamplingError::DistributionCount { .. })
        ));
    }

    #[test]
    fn same_seed_reproduces_the_matrix() {
        let set = random_profiles(
            2,
            8,
            SamplingMode::Distinct,
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        let family = SensingFamily::uniform_rows(set, RowKind::RandomSign).unwrap();
        let a = assemble_distinct(&family, 6, RowAllocation::EqualSplit, 123).unwrap();
        let b = assemble_distinct(&family, 6, RowAllocation::EqualSplit, 123).unwrap();
        assert_eq!(a.matrix().data(), b.matrix().data());
        let c = assemble_distinct(&family, 6, RowAllocation::EqualSplit, 124).unwrap();
        assert_ne!(a.matrix().data(), c.matrix().data());
    }

    /// Complete enumeration sanity check: stacking every Fourier atom once
    /// (the deterministic counterpart of drawing p = N times) reproduces a
    /// perfect isometry, A* A = I.
    #[test]
    fn complete_fourier_stack_is_unitary() {
        let n = 8;
        // single sensor, trivial profile
        let set = DiagonalProfileSet::all_ones(n, SamplingMode::Distinct);
        let family = SensingFamily::uniform_rows(set.clone(), RowKind::Fourier).unwrap();
        let scale = 1.0 / (n as f64).sqrt();
        let dist = family.distributions()[0];
        let a = DenseMatrix::from_fn(n, n, |r, j| dist.atom(r)[j].conj() * scale);
        assert!(a.gram().residual_from_identity() < 1e-12);

        // identical mode, indicator profiles: all N blocks stacked
        let (set, _) =
            banded_profiles(2, n, 1, 0, BandShape::Flat, SamplingMode::Identical).unwrap();
        let family = SensingFamily::uniform_rows(set.clone(), RowKind::Fourier).unwrap();
        let scale = 1.0 / (n as f64).sqrt();
        let a = DenseMatrix::from_fn(2 * n, n, |r, j| {
            let (draw, c) = (r / 2, r % 2);
            family.distributions()[0].atom(draw)[j].conj() * set.profile(c)[j] * scale
        });
        assert!(a.gram().residual_from_identity() < 1e-12);
    }

    /// E[A* A] = I checked by averaging assembled Grams over many seeds.
    #[test]
    fn mean_gram_over_seeds_approaches_identity() {
        let n = 6;
        let (set, _) =
            banded_profiles(2, n, 1, 0, BandShape::SmoothOverlap, SamplingMode::Identical)
                .unwrap();
        let family = SensingFamily::uniform_rows(set, RowKind::Fourier).unwrap();
        let trials = 300;
        let mut acc = DenseMatrix::zeros(n, n);
        for seed in 0..trials {
            let e = assemble_identical(&family, 8, seed).unwrap();
            let g = e.matrix().gram();
            for i in 0..n {
                for j in 0..n {
                    let cur = acc.get(i, j);
                    acc.set(i, j, cur + g.get(i, j) / trials as f64);
                }
            }
        }
        let r = acc.residual_from_identity();
        assert!(r < 0.12, "mean Gram residual {r} too large for {trials} seeds");
    }

    #[test]
    fn ensemble_operator_matches_matrix() {
        let set = random_profiles(
            2,
            5,
            SamplingMode::Distinct,
            &mut ChaCha8Rng::seed_from_u64(8),
        );
        let family = SensingFamily::uniform_rows(set, RowKind::Fourier).unwrap();
        let e = assemble(&family, 4, RowAllocation::EqualSplit, 1).unwrap();
        let x: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, -1.0)).collect();
        assert_eq!(e.apply(&x), e.matrix().apply(&x));
        let y: Vec<Complex64> = (0..4).map(|i| Complex64::new(1.0, i as f64)).collect();
        assert_eq!(e.adjoint_apply(&y), e.matrix().adjoint_apply(&y));
    }
}
