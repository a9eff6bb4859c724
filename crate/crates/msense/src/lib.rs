//! Compressed sensing with multiple sensors.
//!
//! One unknown signal `x` in C^N is observed through `C` sensors. Each sensor
//! modulates the signal with a diagonal profile and is then sampled with rows
//! drawn from an isotropic row distribution, either independently per sensor
//! (distinct sampling) or with one shared draw applied through every profile
//! (identical sampling). The crate covers the full pipeline:
//!
//! * [`model`]: level partitions, sparse-and-distributed supports, and the
//!   best-approximation machinery for that signal class.
//! * [`profiles`]: diagonal sensor profile sets, joint isometry checks, and
//!   the interference factor Υ that governs measurement budgets.
//! * [`sampling`]: row distributions, sensing families, and assembled
//!   measurement ensembles with reproducible seeding.
//! * [`solver`]: basis pursuit via a primal-dual splitting with a computable
//!   gap certificate, plus a brute-force l0 oracle for cross-checks.
//! * [`analysis`]: empirical local-coherence estimates and measurement-count
//!   proxies.
//! * [`harness`]: seeded phase-transition experiments, 50% contours, and
//!   CSV/JSON/SVG emission.
//!
//! Vectors are `Vec<num_complex::Complex64>` throughout; matrices are dense
//! row-major [`mat::DenseMatrix`]. All randomness flows through explicit
//! seeds, so every experiment is bit-reproducible.

pub mod analysis;
pub mod harness;
pub mod io;
pub mod mat;
pub mod model;
pub mod profiles;
pub mod sampling;
pub mod solver;

pub use analysis::{
    bound_report, coherence_report, gamma1_empirical, gamma2_estimate, log_factor_l,
    measurement_bound_proxy, AtomBudget, BoundReport, CoherenceEstimate,
};
pub use harness::{
    contour50, derive_seed, emit_curves, emit_grid, load_grid_json, run_phase_transition,
    uniform_sphere_noise, ContourCurve, ContourPoint, ContourSet, EmitFormat, ExperimentConfig,
    HarnessError, PhaseCell, PhaseGrid, ProfileFamily,
};
pub use io::{
    config_hash, fnv1a64, read_matrix_csv, read_vector_csv, write_ensemble_csv, write_matrix_csv,
    write_sidecar, write_vector_csv, IoError,
};
pub use mat::{DenseMatrix, LinearOperator};
pub use model::{LevelPartition, LocalSparsity, MagnitudeModel, SignalVector};
pub use profiles::{BandShape, DiagonalProfileSet, IsometryMatrix, SamplingMode};
pub use sampling::{MeasurementEnsemble, RowAllocation, RowDistribution, RowKind, SensingFamily};
pub use solver::{basis_pursuit, recovery_error, RecoveryResult, SolverOptions};
