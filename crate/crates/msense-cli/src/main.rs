//! Command-line driver: phase-transition sweeps, profile diagnostics,
//! ensemble assembly, recovery, and coherence reports, all reading and
//! writing the same JSON and CSV formats as the library.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use msense::*;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "msense", version, about = "Multi-sensor compressed sensing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Distinct,
    Identical,
}

impl From<ModeArg> for SamplingMode {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Distinct => SamplingMode::Distinct,
            ModeArg::Identical => SamplingMode::Identical,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Fourier,
    RandomSign,
}

impl From<KindArg> for RowKind {
    fn from(v: KindArg) -> Self {
        match v {
            KindArg::Fourier => RowKind::Fourier,
            KindArg::RandomSign => RowKind::RandomSign,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AllocationArg {
    EqualSplit,
    RandomMixture,
}

impl From<AllocationArg> for RowAllocation {
    fn from(v: AllocationArg) -> Self {
        match v {
            AllocationArg::EqualSplit => RowAllocation::EqualSplit,
            AllocationArg::RandomMixture => RowAllocation::RandomMixture,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a phase-transition sweep from a JSON config and write the grid
    /// (csv + json) and its 50% contours (csv + svg) into a directory.
    PhaseTransition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; falls back to MSENSE_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the interference factor of a profile set over a partition.
    Upsilon {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        /// Assert that the profile set was built for this sampling mode.
        #[arg(long)]
        mode: Option<ModeArg>,
    },
    /// Check the joint isometry residual of a profile set.
    CheckIsometry {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Assemble a measurement ensemble and export it as interleaved CSV.
    Assemble {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Fourier)]
        kind: KindArg,
        /// Total number of rows m.
        #[arg(long)]
        rows: usize,
        #[arg(long, value_enum, default_value_t = AllocationArg::EqualSplit)]
        allocation: AllocationArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve basis pursuit for a stored matrix and measurement vector.
    /// Exits 0 when the solver certifies convergence, 1 otherwise.
    Recover {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20000)]
        max_iterations: usize,
    },
    /// Estimate local coherence over a support set and print the report.
    Coherence {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        /// Comma-separated column indices, e.g. "3,17,40".
        #[arg(long)]
        delta: String,
        #[arg(long, value_enum, default_value_t = KindArg::Fourier)]
        kind: KindArg,
        /// Monte Carlo draw count; exact enumeration when omitted.
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, default_value_t = 8)]
        z_budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the measurement-count proxy lambda * s * mu * upsilon * L.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long)]
        upsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
}

fn load_profiles(path: &Path) -> Result<DiagonalProfileSet> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading profile set {}", path.display()))?;
    Ok(DiagonalProfileSet::from_json(&text)?)
}

fn load_partition(path: &Path) -> Result<LevelPartition> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading partition {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_delta(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .with_context(|| format!("bad support index {tok:?}"))
        })
        .collect()
}

fn install_thread_pool(threads: Option<usize>) -> Result<()> {
    let threads = threads.or_else(|| {
        std::env::var("MSENSE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("installing the worker pool")?;
    }
    Ok(())
}

fn cmd_phase_transition(
    config_path: &Path,
    out: &Path,
    threads: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    install_thread_pool(threads)?;
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)?;
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    config.validate()?;
    fs::create_dir_all(out)?;

    let grid = run_phase_transition(&config)?;
    let curves = contour50(&grid);
    emit_grid(&grid, EmitFormat::Csv, &out.join("grid.csv"))?;
    emit_grid(&grid, EmitFormat::Json, &out.join("grid.json"))?;
    emit_curves(&curves, EmitFormat::Csv, &out.join("contours.csv"))?;
    emit_curves(&curves, EmitFormat::SvgPolyline, &out.join("contours.svg"))?;

    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "cells": grid.cell_count(),
            "out": out.display().to_string(),
            "files": ["grid.csv", "grid.json", "contours.csv", "contours.svg"],
            "master_seed": grid.config.master_seed,
        }))?
    );
    Ok(())
}

fn cmd_upsilon(profiles: &Path, partition: &Path, mode: Option<ModeArg>) -> Result<()> {
    let set = load_profiles(profiles)?;
    let partition = load_partition(partition)?;
    if let Some(mode) = mode {
        let expected: SamplingMode = mode.into();
        if set.mode() != expected {
            bail!(
                "profile set was built for {:?} sampling, not {:?}",
                set.mode(),
                expected
            );
        }
    }
    let ups = msense::profiles::upsilon(&set, &partition)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "upsilon": ups,
            "mode": set.mode(),
            "C": set.sensors(),
            "N": set.n(),
            "D": partition.num_levels(),
        }))?
    );
    Ok(())
}

fn cmd_check_isometry(profiles: &Path, tol: f64) -> Result<bool> {
    let set = load_profiles(profiles)?;
    let residual = set.joint_isometry_residual();
    let ok = residual <= tol;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "residual": residual,
            "tol": tol,
            "ok": ok,
            "mode": set.mode(),
            "C": set.sensors(),
            "N": set.n(),
        }))?
    );
    Ok(ok)
}

fn cmd_assemble(
    profiles: &Path,
    kind: KindArg,
    rows: usize,
    allocation: AllocationArg,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let set = load_profiles(profiles)?;
    let family = SensingFamily::uniform_rows(set, kind.into())?;
    let ensemble = msense::sampling::assemble(&family, rows, allocation.into(), seed)?;
    let sidecar = write_ensemble_csv(out, &ensemble)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "out": out.display().to_string(),
            "sidecar": sidecar.display().to_string(),
            "m": ensemble.m(),
            "N": ensemble.n(),
            "mode": ensemble.mode(),
        }))?
    );
    Ok(())
}

fn cmd_recover(
    matrix: &Path,
    y_path: &Path,
    eta: f64,
    out: &Path,
    max_iterations: usize,
) -> Result<bool> {
    let a = read_matrix_csv(matrix)?;
    let y = read_vector_csv(y_path)?;
    if y.len() != a.rows() {
        bail!(
            "matrix has {} rows but y has {} entries",
            a.rows(),
            y.len()
        );
    }
    let opts = SolverOptions {
        eta,
        max_iterations,
        ..SolverOptions::default()
    };
    let result = basis_pursuit(&a, &y, &opts);
    write_vector_csv(out, &result.x_hat)?;
    write_sidecar(
        out,
        &json!({
            "matrix": matrix.display().to_string(),
            "y": y_path.display().to_string(),
            "eta": eta,
            "max_iterations": max_iterations,
        }),
    )?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "converged": result.converged,
            "iterations": result.iterations,
            "residual_norm": result.residual_norm,
            "objective": result.objective,
            "gap": result.gap,
            "out": out.display().to_string(),
        }))?
    );
    Ok(result.converged)
}

#[allow(clippy::too_many_arguments)]
fn cmd_coherence(
    profiles: &Path,
    partition: &Path,
    delta: &str,
    kind: KindArg,
    draws: Option<usize>,
    z_budget: usize,
    seed: u64,
) -> Result<()> {
    let set = load_profiles(profiles)?;
    let partition = load_partition(partition)?;
    let family = SensingFamily::uniform_rows(set, kind.into())?;
    let delta = parse_delta(delta)?;
    let budget = match draws {
        Some(count) => AtomBudget::Draws { count, seed },
        None => AtomBudget::Exact,
    };
    let report = coherence_report(&family, &partition, &delta, budget, z_budget, seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_bound(n: usize, s: usize, lambda: f64, mu: f64, upsilon: f64, epsilon: f64) -> Result<()> {
    let report = bound_report(n, s, lambda, mu, upsilon, epsilon)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::PhaseTransition { config, out, threads, seed } => {
            cmd_phase_transition(&config, &out, threads, seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Upsilon { profiles, partition, mode } => {
            cmd_upsilon(&profiles, &partition, mode)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckIsometry { profiles, tol } => {
            let ok = cmd_check_isometry(&profiles, tol)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Assemble { profiles, kind, rows, allocation, seed, out } => {
            cmd_assemble(&profiles, kind, rows, allocation, seed, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Recover { matrix, y, eta, out, max_iterations } => {
            let converged = cmd_recover(&matrix, &y, eta, &out, max_iterations)?;
            Ok(if converged { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Coherence { profiles, partition, delta, kind, draws, z_budget, seed } => {
            cmd_coherence(&profiles, &partition, &delta, kind, draws, z_budget, seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound { n, s, lambda, mu, upsilon, epsilon } => {
            cmd_bound(n, s, lambda, mu, upsilon, epsilon)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
