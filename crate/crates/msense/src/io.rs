//! CSV and JSON persistence for matrices, vectors, and run metadata.
//!
//! Complex matrices are stored row-major with re/im interleaved, so an
//! `m x n` matrix becomes `m` CSV records of `2n` floating-point fields.
//! Vectors are column matrices (one `re,im` record per entry); the reader
//! also accepts a single-record row layout. Every emitted file can carry a
//! sidecar named `<file>.meta.json` with the producing configuration, an
//! FNV-1a hash of it, and the crate version, so outputs stay traceable.

use crate::mat::DenseMatrix;
use crate::sampling::MeasurementEnsemble;
use num_complex::Complex64;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("record {record}: field {field} is not a float: {message}")]
    BadField {
        record: usize,
        field: usize,
        message: String,
    },
    #[error("record {record} has {got} fields, expected {expected}")]
    RaggedRecord {
        record: usize,
        got: usize,
        expected: usize,
    },
    #[error("record {record} has an odd field count ({got}); re/im pairs required")]
    OddFieldCount { record: usize, got: usize },
    #[error("file holds no records")]
    Empty,
    #[error("expected a vector layout (single record or single re,im column), got {rows} x {cols}")]
    NotAVector { rows: usize, cols: usize },
}

/// FNV-1a, 64-bit. Stable across platforms and versions, used to fingerprint
/// configuration JSON in sidecars.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hex fingerprint of a JSON value's canonical serialization. `serde_json`
/// maps sort keys, so semantically equal configs hash identically.
pub fn config_hash(config: &Value) -> String {
    format!("{:016x}", fnv1a64(config.to_string().as_bytes()))
}

pub fn write_matrix_csv(path: &Path, a: &DenseMatrix) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let mut fields = Vec::with_capacity(2 * a.cols());
    for i in 0..a.rows() {
        fields.clear();
        for j in 0..a.cols() {
            let v = a.get(i, j);
            fields.push(v.re.to_string());
            fields.push(v.im.to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_records(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (ri, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(rec.len());
        for (fi, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|e: std::num::ParseFloatError| {
                IoError::BadField {
                    record: ri,
                    field: fi,
                    message: e.to_string(),
                }
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix, IoError> {
    let rows = parse_records(path)?;
    if rows.is_empty() {
        return Err(IoError::Empty);
    }
    let expected = rows[0].len();
    if expected == 0 || expected % 2 != 0 {
        return Err(IoError::OddFieldCount {
            record: 0,
            got: expected,
        });
    }
    for (ri, row) in rows.iter().enumerate() {
        if row.len() != expected {
            return Err(IoError::RaggedRecord {
                record: ri,
                got: row.len(),
                expected,
            });
        }
    }
    let cols = expected / 2;
    let mut a = DenseMatrix::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..cols {
            a.set(i, j, Complex64::new(row[2 * j], row[2 * j + 1]));
        }
    }
    Ok(a)
}

/// One `re,im` record per entry.
pub fn write_vector_csv(path: &Path, x: &[Complex64]) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for v in x {
        w.write_record([v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Accepts the column layout written by [`write_vector_csv`] or a single
/// interleaved record.
pub fn read_vector_csv(path: &Path) -> Result<Vec<Complex64>, IoError> {
    let a = read_matrix_csv(path)?;
    if a.cols() == 1 {
        return Ok((0..a.rows()).map(|i| a.get(i, 0)).collect());
    }
    if a.rows() == 1 {
        return Ok((0..a.cols()).map(|j| a.get(0, j)).collect());
    }
    Err(IoError::NotAVector {
        rows: a.rows(),
        cols: a.cols(),
    })
}

/// Write `<path>.meta.json` next to an output file: the configuration that
/// produced it, a hash of that configuration, and the crate version.
/// Returns the sidecar path.
pub fn write_sidecar(path: &Path, config: &Value) -> Result<PathBuf, IoError> {
    let mut name = path.as_os_str().to_os_string();
    name.push(".meta.json");
    let sidecar = PathBuf::from(name);
    let body = json!({
        "config": config,
        "config_hash": config_hash(config),
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(&sidecar, serde_json::to_string_pretty(&body)?)?;
    Ok(sidecar)
}

/// Export an assembled ensemble for cross-checking in external tools: the
/// matrix as interleaved CSV plus a sidecar recording how it was built.
pub fn write_ensemble_csv(path: &Path, ensemble: &MeasurementEnsemble) -> Result<PathBuf, IoError> {
    write_matrix_csv(path, ensemble.matrix())?;
    let config = json!({
        "seed": ensemble.seed(),
        "mode": ensemble.mode(),
        "m": ensemble.m(),
        "N": ensemble.n(),
        "C": ensemble.sensors(),
        "draws": ensemble.draws(),
        "scale": ensemble.scale(),
    });
    write_sidecar(path, &config)
}
