//! Report rows, written as CSV and as JSON lines with the same fields.
//!
//! Schema version 1, one row per (predictor, seed, percent, k):
//! `schema_version, experiment, dataset, predictor, seed, percent, k,
//! accuracy, std, n_train, n_test`. `seed` is a number for per-seed rows
//! and `mean` for the aggregate row, whose `std` holds the sample standard
//! deviation across seeds (empty on per-seed rows).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub schema_version: u32,
    pub experiment: String,
    pub dataset: String,
    pub predictor: String,
    pub seed: String,
    pub percent: f64,
    pub k: usize,
    pub accuracy: f64,
    pub std: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(rows: &[T], path: &Path) -> Result<(), EvalError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
