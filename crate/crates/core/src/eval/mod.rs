//! Top-K evaluation, multi-seed experiments, timing benchmarks and report
//! files.

mod bench;
mod experiment;
mod report;

use thiserror::Error;

pub use bench::{benchmark, percentile, BenchSpec, TimingRow};
pub use experiment::{run_experiment, EvalReport, ExperimentSpec, Predictor, RunResult};
pub use report::{read_jsonl, write_csv, write_jsonl, ReportRow, REPORT_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("prediction {sample} lists {len} beams, top-{k} needs {k}")]
    ShortPrediction { sample: usize, len: usize, k: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Fraction of samples whose label is among the first `k` entries of its
/// prediction list, for every `k` in `ks`.
pub fn topk_accuracy(predictions: &[Vec<usize>], labels: &[usize], ks: &[usize]) -> Result<Vec<f64>, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    if ks.contains(&0) {
        return Err(EvalError::ZeroK);
    }
    let k_max = ks.iter().copied().max().unwrap_or(0);
    if let Some((sample, p)) = predictions.iter().enumerate().find(|(_, p)| p.len() < k_max) {
        return Err(EvalError::ShortPrediction { sample, len: p.len(), k: k_max });
    }
    // Position of the label in each list (k_max if absent).
    let ranks: Vec<usize> =
        predictions.iter().zip(labels).map(|(p, l)| p[..k_max].iter().position(|x| x == l).unwrap_or(k_max)).collect();
    let n = labels.len().max(1) as f64;
    Ok(ks.iter().map(|&k| ranks.iter().filter(|&&r| r < k).count() as f64 / n).collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // Tied values share the average of their 1-based ranks.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either input is constant or shorter than two.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}
