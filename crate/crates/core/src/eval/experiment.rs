use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{mean, spearman, std_dev, topk_accuracy, EvalError, ReportRow, REPORT_SCHEMA_VERSION};
use crate::dataset::{subset_training, Dataset, DatasetError, Split};
use crate::dsp::FeatureKind;
use crate::exec::Exec;
use crate::lut::{fit_lut_pixels, LookupTable};
use crate::nn::{build_model_for, predict_scores, topk_indices, train, CnnModel, EpochMetrics, TrainConfig, Variant};
use crate::pipeline::dataset_tensors;
use crate::{Error, Result};

/// A beam predictor under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Predictor {
    Cnn(Variant),
    /// Lookup table over range-angle maps with this angle FFT size.
    Lut(usize),
}

impl Predictor {
    pub fn feature_kind(self) -> FeatureKind {
        match self {
            Predictor::Cnn(v) => v.feature_kind(),
            Predictor::Lut(m) => FeatureKind::RangeAngle { angle_fft_size: m },
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Cnn(v) => write!(f, "cnn-{v}"),
            Predictor::Lut(m) => write!(f, "lut-{m}"),
        }
    }
}

impl FromStr for Predictor {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || EvalError::InvalidSpec(format!("unknown predictor `{s}` (cnn-<variant> or lut-<M>)"));
        if let Some(v) = lower.strip_prefix("cnn-") {
            return v.parse().map(Predictor::Cnn).map_err(|_| bad());
        }
        if let Some(m) = lower.strip_prefix("lut-") {
            return m.parse().ok().filter(|&m| m > 0).map(Predictor::Lut).ok_or_else(bad);
        }
        lower.parse().map(Predictor::Cnn).map_err(|_| bad())
    }
}

impl From<Predictor> for String {
    fn from(p: Predictor) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Predictor {
    type Error = EvalError;

    fn try_from(s: String) -> Result<Self, EvalError> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub predictors: Vec<Predictor>,
    /// Each seed sets the network initialization, the batch order and the
    /// training subset.
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
    pub percents: Vec<f64>,
    pub train: TrainConfig,
    pub exec: Exec,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidSpec(m.to_string()));
        if self.predictors.is_empty() {
            return bad("no predictors");
        }
        if self.seeds.is_empty() {
            return bad("no seeds");
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("k list must be non-empty and positive");
        }
        if self.percents.is_empty() || self.percents.iter().any(|&p| !(p > 0.0 && p <= 100.0)) {
            return bad("percents must lie in (0, 100]");
        }
        Ok(())
    }
}

/// One (predictor, seed, percent) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub predictor: Predictor,
    pub seed: u64,
    pub percent: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Accuracy per entry of [`ExperimentSpec::ks`].
    pub accuracies: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub metrics: Vec<EpochMetrics>,
    pub model: Option<CnnModel<f32>>,
    pub lut: Option<LookupTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub experiment: String,
    pub dataset: String,
    pub rows: Vec<ReportRow>,
    /// Per predictor: Spearman correlation between training percent and
    /// mean top-1 (first k), if at least two percents were run.
    pub spearman: Vec<(String, Option<f64>)>,
    pub param_counts: Vec<(String, usize)>,
}

impl EvalReport {
    /// Mean accuracy for `predictor` at `percent` and `k`.
    pub fn mean_accuracy(&self, predictor: Predictor, percent: f64, k: usize) -> Option<f64> {
        let name = predictor.to_string();
        self.rows
            .iter()
            .find(|r| r.seed == "mean" && r.predictor == name && r.percent == percent && r.k == k)
            .map(|r| r.accuracy)
    }
}

fn run_one(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    split: &Split,
    predictor: Predictor,
    seed: u64,
    percent: f64,
) -> Result<RunResult> {
    let kind = predictor.feature_kind();
    let train_idx = subset_training(&split.train, percent, seed)?;
    let labels = dataset.labels();
    let test_labels: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
    let k_max = spec.ks.iter().copied().max().unwrap_or(1);
    let n_beams = dataset.manifest.n_beams;
    let mut result = RunResult {
        predictor,
        seed,
        percent,
        n_train: train_idx.len(),
        n_test: split.test.len(),
        accuracies: Vec::new(),
        best_epoch: None,
        metrics: Vec::new(),
        model: None,
        lut: None,
    };
    let predictions: Vec<Vec<usize>> = match predictor {
        Predictor::Lut(_) => {
            let set = dataset.feature(kind).ok_or_else(|| {
                Error::from(DatasetError::Schema(format!("dataset has no {kind} features for {predictor}")))
            })?;
            let shape = [set.shape[1], set.shape[2]];
            let pixels: Vec<(usize, usize)> =
                train_idx.iter().map(|&i| (crate::dsp::argmax(set.sample(i)), labels[i])).collect();
            let lut = fit_lut_pixels(shape, n_beams, &pixels)?;
            let preds =
                spec.exec.try_map_range(split.test.len(), |j| lut.predict_values(set.sample(split.test[j]), k_max));
            result.lut = Some(lut);
            preds?
        }
        Predictor::Cnn(variant) => {
            let train_set = dataset_tensors(dataset, kind, &train_idx)?;
            let val_set = dataset_tensors(dataset, kind, &split.val)?;
            let test_set = dataset_tensors(dataset, kind, &split.test)?;
            let model = build_model_for(variant, dataset.manifest.cube_shape, n_beams, seed)?;
            let config = TrainConfig { seed, ..spec.train.clone() };
            let outcome = train(model, &train_set, &val_set, &config, spec.exec)?;
            let scores = predict_scores(&outcome.model, &test_set, spec.exec)?;
            result.best_epoch = Some(outcome.best_epoch);
            result.metrics = outcome.metrics;
            result.model = Some(outcome.model);
            scores.iter().map(|s| topk_indices(s, k_max)).collect()
        }
    };
    result.accuracies = topk_accuracy(&predictions, &test_labels, &spec.ks)?;
    Ok(result)
}

/// Trains and evaluates every (predictor, percent, seed) combination on the
/// test split and aggregates per-seed rows into mean rows. `on_run` sees
/// every finished run (for checkpoints and progress output).
pub fn run_experiment(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    split: &Split,
    mut on_run: impl FnMut(&RunResult) -> Result<()>,
) -> Result<EvalReport> {
    spec.validate()?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(EvalError::InvalidSpec("empty train or test split".into()).into());
    }
    let dataset_name = dataset.root.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "memory".into());
    let mut rows = Vec::new();
    let mut correlations = Vec::new();
    let mut param_counts = Vec::new();
    for &predictor in &spec.predictors {
        let mut mean_top1 = Vec::new();
        for &percent in &spec.percents {
            let mut per_seed: Vec<Vec<f64>> = Vec::new();
            let (mut n_train, mut n_test) = (0, 0);
            for &seed in &spec.seeds {
                let run = run_one(spec, dataset, split, predictor, seed, percent).map_err(|e| {
                    e.context(format!("experiment `{}`: {predictor}, seed {seed}, {percent}%", spec.name))
                })?;
                on_run(&run)?;
                (n_train, n_test) = (run.n_train, run.n_test);
                for (&k, &accuracy) in spec.ks.iter().zip(&run.accuracies) {
                    rows.push(ReportRow {
                        schema_version: REPORT_SCHEMA_VERSION,
                        experiment: spec.name.clone(),
                        dataset: dataset_name.clone(),
                        predictor: predictor.to_string(),
                        seed: seed.to_string(),
                        percent,
                        k,
                        accuracy,
                        std: None,
                        n_train: run.n_train,
                        n_test: run.n_test,
                    });
                }
                per_seed.push(run.accuracies);
            }
            for (j, &k) in spec.ks.iter().enumerate() {
                let values: Vec<f64> = per_seed.iter().map(|a| a[j]).collect();
                if j == 0 {
                    mean_top1.push(mean(&values));
                }
                rows.push(ReportRow {
                    schema_version: REPORT_SCHEMA_VERSION,
                    experiment: spec.name.clone(),
                    dataset: dataset_name.clone(),
                    predictor: predictor.to_string(),
                    seed: "mean".into(),
                    percent,
                    k,
                    accuracy: mean(&values),
                    std: Some(std_dev(&values)),
                    n_train,
                    n_test,
                });
            }
        }
        correlations.push((predictor.to_string(), spearman(&spec.percents, &mean_top1)));
        let kind = predictor.feature_kind();
        let shape = kind.shape(dataset.manifest.cube_shape);
        let params = match predictor {
            Predictor::Cnn(v) => {
                build_model_for(v, dataset.manifest.cube_shape, dataset.manifest.n_beams, 0)?.param_count()
            }
            Predictor::Lut(_) => shape[1] * shape[2],
        };
        param_counts.push((predictor.to_string(), params));
    }
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: spec.name.clone(),
        dataset: dataset_name,
        rows,
        spearman: correlations,
        param_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictor_names() {
        for p in [Predictor::Cnn(Variant::Ra64), Predictor::Cnn(Variant::Rc), Predictor::Lut(4), Predictor::Lut(64)] {
            assert_eq!(p.to_string().parse::<Predictor>().unwrap(), p);
        }
        assert_eq!("ra4".parse::<Predictor>().unwrap(), Predictor::Cnn(Variant::Ra4));
        assert!("lut-0".parse::<Predictor>().is_err());
        assert!("svm".parse::<Predictor>().is_err());
    }
}
