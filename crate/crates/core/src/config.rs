//! Run configuration shared by the CLI and the dataset manifest. Files are
//! TOML; every section and key is optional and falls back to its default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::FeatureKind;
use crate::eval::Predictor;
use crate::nn::{TrainConfig, Variant};
use crate::oracle::CommConfig;
use crate::sim::{RadarConfig, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Feature maps computed for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub kinds: Vec<FeatureKind>,
    /// Static-clutter removal on range-angle maps.
    pub clutter_removal: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { kinds: vec![FeatureKind::RA64], clutter_removal: false }
    }
}

/// Train/validation/test partition. Validation is carved from the training
/// part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub val_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.7, val_fraction_of_train: 0.1, seed: 0 }
    }
}

/// Predictors, metrics and timing settings for the train, baseline, eval and
/// bench commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub predictors: Vec<Predictor>,
    pub ks: Vec<usize>,
    /// Percentages of the training split to train on.
    pub percents: Vec<f64>,
    pub bench_warmup: usize,
    pub bench_iterations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            predictors: vec![Predictor::Cnn(Variant::Ra64)],
            ks: vec![1, 3, 5],
            percents: vec![100.0],
            bench_warmup: 3,
            bench_iterations: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    /// Store raw radar cubes alongside the feature maps.
    pub keep_raw: bool,
    pub radar: RadarConfig,
    pub scenario: ScenarioConfig,
    pub comm: CommConfig,
    pub features: FeatureConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 2000,
            keep_raw: false,
            radar: RadarConfig::default(),
            scenario: ScenarioConfig::default(),
            comm: CommConfig::default(),
            features: FeatureConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// Checks every section for internal consistency.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.radar.validate().map_err(|e| invalid(&e))?;
        self.scenario.validate(&self.radar).map_err(|e| invalid(&e))?;
        self.comm.codebook().map_err(|e| invalid(&e))?;
        self.train.validate().map_err(|e| invalid(&e))?;
        if self.features.kinds.is_empty() {
            return Err(ConfigError::Invalid("features.kinds is empty".into()));
        }
        for kind in &self.features.kinds {
            if let FeatureKind::RangeAngle { angle_fft_size } = *kind {
                if angle_fft_size < self.radar.rx_antennas {
                    return Err(ConfigError::Invalid(format!(
                        "{kind} needs at least {} angle bins",
                        self.radar.rx_antennas
                    )));
                }
            }
        }
        let s = &self.split;
        if !(s.train_fraction > 0.0 && s.train_fraction <= 1.0) || !(0.0..1.0).contains(&s.val_fraction_of_train) {
            return Err(ConfigError::Invalid(format!("split fractions {s:?}")));
        }
        let e = &self.eval;
        if e.predictors.is_empty() || e.ks.is_empty() || e.ks.contains(&0) {
            return Err(ConfigError::Invalid("eval needs predictors and positive ks".into()));
        }
        if e.percents.is_empty() || e.percents.iter().any(|&p| !(p > 0.0 && p <= 100.0)) {
            return Err(ConfigError::Invalid(format!("eval.percents {:?} must lie in (0, 100]", e.percents)));
        }
        if self.samples == 0 {
            return Err(ConfigError::Invalid("samples must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_is_exact() {
        let mut cfg = RunConfig::default();
        cfg.radar.noise_power = 0.1 + 0.2;
        cfg.features.kinds = vec![FeatureKind::RA4, FeatureKind::RadarCube];
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\n[scenario]\nclutter_count = 5\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scenario.clutter_count, 5);
        assert_eq!(cfg.radar, RadarConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_kinds() {
        assert!(matches!(RunConfig::from_toml("[radar]\nbogus = 1\n"), Err(ConfigError::Parse(_))));
        assert!(RunConfig::from_toml("[features]\nkinds = [\"xy\"]\n").is_err());
    }

    #[test]
    fn default_is_valid() {
        RunConfig::default().validate().unwrap();
    }
}
