//! Wall-clock timing of preprocessing and inference on a single worker.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dsp::{preprocessing_cost, FeatureKind, Preprocessor};
use crate::lut::fit_lut_pixels;
use crate::nn::{build_model_for, Variant};
use crate::sim::{generate_scenario, scene_rng, synthesize_frame, RadarConfig, ScenarioConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub warmup: usize,
    pub iterations: usize,
    pub kinds: Vec<FeatureKind>,
    pub variants: Vec<Variant>,
    /// Angle FFT sizes of the lookup tables to time.
    pub luts: Vec<usize>,
    pub radar: RadarConfig,
    pub clutter_removal: bool,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            warmup: 3,
            iterations: 30,
            kinds: vec![FeatureKind::RA4, FeatureKind::RA64, FeatureKind::RangeVelocity, FeatureKind::RadarCube],
            variants: Variant::ALL.to_vec(),
            luts: vec![4, 64],
            radar: RadarConfig::default(),
            clutter_removal: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    /// `preprocess` or `inference`.
    pub stage: String,
    pub name: String,
    pub median_us: f64,
    pub p90_us: f64,
    pub input_size: usize,
    pub param_count: Option<usize>,
    pub flop_estimate: Option<f64>,
}

/// Nearest-rank percentile of `sorted` (ascending), `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn time_us(warmup: usize, iterations: usize, mut f: impl FnMut()) -> (f64, f64) {
    for _ in 0..warmup {
        f();
    }
    let mut samples: Vec<f64> = (0..iterations.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    (median(&samples), percentile(&samples, 0.9))
}

/// Median and p90 per-sample time of every preprocessing kind and model
/// variant, timed sequentially on the calling thread.
pub fn benchmark(spec: &BenchSpec) -> Result<Vec<TimingRow>> {
    let radar = &spec.radar;
    let cube = radar.cube_shape();
    let scenario = ScenarioConfig { clutter_count: 3, ..Default::default() };
    let scene = generate_scenario(&scenario, radar, 1, &mut scene_rng(spec.seed, 0))?.remove(0);
    let frame = synthesize_frame(radar, &scene, &mut scene_rng(scene.seed, 0))?;
    let sizes: Vec<usize> = spec
        .kinds
        .iter()
        .chain(spec.variants.iter().map(|v| v.feature_kind()).collect::<Vec<_>>().iter())
        .filter_map(|k| match k {
            FeatureKind::RangeAngle { angle_fft_size } => Some(*angle_fft_size),
            _ => None,
        })
        .chain(spec.luts.iter().copied())
        .collect();
    let pre = Preprocessor::for_config(radar).with_angle_sizes(&sizes);
    let mut rows = Vec::new();
    for &kind in &spec.kinds {
        pre.compute(&frame, kind, spec.clutter_removal)?;
        let (median_us, p90_us) = time_us(spec.warmup, spec.iterations, || {
            std::hint::black_box(pre.compute(&frame, kind, spec.clutter_removal).ok());
        });
        let cost = preprocessing_cost(kind, radar);
        rows.push(TimingRow {
            stage: "preprocess".into(),
            name: kind.to_string(),
            median_us,
            p90_us,
            input_size: cost.input_size,
            param_count: None,
            flop_estimate: Some(cost.flop_estimate),
        });
    }
    for &variant in &spec.variants {
        let model = build_model_for(variant, cube, 64, spec.seed)?;
        let mut input = pre.compute(&frame, variant.feature_kind(), spec.clutter_removal)?.to_f32();
        crate::dsp::standardize_f32(&mut input);
        let (median_us, p90_us) = time_us(spec.warmup, spec.iterations, || {
            std::hint::black_box(model.logits(&input).ok());
        });
        rows.push(TimingRow {
            stage: "inference".into(),
            name: format!("cnn-{variant}"),
            median_us,
            p90_us,
            input_size: input.len(),
            param_count: Some(model.param_count()),
            flop_estimate: None,
        });
    }
    for &m in &spec.luts {
        let kind = FeatureKind::RangeAngle { angle_fft_size: m };
        let map = pre.compute(&frame, kind, spec.clutter_removal)?;
        let [_, s, w] = map.shape;
        // Timing does not depend on the table contents; one entry per pixel.
        let pixels: Vec<(usize, usize)> = (0..s * w).map(|p| (p, p % 64)).collect();
        let lut = fit_lut_pixels([s, w], 64, &pixels)?;
        let (median_us, p90_us) = time_us(spec.warmup, spec.iterations, || {
            std::hint::black_box(lut.predict_values(&map.data, 1).ok());
        });
        rows.push(TimingRow {
            stage: "inference".into(),
            name: format!("lut-{m}"),
            median_us,
            p90_us,
            input_size: s * w,
            param_count: Some(lut.param_count()),
            flop_estimate: None,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.9), 9.0);
        assert_eq!(percentile(&v, 0.5), 5.0);
        assert_eq!(median(&v), 5.5);
        assert_eq!(median(&[3.0]), 3.0);
    }
}
