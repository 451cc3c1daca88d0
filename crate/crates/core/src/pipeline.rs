//! Scene to labeled sample: synthesis, beam labeling and feature maps.

use crate::config::{FeatureConfig, RunConfig};
use crate::dataset::{Dataset, DatasetHeader, FeatureSet, Sample, SampleMeta};
use crate::dsp::{standardize_f32, FeatureKind, Preprocessor};
use crate::exec::Exec;
use crate::nn::{LabeledTensors, NnError};
use crate::oracle::{label_scene, BeamCodebook, CommConfig};
use crate::sim::{generate_scenario, scene_rng, synthesize_frame, RadarConfig, RadarFrame, Scene, TargetKind};
use crate::{Error, Result};

/// Stream of a scene's private RNG used for receiver noise.
pub const NOISE_STREAM: u64 = 0;

/// Stream of the run seed used to draw the scenario.
pub const SCENARIO_STREAM: u64 = 2;

/// Everything needed to turn scenes into samples.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub radar: RadarConfig,
    pub comm: CommConfig,
    pub codebook: BeamCodebook,
    pub kinds: Vec<FeatureKind>,
    pub clutter_removal: bool,
    pub keep_raw: bool,
    preprocessor: Preprocessor,
}

impl Pipeline {
    pub fn new(radar: &RadarConfig, comm: &CommConfig, features: &FeatureConfig, keep_raw: bool) -> Result<Self> {
        radar.validate()?;
        let codebook = comm.codebook()?;
        let sizes: Vec<usize> = features
            .kinds
            .iter()
            .filter_map(|k| match k {
                FeatureKind::RangeAngle { angle_fft_size } => Some(*angle_fft_size),
                _ => None,
            })
            .collect();
        let preprocessor = Preprocessor::for_config(radar).with_angle_sizes(&sizes);
        Ok(Pipeline {
            radar: radar.clone(),
            comm: comm.clone(),
            codebook,
            kinds: features.kinds.clone(),
            clutter_removal: features.clutter_removal,
            keep_raw,
            preprocessor,
        })
    }

    /// Synthesizes, labels and preprocesses one scene. Feature maps are
    /// computed from the cube rounded to the stored f32 precision, so
    /// recomputing them from a dataset's raw cubes reproduces them exactly.
    pub fn process(&self, scene: &Scene) -> Result<Sample> {
        let exact = synthesize_frame(&self.radar, scene, &mut scene_rng(scene.seed, NOISE_STREAM))?;
        let raw = exact.to_f32();
        let frame = RadarFrame::from_f32(exact.shape, &raw);
        let label = label_scene(scene, &self.comm, &self.codebook)?;
        let mut sample = Sample {
            meta: SampleMeta {
                label,
                scene_seed: scene.seed,
                timestamp_index: scene.timestamp_index,
                user: scene.user_truth().unwrap_or_default(),
                n_clutter: scene.count(TargetKind::Clutter) as u32,
                n_distractors: scene.count(TargetKind::Distractor) as u32,
                ..Default::default()
            },
            raw: self.keep_raw.then_some(raw),
            features: Default::default(),
        };
        for &kind in &self.kinds {
            let map = self.preprocessor.compute(&frame, kind, self.clutter_removal)?;
            sample.features.insert(kind, map.to_f32());
        }
        Ok(sample)
    }

    pub fn process_all(&self, scenes: &[Scene], exec: Exec) -> Result<Vec<Sample>> {
        exec.try_map_range(scenes.len(), |i| self.process(&scenes[i]).map_err(|e| e.context(format!("scene {i}"))))
    }
}

/// Dataset header matching a run configuration.
pub fn dataset_header(config: &RunConfig) -> DatasetHeader {
    DatasetHeader {
        cube_shape: config.radar.cube_shape(),
        n_beams: config.comm.n_beams,
        clutter_removal: config.features.clutter_removal,
        split: Some(config.split.clone()),
        radar: Some(config.radar.clone()),
        comm: Some(config.comm.clone()),
        scenario: Some(config.scenario.clone()),
    }
}

/// Generates, synthesizes, labels and preprocesses a whole run in memory
/// (raw cubes dropped).
pub fn simulate_dataset(config: &RunConfig, exec: Exec) -> Result<Dataset> {
    config.validate()?;
    let scenes = generate_scenes(config)?;
    let pipeline = Pipeline::new(&config.radar, &config.comm, &config.features, false)?;
    let samples = pipeline.process_all(&scenes, exec)?;
    Ok(Dataset::from_samples(dataset_header(config), samples)?)
}

/// Scenes of a run: `config.samples` drive-by frames drawn from
/// `config.seed`.
pub fn generate_scenes(config: &RunConfig) -> Result<Vec<Scene>> {
    let mut rng = scene_rng(config.seed, SCENARIO_STREAM);
    Ok(generate_scenario(&config.scenario, &config.radar, config.samples, &mut rng)?)
}

/// Stacks standardized network inputs of `indices` from a feature set.
pub fn labeled_tensors(set: &FeatureSet, labels: &[usize], indices: &[usize]) -> Result<LabeledTensors<f32>> {
    let len = set.sample_len();
    let mut data = Vec::with_capacity(indices.len() * len);
    for &i in indices {
        if i >= set.len() || i >= labels.len() {
            return Err(NnError::ShapeMismatch(format!("sample {i} of {}", set.len())).into());
        }
        let start = data.len();
        data.extend_from_slice(set.sample(i));
        standardize_f32(&mut data[start..]);
    }
    let labels = indices.iter().map(|&i| labels[i]).collect();
    Ok(LabeledTensors::new(set.shape, data, labels)?)
}

/// [`labeled_tensors`] for a stored dataset's feature kind.
pub fn dataset_tensors(dataset: &Dataset, kind: FeatureKind, indices: &[usize]) -> Result<LabeledTensors<f32>> {
    let set = dataset
        .feature(kind)
        .ok_or_else(|| Error::from(crate::dataset::DatasetError::Schema(format!("dataset has no {kind} features"))))?;
    labeled_tensors(set, &dataset.labels(), indices)
}
