//! Labeled dataset persistence, deterministic splits and external ingest.
//!
//! A dataset is a directory:
//!
//! * `manifest.toml`: format name and version, sample count, cube shape,
//!   configuration snapshot, split settings and, for every binary file, its
//!   length and FNV-1a checksum,
//! * `records.bin`: one fixed-size record per sample (label, split, scene
//!   metadata, byte offset of its raw cube),
//! * `raw.bin` (optional): raw cubes, interleaved `(re, im)` f32,
//! * `features-<kind>.bin`: one file per feature kind, f32 magnitudes
//!   (not standardized).
//!
//! Every binary file starts with an 8-byte magic, a `u32` format version,
//! a `u32` sample count and a `[u32; 3]` per-sample shape. All values are
//! little endian.

mod external;
mod format;
mod split;

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::FeatureKind;
use crate::sim::UserTruth;

pub use external::{export_external, ingest_external, ExternalSchema};
pub use format::{
    add_features, read_dataset, write_dataset, DatasetHeader, DatasetWriter, FeatureEntry, FileEntry, Manifest,
    FORMAT_VERSION,
};
pub use split::{split_dataset, split_indices, subset_training, Split};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: bad magic bytes, not a dataset file")]
    BadMagic { file: String },
    #[error("{file}: format version {found}, this build reads version {expected}")]
    VersionMismatch { file: String, found: u32, expected: u32 },
    #[error("{file}: truncated ({found} bytes, expected {expected})")]
    Truncated { file: String, expected: u64, found: u64 },
    #[error("{file}: shape {found:?}, manifest says {expected:?}")]
    ShapeMismatch { file: String, expected: [usize; 3], found: [usize; 3] },
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("sample {sample}: label {label} outside 0..{n_beams}")]
    LabelOutOfRange { sample: usize, label: usize, n_beams: usize },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("missing or malformed data: {0}")]
    Schema(String),
    #[error("{0} already exists")]
    AlreadyExists(String),
    #[error("split fractions {0:?} must be positive and sum to 1")]
    BadFractions(Vec<f64>),
    #[error("percent {0} outside (0, 100]")]
    BadPercent(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
        move |source| DatasetError::Io { path: path.display().to_string(), source }
    }
}

/// Which partition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SplitTag {
    #[default]
    Unassigned,
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        [SplitTag::Unassigned, SplitTag::Train, SplitTag::Val, SplitTag::Test].get(code as usize).copied()
    }
}

/// Per-sample label and scene metadata.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleMeta {
    pub label: usize,
    pub split: SplitTag,
    pub scene_seed: u64,
    pub timestamp_index: u64,
    /// All zero for ingested data without ground truth.
    pub user: UserTruth,
    pub n_clutter: u32,
    pub n_distractors: u32,
}

/// One sample as produced by the pipeline or an importer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub meta: SampleMeta,
    /// Raw cube `[M_r][S][A]`, if kept.
    pub raw: Option<Vec<Complex32>>,
    /// Unstandardized feature maps.
    pub features: BTreeMap<FeatureKind, Vec<f32>>,
}

/// All maps of one kind, stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    pub shape: [usize; 3],
    pub clutter_removal: bool,
    pub data: Vec<f32>,
}

impl FeatureSet {
    pub fn sample_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.sample_len().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// A dataset loaded in memory. Raw cubes stay on disk and are read on
/// demand with [`Dataset::raw_cube`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: Option<PathBuf>,
    pub manifest: Manifest,
    pub samples: Vec<SampleMeta>,
    pub features: BTreeMap<FeatureKind, FeatureSet>,
    /// Byte offset of each sample's raw cube in the raw file.
    pub raw_offsets: Vec<u64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Indices of the samples tagged `tag`, ascending.
    pub fn indices(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.samples[i].split == tag).collect()
    }

    pub fn feature(&self, kind: FeatureKind) -> Option<&FeatureSet> {
        self.features.get(&kind)
    }
}
