//! Small CNN for beam classification: layers, model, loss, training and
//! checkpoints. Generic over `f32` (training) and `f64` (gradient checks).

mod checkpoint;
pub mod layers;
mod loss;
mod model;
mod real;
mod tensor;
mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use loss::{cross_entropy_loss, sample_loss, softmax, LossOutput};
pub use model::{build_model, build_model_for, CnnModel, ConvSpec, Grads, Layer, ModelSpec, Variant, Workspace};
pub use real::Real;
pub use tensor::{Scores, Tensor4};
pub use train::{
    batch_gradients, predict_scores, predict_topk, topk_indices, train, Adam, EpochMetrics, LabeledTensors,
    TrainConfig, TrainOutcome,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("unknown model variant {0:?} (expected rc, rv, ra64 or ra4)")]
    UnknownVariant(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
