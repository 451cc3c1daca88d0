//! Radar-aided mmWave beam prediction.
//!
//! The crate covers the whole pipeline from a parametric street scene to a
//! top-K beam accuracy report:
//!
//! * [`sim`] synthesizes raw FMCW radar cubes (RX antenna × fast time × chirp)
//!   for drive-by scenes,
//! * [`oracle`] labels each scene with the best beam of an oversampled
//!   steering codebook by exhaustive search,
//! * [`dsp`] turns raw cubes into range-angle, range-velocity and radar-cube
//!   feature maps,
//! * [`nn`] is a small from-scratch CNN stack with Adam training,
//! * [`lut`] is the argmax-pixel lookup-table baseline,
//! * [`dataset`] persists labeled samples and performs deterministic splits,
//! * [`eval`] computes top-K accuracies, runs multi-seed experiments and
//!   times preprocessing and inference.
//!
//! Data-parallel loops go through [`exec::Exec`]; building without the
//! default `parallel` feature turns every parallel path into a sequential one.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod codec;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod exec;
pub mod lut;
pub mod nn;
pub mod oracle;
pub mod pipeline;
pub mod sim;

pub use error::{Error, ErrorCategory, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
