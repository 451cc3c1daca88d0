//! FMCW radar simulation: radar parameters, drive-by scenes and raw cube
//! synthesis.

mod config;
mod scene;
mod synth;

pub use config::{derive_radar_limits, RadarConfig, RadarLimits};
pub use scene::{generate_scenario, ScenarioConfig, Scene, Target, TargetKind, UserTruth};
pub use synth::{scene_rng, synthesize_frame, RadarFrame};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("radar parameter `{name}` must be positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("ADC window {window_s:e} s does not fit in the chirp repetition interval {repetition_s:e} s")]
    AdcWindowTooLong { window_s: f64, repetition_s: f64 },
    #[error("chirp slope {slope:e} Hz/s disagrees with bandwidth / ramp time {derived:e} Hz/s")]
    SlopeMismatch { slope: f64, derived: f64 },
    #[error("target {index}: range {range_m} m outside (0, {r_max_m}) m")]
    RangeOutOfBounds { index: usize, range_m: f64, r_max_m: f64 },
    #[error("target {index}: radial velocity {velocity_mps} m/s exceeds +-{v_max_mps} m/s")]
    VelocityOutOfBounds { index: usize, velocity_mps: f64, v_max_mps: f64 },
    #[error("target {index}: azimuth {azimuth_deg} deg outside +-{fov_deg} deg")]
    AzimuthOutOfBounds { index: usize, azimuth_deg: f64, fov_deg: f64 },
    #[error("target {index}: static clutter must have zero radial velocity")]
    MovingClutter { index: usize },
    #[error("scene must contain exactly one communication user as its first target")]
    BadUser,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
