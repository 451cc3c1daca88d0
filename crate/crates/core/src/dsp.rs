//! Radar preprocessing: range-angle maps, range-velocity maps and radar
//! cubes, plus per-sample standardization.
//!
//! Conventions shared with the dataset format and the trained models:
//!
//! * no windowing (rectangular) before any FFT,
//! * magnitudes, not powers,
//! * the angle and Doppler axes are FFT-shifted so that boresight and zero
//!   velocity sit at bin `n / 2`,
//! * range-angle maps are laid out range-major (`S x M_F`), range-velocity
//!   maps `S x A`, radar cubes `M_r x S x A` (angle, range, Doppler).
//!
//! Clutter removal is only offered for range-angle maps. It subtracts the
//! across-chirp mean of every (antenna, range bin) on the complex range
//! spectrum, before the angle FFT, magnitude and chirp sum.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{RadarConfig, RadarFrame};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("angle FFT size {angle_fft_size} is smaller than the {rx_antennas} RX antennas")]
    AngleFftTooSmall { angle_fft_size: usize, rx_antennas: usize },
    #[error("frame shape {frame:?} does not match the preprocessor shape {expected:?}")]
    ShapeMismatch { frame: [usize; 3], expected: [usize; 3] },
    #[error("frame data length {len} does not match its shape {shape:?}")]
    BadFrame { shape: [usize; 3], len: usize },
    #[error("map is already standardized")]
    AlreadyStandardized,
    #[error("unknown feature kind `{0}` (expected ra<M>, rv or rc)")]
    UnknownKind(String),
}

/// Which feature representation a map holds. Serialized by its short name
/// (`ra64`, `rv`, `rc`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FeatureKind {
    RangeAngle { angle_fft_size: usize },
    RangeVelocity,
    RadarCube,
}

impl FeatureKind {
    pub const RA4: FeatureKind = FeatureKind::RangeAngle { angle_fft_size: 4 };
    pub const RA64: FeatureKind = FeatureKind::RangeAngle { angle_fft_size: 64 };

    /// `[channels, height, width]` of the map for a radar of shape
    /// `[M_r, S, A]`.
    pub fn shape(self, cube: [usize; 3]) -> [usize; 3] {
        let [m_r, s, a] = cube;
        match self {
            FeatureKind::RangeAngle { angle_fft_size } => [1, s, angle_fft_size],
            FeatureKind::RangeVelocity => [1, s, a],
            FeatureKind::RadarCube => [m_r, s, a],
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::RangeAngle { angle_fft_size } => write!(f, "ra{angle_fft_size}"),
            FeatureKind::RangeVelocity => f.write_str("rv"),
            FeatureKind::RadarCube => f.write_str("rc"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = DspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "rv" => Ok(FeatureKind::RangeVelocity),
            "rc" => Ok(FeatureKind::RadarCube),
            _ => lower
                .strip_prefix("ra")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .map(|angle_fft_size| FeatureKind::RangeAngle { angle_fft_size })
                .ok_or_else(|| DspError::UnknownKind(s.to_string())),
        }
    }
}

impl From<FeatureKind> for String {
    fn from(kind: FeatureKind) -> String {
        kind.to_string()
    }
}

impl TryFrom<String> for FeatureKind {
    type Error = DspError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A real-valued feature tensor `[channels, height, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    pub shape: [usize; 3],
    pub data: Vec<f64>,
    pub standardized: bool,
    /// Set by [`standardize`] when the input had (near) zero variance.
    pub degenerate: bool,
}

impl FeatureMap {
    pub fn at(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[(c * self.shape[1] + h) * self.shape[2] + w]
    }

    /// Flat index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.data)
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&x| x as f32).collect()
    }
}

/// Index of the largest value (first one on ties); 0 for an empty slice.
pub fn argmax<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Source index of output bin `i` after an FFT shift of length `n`.
#[inline]
fn unshift(i: usize, n: usize) -> usize {
    (i + n - n / 2) % n
}

/// Cached FFT plans for one cube shape. Plans are immutable and shared;
/// scratch buffers are per call, so one preprocessor serves many workers.
#[derive(Clone)]
pub struct Preprocessor {
    shape: [usize; 3],
    range_fft: Arc<dyn Fft<f64>>,
    doppler_fft: Arc<dyn Fft<f64>>,
    angle_ffts: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sizes: Vec<_> = self.angle_ffts.keys().collect();
        sizes.sort();
        f.debug_struct("Preprocessor").field("shape", &self.shape).field("angle_fft_sizes", &sizes).finish()
    }
}

impl Preprocessor {
    /// Plans the range, Doppler and `M_r`-point angle FFTs for cubes of
    /// shape `[M_r, S, A]`.
    pub fn new(shape: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let mut angle_ffts = HashMap::new();
        angle_ffts.insert(shape[0], planner.plan_fft_forward(shape[0]));
        Preprocessor {
            shape,
            range_fft: planner.plan_fft_forward(shape[1]),
            doppler_fft: planner.plan_fft_forward(shape[2]),
            angle_ffts,
        }
    }

    pub fn for_config(config: &RadarConfig) -> Self {
        Self::new(config.cube_shape())
    }

    /// Adds plans for additional angle FFT sizes.
    pub fn with_angle_sizes(mut self, sizes: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        for &n in sizes {
            self.angle_ffts.entry(n).or_insert_with(|| planner.plan_fft_forward(n));
        }
        self
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    fn angle_plan(&self, n: usize) -> Arc<dyn Fft<f64>> {
        match self.angle_ffts.get(&n) {
            Some(plan) => plan.clone(),
            None => FftPlanner::new().plan_fft_forward(n),
        }
    }

    fn check(&self, frame: &RadarFrame) -> Result<(), DspError> {
        if frame.shape != self.shape {
            return Err(DspError::ShapeMismatch { frame: frame.shape, expected: self.shape });
        }
        if frame.data.len() != frame.shape.iter().product::<usize>() {
            return Err(DspError::BadFrame { shape: frame.shape, len: frame.data.len() });
        }
        Ok(())
    }

    /// Range FFT of every (antenna, chirp) column, laid out `[m][a][k]`.
    fn range_spectrum(&self, frame: &RadarFrame) -> Vec<Complex64> {
        let [m_r, s, a] = self.shape;
        let mut out = vec![Complex64::default(); m_r * a * s];
        for m in 0..m_r {
            for si in 0..s {
                let row = frame.index(m, si, 0);
                for (ai, &z) in frame.data[row..row + a].iter().enumerate() {
                    out[(m * a + ai) * s + si] = z;
                }
            }
        }
        self.range_fft.process(&mut out);
        out
    }

    /// Range-angle map `S x M_F`: sum over chirps of the magnitude of the
    /// zero-padded angle FFT of the (optionally clutter-removed) range
    /// spectrum.
    pub fn range_angle_map(
        &self,
        frame: &RadarFrame,
        angle_fft_size: usize,
        clutter_removal: bool,
    ) -> Result<FeatureMap, DspError> {
        self.check(frame)?;
        let [m_r, s, a] = self.shape;
        if angle_fft_size < m_r {
            return Err(DspError::AngleFftTooSmall { angle_fft_size, rx_antennas: m_r });
        }
        let mf = angle_fft_size;
        let spectrum = self.range_spectrum(frame);
        let plan = self.angle_plan(mf);

        let mut out = vec![0.0; s * mf];
        let mut buf = vec![Complex64::default(); a * mf];
        let mut means = vec![Complex64::default(); m_r];
        for k in 0..s {
            if clutter_removal {
                for (m, mean) in means.iter_mut().enumerate() {
                    let sum: Complex64 = (0..a).map(|ai| spectrum[(m * a + ai) * s + k]).sum();
                    *mean = sum / a as f64;
                }
            }
            buf.fill(Complex64::default());
            for ai in 0..a {
                for m in 0..m_r {
                    buf[ai * mf + m] = spectrum[(m * a + ai) * s + k] - means[m];
                }
            }
            plan.process(&mut buf);
            let row = &mut out[k * mf..(k + 1) * mf];
            for ai in 0..a {
                let col = &buf[ai * mf..(ai + 1) * mf];
                for (i, acc) in row.iter_mut().enumerate() {
                    *acc += col[unshift(i, mf)].norm_sqr().sqrt();
                }
            }
        }
        Ok(FeatureMap {
            kind: FeatureKind::RangeAngle { angle_fft_size },
            shape: [1, s, mf],
            data: out,
            standardized: false,
            degenerate: false,
        })
    }

    /// Per-antenna range-Doppler spectra, laid out `[m][k][d]` (unshifted).
    fn range_doppler(&self, frame: &RadarFrame) -> Vec<Complex64> {
        let [m_r, s, a] = self.shape;
        let spectrum = self.range_spectrum(frame);
        let mut out = vec![Complex64::default(); m_r * s * a];
        for m in 0..m_r {
            for ai in 0..a {
                let src = &spectrum[(m * a + ai) * s..(m * a + ai + 1) * s];
                for (k, &z) in src.iter().enumerate() {
                    out[(m * s + k) * a + ai] = z;
                }
            }
        }
        self.doppler_fft.process(&mut out);
        out
    }

    /// Range-velocity map `S x A`: magnitude of the per-antenna 2D FFT over
    /// (fast time, chirp), summed over antennas.
    pub fn range_velocity_map(&self, frame: &RadarFrame) -> Result<FeatureMap, DspError> {
        self.check(frame)?;
        let [m_r, s, a] = self.shape;
        let rd = self.range_doppler(frame);
        let mut out = vec![0.0; s * a];
        for m in 0..m_r {
            for k in 0..s {
                let src = &rd[(m * s + k) * a..(m * s + k + 1) * a];
                for (d, acc) in out[k * a..(k + 1) * a].iter_mut().enumerate() {
                    *acc += src[unshift(d, a)].norm_sqr().sqrt();
                }
            }
        }
        Ok(FeatureMap {
            kind: FeatureKind::RangeVelocity,
            shape: [1, s, a],
            data: out,
            standardized: false,
            degenerate: false,
        })
    }

    /// Radar cube `M_r x S x A`: magnitude of the 3D FFT with an `M_r`-point
    /// angle FFT.
    pub fn radar_cube(&self, frame: &RadarFrame) -> Result<FeatureMap, DspError> {
        self.check(frame)?;
        let [m_r, s, a] = self.shape;
        let rd = self.range_doppler(frame);
        let plan = self.angle_plan(m_r);
        let mut out = vec![0.0; m_r * s * a];
        let mut buf = vec![Complex64::default(); m_r];
        for k in 0..s {
            for d in 0..a {
                for (m, z) in buf.iter_mut().enumerate() {
                    *z = rd[(m * s + k) * a + d];
                }
                plan.process(&mut buf);
                let ds = (d + a / 2) % a;
                for (q, z) in buf.iter().enumerate() {
                    let qs = (q + m_r / 2) % m_r;
                    out[(qs * s + k) * a + ds] = z.norm_sqr().sqrt();
                }
            }
        }
        Ok(FeatureMap {
            kind: FeatureKind::RadarCube,
            shape: [m_r, s, a],
            data: out,
            standardized: false,
            degenerate: false,
        })
    }

    /// Computes any feature kind. Range-angle maps use `clutter_removal`.
    pub fn compute(
        &self,
        frame: &RadarFrame,
        kind: FeatureKind,
        clutter_removal: bool,
    ) -> Result<FeatureMap, DspError> {
        match kind {
            FeatureKind::RangeAngle { angle_fft_size } => self.range_angle_map(frame, angle_fft_size, clutter_removal),
            FeatureKind::RangeVelocity => self.range_velocity_map(frame),
            FeatureKind::RadarCube => self.radar_cube(frame),
        }
    }
}

pub fn range_angle_map(
    frame: &RadarFrame,
    angle_fft_size: usize,
    clutter_removal: bool,
) -> Result<FeatureMap, DspError> {
    Preprocessor::new(frame.shape).range_angle_map(frame, angle_fft_size, clutter_removal)
}

pub fn range_velocity_map(frame: &RadarFrame) -> Result<FeatureMap, DspError> {
    Preprocessor::new(frame.shape).range_velocity_map(frame)
}

pub fn radar_cube(frame: &RadarFrame) -> Result<FeatureMap, DspError> {
    Preprocessor::new(frame.shape).radar_cube(frame)
}

/// Variance floor below which a map is treated as constant.
pub const STANDARDIZE_EPS: f64 = 1e-8;

/// Per-sample z-score in place. Returns `false` (and zeroes the values) when
/// the standard deviation is below [`STANDARDIZE_EPS`].
pub fn standardize_values(values: &mut [f64]) -> bool {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < STANDARDIZE_EPS {
        values.fill(0.0);
        return false;
    }
    for x in values.iter_mut() {
        *x = (*x - mean) / std;
    }
    true
}

/// f32 variant used for network inputs; statistics are accumulated in f64.
pub fn standardize_f32(values: &mut [f32]) -> bool {
    let n = values.len().max(1) as f64;
    let mean = values.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = values.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < STANDARDIZE_EPS {
        values.fill(0.0);
        return false;
    }
    for x in values.iter_mut() {
        *x = ((*x as f64 - mean) / std) as f32;
    }
    true
}

pub fn standardize(mut map: FeatureMap) -> Result<FeatureMap, DspError> {
    if map.standardized {
        return Err(DspError::AlreadyStandardized);
    }
    map.degenerate = !standardize_values(&mut map.data);
    map.standardized = true;
    Ok(map)
}

/// Asymptotic preprocessing cost instantiated with concrete sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreprocessingCost {
    /// Operation count with base-2 logarithms.
    pub flop_estimate: f64,
    /// Number of real values fed to the network.
    pub input_size: usize,
}

pub fn preprocessing_cost(kind: FeatureKind, config: &RadarConfig) -> PreprocessingCost {
    let (m_r, s, a) = (config.rx_antennas as f64, config.samples_per_chirp as f64, config.chirps_per_frame as f64);
    let base = m_r * s * a;
    let (flop_estimate, input_size) = match kind {
        FeatureKind::RadarCube => (base * (s.log2() + a.log2() + m_r.log2()), config.cube_len()),
        FeatureKind::RangeAngle { angle_fft_size } => {
            let mf = angle_fft_size as f64;
            (base * s.log2() + mf * s * a * mf.log2(), angle_fft_size * config.samples_per_chirp)
        }
        FeatureKind::RangeVelocity => {
            (base * (s.log2() + a.log2()), config.samples_per_chirp * config.chirps_per_frame)
        }
    };
    PreprocessingCost { flop_estimate, input_size }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in [FeatureKind::RA4, FeatureKind::RA64, FeatureKind::RangeVelocity, FeatureKind::RadarCube] {
            assert_eq!(kind.to_string().parse::<FeatureKind>().unwrap(), kind);
        }
        assert_eq!("RA16".parse::<FeatureKind>().unwrap(), FeatureKind::RangeAngle { angle_fft_size: 16 });
        assert!(matches!("xy".parse::<FeatureKind>(), Err(DspError::UnknownKind(_))));
        assert!("ra0".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn shift_puts_zero_at_center() {
        assert_eq!(unshift(32, 64), 0);
        assert_eq!(unshift(0, 64), 32);
        assert_eq!(unshift(2, 4), 0);
        assert_eq!(unshift(2, 5), 0);
    }

    #[test]
    fn zero_frame_gives_zero_maps() {
        let frame = RadarFrame::zeros([4, 16, 8]);
        let pre = Preprocessor::new(frame.shape);
        for kind in [FeatureKind::RA4, FeatureKind::RA64, FeatureKind::RangeVelocity, FeatureKind::RadarCube] {
            let map = pre.compute(&frame, kind, true).unwrap();
            assert_eq!(map.shape, kind.shape(frame.shape));
            assert!(map.data.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn rejects_small_angle_fft() {
        let frame = RadarFrame::zeros([4, 8, 4]);
        assert_eq!(
            range_angle_map(&frame, 2, false),
            Err(DspError::AngleFftTooSmall { angle_fft_size: 2, rx_antennas: 4 })
        );
    }

    #[test]
    fn rejects_wrong_shape() {
        let pre = Preprocessor::new([4, 8, 4]);
        let frame = RadarFrame::zeros([4, 8, 8]);
        assert!(matches!(pre.range_velocity_map(&frame), Err(DspError::ShapeMismatch { .. })));
    }

    #[test]
    fn standardize_constant_map() {
        let map = FeatureMap {
            kind: FeatureKind::RA4,
            shape: [1, 2, 2],
            data: vec![3.0; 4],
            standardized: false,
            degenerate: false,
        };
        let out = standardize(map).unwrap();
        assert!(out.degenerate && out.standardized);
        assert!(out.data.iter().all(|&x| x == 0.0));
        assert_eq!(standardize(out), Err(DspError::AlreadyStandardized));
    }

    #[test]
    fn standardize_moments_and_idempotence() {
        let mut values: Vec<f64> = (0..500).map(|i| ((i * 37 % 101) as f64).sqrt() * 3.0 + 7.0).collect();
        assert!(standardize_values(&mut values));
        let mean = values.iter().sum::<f64>() / 500.0;
        let std = (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 500.0).sqrt();
        assert!(mean.abs() < 1e-6 && (std - 1.0).abs() < 1e-6);
        let once = values.clone();
        standardize_values(&mut values);
        assert!(once.iter().zip(&values).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn table_input_sizes() {
        let cfg = RadarConfig::default();
        assert_eq!(preprocessing_cost(FeatureKind::RangeVelocity, &cfg).input_size, 32768);
        assert_eq!(preprocessing_cost(FeatureKind::RA64, &cfg).input_size, 16384);
        assert_eq!(preprocessing_cost(FeatureKind::RA4, &cfg).input_size, 1024);
        assert_eq!(preprocessing_cost(FeatureKind::RadarCube, &cfg).input_size, 131072);
        // 4*256*128 * (8 + 7 + 2)
        assert_eq!(preprocessing_cost(FeatureKind::RadarCube, &cfg).flop_estimate, 131072.0 * 17.0);
        // 4*256*128*8 + 64*256*128*6
        assert_eq!(preprocessing_cost(FeatureKind::RA64, &cfg).flop_estimate, 131072.0 * 8.0 + 64.0 * 32768.0 * 6.0);
        assert_eq!(preprocessing_cost(FeatureKind::RangeVelocity, &cfg).flop_estimate, 131072.0 * 15.0);
    }
}
