//! Communication side: the receive codebook, the narrowband channel built
//! from a scene, and exhaustive-search labeling of the best beam.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{scene_rng, Scene};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),
    #[error("scene has no communication user")]
    MissingUser,
    #[error("channel has {channel} antennas but the codebook has {codebook}")]
    DimensionMismatch { channel: usize, codebook: usize },
    #[error("codebook file: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// ULA steering vector (half-wavelength pitch, not normalized).
pub fn steering_vector(n_antennas: usize, azimuth_deg: f64, elevation_deg: f64) -> Vec<Complex64> {
    let u = azimuth_deg.to_radians().sin() * elevation_deg.to_radians().cos();
    (0..n_antennas).map(|m| Complex64::from_polar(1.0, PI * m as f64 * u)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodebookKind {
    /// Ideal steering vectors uniformly spaced in sin(azimuth).
    OversampledSteering,
    /// Loaded from a file (e.g. a measured codebook).
    Loaded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamCodebook {
    /// `beams[n]` is the n-th combining vector, length `n_antennas`.
    pub beams: Vec<Vec<Complex64>>,
    pub n_antennas: usize,
    /// Full azimuth coverage in degrees (120 means +-60).
    pub fov_deg: f64,
    /// Steering direction of each beam as sin(azimuth); empty for loaded
    /// codebooks.
    pub steering_sines: Vec<f64>,
    pub kind: CodebookKind,
}

impl BeamCodebook {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Steering azimuth of beam `n` in degrees.
    pub fn steering_azimuth_deg(&self, n: usize) -> Option<f64> {
        self.steering_sines.get(n).map(|u| u.asin().to_degrees())
    }

    /// `|a(azimuth)^H f_n|^2` for a unit-gain path.
    pub fn gain(&self, n: usize, azimuth_deg: f64) -> f64 {
        inner(&steering_vector(self.n_antennas, azimuth_deg, 0.0), &self.beams[n]).norm_sqr()
    }

    /// Writes the codebook: 16-byte header (`RBCODEBK`, u32 N, u32 M_A) then
    /// N x M_A interleaved complex f32, all little-endian, row-major.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), OracleError> {
        w.write_all(CODEBOOK_MAGIC)?;
        w.write_all(&(self.beams.len() as u32).to_le_bytes())?;
        w.write_all(&(self.n_antennas as u32).to_le_bytes())?;
        for beam in &self.beams {
            for z in beam {
                w.write_all(&(z.re as f32).to_le_bytes())?;
                w.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read, fov_deg: f64) -> Result<Self, OracleError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|_| OracleError::BadFormat("truncated header".into()))?;
        if &header[..8] != CODEBOOK_MAGIC {
            return Err(OracleError::BadFormat("bad magic".into()));
        }
        let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if n == 0 || m == 0 || n.saturating_mul(m) > 1 << 24 {
            return Err(OracleError::BadFormat(format!("implausible dimensions {n} x {m}")));
        }
        let mut raw = vec![0u8; n * m * 8];
        r.read_exact(&mut raw).map_err(|_| OracleError::BadFormat("truncated body".into()))?;
        let beams = raw
            .chunks_exact(m * 8)
            .map(|row| {
                row.chunks_exact(8)
                    .map(|c| {
                        let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                        let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                        let z = Complex32::new(re, im);
                        Complex64::new(z.re as f64, z.im as f64)
                    })
                    .collect()
            })
            .collect();
        Ok(BeamCodebook { beams, n_antennas: m, fov_deg, steering_sines: Vec::new(), kind: CodebookKind::Loaded })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OracleError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, fov_deg: f64) -> Result<Self, OracleError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?), fov_deg)
    }
}

const CODEBOOK_MAGIC: &[u8; 8] = b"RBCODEBK";

/// Builds `n_beams` unit-norm half-wavelength ULA steering vectors whose
/// directions are uniformly spaced in sin(azimuth) across `fov_deg`
/// (endpoints included).
pub fn build_codebook(n_beams: usize, n_antennas: usize, fov_deg: f64) -> Result<BeamCodebook, OracleError> {
    if n_beams < 1 {
        return Err(OracleError::InvalidCodebook("need at least one beam".into()));
    }
    if n_antennas < 1 || n_beams < n_antennas {
        return Err(OracleError::InvalidCodebook(format!(
            "{n_beams} beams over {n_antennas} antennas (need n_beams >= n_antennas >= 1)"
        )));
    }
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(OracleError::InvalidCodebook(format!("field of view {fov_deg} deg outside (0, 180)")));
    }
    let edge = (fov_deg / 2.0).to_radians().sin();
    let steering_sines: Vec<f64> = if n_beams == 1 {
        vec![0.0]
    } else {
        (0..n_beams).map(|n| -edge + 2.0 * edge * n as f64 / (n_beams - 1) as f64).collect()
    };
    let norm = (n_antennas as f64).sqrt();
    let beams = steering_sines
        .iter()
        .map(|&u| (0..n_antennas).map(|m| Complex64::from_polar(1.0 / norm, PI * m as f64 * u)).collect())
        .collect();
    Ok(BeamCodebook { beams, n_antennas, fov_deg, steering_sines, kind: CodebookKind::OversampledSteering })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub gain: Complex64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Narrowband multipath channel `h = sum_p alpha_p a(phi_p, theta_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub paths: Vec<ChannelPath>,
    /// Transmit amplitude sqrt(E_c).
    pub comm_tx_gain: f64,
}

impl ChannelState {
    pub fn vector(&self, n_antennas: usize) -> Vec<Complex64> {
        let mut h = vec![Complex64::default(); n_antennas];
        for p in &self.paths {
            for (hm, am) in h.iter_mut().zip(steering_vector(n_antennas, p.azimuth_deg, p.elevation_deg)) {
                *hm += p.gain * am;
            }
        }
        h
    }
}

/// Parameters of the communication link used for labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommConfig {
    pub n_beams: usize,
    pub n_antennas: usize,
    pub fov_deg: f64,
    /// LOS amplitude is `reference_range_m / d`.
    pub reference_range_m: f64,
    pub nlos_paths: usize,
    /// Power of each NLOS path relative to the LOS path.
    pub nlos_relative_power: f64,
    pub comm_tx_gain: f64,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            n_beams: 64,
            n_antennas: 16,
            fov_deg: 120.0,
            reference_range_m: 10.0,
            nlos_paths: 0,
            nlos_relative_power: 0.1,
            comm_tx_gain: 1.0,
        }
    }
}

impl CommConfig {
    pub fn codebook(&self) -> Result<BeamCodebook, OracleError> {
        build_codebook(self.n_beams, self.n_antennas, self.fov_deg)
    }
}

/// Channel towards the scene's user: a LOS path at the user's azimuth with
/// one-way amplitude law `reference / d` and a phase drawn from the scene's
/// channel stream, plus optional NLOS paths.
pub fn channel_from_scene(scene: &Scene, comm: &CommConfig) -> Result<ChannelState, OracleError> {
    let user = scene.user().ok_or(OracleError::MissingUser)?;
    let mut rng = scene_rng(scene.seed, 1);
    let los_amp = comm.reference_range_m / user.range_m;
    let mut paths = vec![ChannelPath {
        gain: Complex64::from_polar(los_amp, rng.random_range(0.0..2.0 * PI)),
        azimuth_deg: user.azimuth_deg,
        elevation_deg: 0.0,
    }];
    let half = comm.fov_deg / 2.0;
    for _ in 0..comm.nlos_paths {
        paths.push(ChannelPath {
            gain: Complex64::from_polar(los_amp * comm.nlos_relative_power.sqrt(), rng.random_range(0.0..2.0 * PI)),
            azimuth_deg: rng.random_range(-half..half),
            elevation_deg: 0.0,
        });
    }
    Ok(ChannelState { paths, comm_tx_gain: comm.comm_tx_gain })
}

/// `h^H f`.
fn inner(h: &[Complex64], f: &[Complex64]) -> Complex64 {
    h.iter().zip(f).map(|(h, f)| h.conj() * f).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSelection {
    pub index: usize,
    /// `|h^H f_n|^2` for every beam.
    pub powers: Vec<f64>,
}

/// Exhaustive search for the beam maximizing `|h^H f_n|^2`; ties go to the
/// lowest index.
pub fn optimal_beam(channel: &ChannelState, codebook: &BeamCodebook) -> Result<BeamSelection, OracleError> {
    let h = channel.vector(codebook.n_antennas);
    if codebook.is_empty() {
        return Err(OracleError::InvalidCodebook("empty codebook".into()));
    }
    let powers: Vec<f64> = codebook.beams.iter().map(|f| inner(&h, f).norm_sqr()).collect();
    let index = crate::dsp::argmax(&powers);
    Ok(BeamSelection { index, powers })
}

/// Best beam for a raw channel vector.
pub fn optimal_beam_for_vector(h: &[Complex64], codebook: &BeamCodebook) -> Result<BeamSelection, OracleError> {
    if h.len() != codebook.n_antennas {
        return Err(OracleError::DimensionMismatch { channel: h.len(), codebook: codebook.n_antennas });
    }
    let powers: Vec<f64> = codebook.beams.iter().map(|f| inner(h, f).norm_sqr()).collect();
    Ok(BeamSelection { index: crate::dsp::argmax(&powers), powers })
}

/// Label of a scene under `comm`.
pub fn label_scene(scene: &Scene, comm: &CommConfig, codebook: &BeamCodebook) -> Result<usize, OracleError> {
    Ok(optimal_beam(&channel_from_scene(scene, comm)?, codebook)?.index)
}
