use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{derive_radar_limits, RadarConfig, Scene, SimError};
use crate::SPEED_OF_LIGHT;

/// Raw FMCW measurement cube of one frame, indexed `[rx][sample][chirp]`
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    pub shape: [usize; 3],
    pub data: Vec<Complex64>,
}

impl RadarFrame {
    pub fn zeros(shape: [usize; 3]) -> Self {
        RadarFrame { shape, data: vec![Complex64::new(0.0, 0.0); shape.iter().product()] }
    }

    #[inline]
    pub fn index(&self, rx: usize, sample: usize, chirp: usize) -> usize {
        (rx * self.shape[1] + sample) * self.shape[2] + chirp
    }

    #[inline]
    pub fn at(&self, rx: usize, sample: usize, chirp: usize) -> Complex64 {
        self.data[self.index(rx, sample, chirp)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Single-precision copy, as stored on disk.
    pub fn to_f32(&self) -> Vec<Complex32> {
        self.data.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect()
    }

    pub fn from_f32(shape: [usize; 3], data: &[Complex32]) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        RadarFrame { shape, data: data.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect() }
    }
}

/// Private random stream of a scene. Stream 0 drives radar noise, stream 1
/// the communication channel.
pub fn scene_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn unit_phasors(n: usize, radians_per_step: f64) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, radians_per_step * k as f64)).collect()
}

/// Synthesizes the complex baseband IF cube for `scene`.
///
/// Each target contributes
///
/// ```text
/// amp * exp(j(2 pi f_c tau - pi mu tau^2)) * exp(j 2 pi f_IF s / f_s)
///     * exp(j 2 pi (d_rx / lambda) m sin(theta)) * exp(j 4 pi v T_rep a / lambda)
/// ```
///
/// with `tau = 2d / c`, `f_IF = mu tau` and `amp = sqrt(E_t) sqrt(E_r)`.
/// Circularly-symmetric Gaussian noise of variance `noise_power` is added
/// per element.
pub fn synthesize_frame(config: &RadarConfig, scene: &Scene, rng: &mut impl Rng) -> Result<RadarFrame, SimError> {
    let limits = derive_radar_limits(config)?;
    for (index, t) in scene.targets.iter().enumerate() {
        if !(t.range_m > 0.0 && t.range_m < limits.r_max_m) {
            return Err(SimError::RangeOutOfBounds { index, range_m: t.range_m, r_max_m: limits.r_max_m });
        }
        if !(t.radial_velocity_mps.abs() < limits.v_max_mps) {
            return Err(SimError::VelocityOutOfBounds {
                index,
                velocity_mps: t.radial_velocity_mps,
                v_max_mps: limits.v_max_mps,
            });
        }
        if !(t.azimuth_deg.abs() <= config.fov_half_angle_deg) {
            return Err(SimError::AzimuthOutOfBounds {
                index,
                azimuth_deg: t.azimuth_deg,
                fov_deg: config.fov_half_angle_deg,
            });
        }
        if t.is_clutter() && t.radial_velocity_mps != 0.0 {
            return Err(SimError::MovingClutter { index });
        }
    }

    let [n_rx, n_samples, n_chirps] = config.cube_shape();
    let mut frame = RadarFrame::zeros(config.cube_shape());
    let lambda = config.wavelength_m();
    let mu = config.chirp_slope_hz_per_s;

    for t in &scene.targets {
        let tau = 2.0 * t.range_m / SPEED_OF_LIGHT;
        let f_if = mu * tau;
        let phase0 = 2.0 * PI * config.carrier_freq_hz * tau - PI * mu * tau * tau;
        let amp = Complex64::from_polar(config.tx_gain * t.reflectivity, phase0);

        let fast = unit_phasors(n_samples, 2.0 * PI * f_if / config.adc_rate_hz);
        let ant = unit_phasors(n_rx, 2.0 * PI * config.rx_spacing_wavelengths * t.azimuth_deg.to_radians().sin());
        let slow = unit_phasors(n_chirps, 4.0 * PI * t.radial_velocity_mps * config.chirp_repetition_s / lambda);

        for (m, a_m) in ant.iter().enumerate() {
            let am = amp * a_m;
            for (s, f_s) in fast.iter().enumerate() {
                let ams = am * f_s;
                let row = frame.index(m, s, 0);
                for (z, d) in frame.data[row..row + n_chirps].iter_mut().zip(&slow) {
                    *z += ams * d;
                }
            }
        }
    }

    if config.noise_power > 0.0 {
        let sigma = (config.noise_power / 2.0).sqrt();
        for z in frame.data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Target, TargetKind};

    fn scene(targets: Vec<Target>) -> Scene {
        Scene { targets, seed: 1, timestamp_index: 0 }
    }

    fn user(range: f64, vel: f64, az: f64) -> Target {
        Target::with_rcs(TargetKind::User, range, vel, az, 1.0)
    }

    fn small_config() -> RadarConfig {
        RadarConfig { samples_per_chirp: 32, chirps_per_frame: 16, ..Default::default() }
    }

    #[test]
    fn if_frequency_of_15m_target() {
        let cfg = RadarConfig::default();
        let f_if = cfg.chirp_slope_hz_per_s * 2.0 * 15.0 / SPEED_OF_LIGHT;
        // 4.5e14 / 299792458, i.e. about 1.5 MHz
        assert!((f_if - 1_501_038.428_391_684).abs() < 1e-6, "{f_if}");
    }

    #[test]
    fn empty_noiseless_scene_is_zero() {
        let cfg = small_config();
        let frame = synthesize_frame(&cfg, &scene(vec![]), &mut scene_rng(0, 0)).unwrap();
        assert_eq!(frame.shape, [4, 32, 16]);
        assert!(frame.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn static_boresight_target_is_constant_across_chirps_and_antennas() {
        let cfg = small_config();
        let frame = synthesize_frame(&cfg, &scene(vec![user(12.0, 0.0, 0.0)]), &mut scene_rng(0, 0)).unwrap();
        for m in 0..4 {
            for s in 0..32 {
                for a in 0..16 {
                    assert!((frame.at(m, s, a) - frame.at(0, s, 0)).norm() < 1e-12);
                }
            }
        }
    }

    fn wrap(phase: f64) -> f64 {
        (phase + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn phase_slopes_match_target_parameters() {
        let cfg = small_config();
        let (d, v, az) = (17.3, 4.2, 23.0);
        let frame = synthesize_frame(&cfg, &scene(vec![user(d, v, az)]), &mut scene_rng(0, 0)).unwrap();
        let f_if = cfg.chirp_slope_hz_per_s * 2.0 * d / SPEED_OF_LIGHT;
        let fast = wrap(2.0 * PI * f_if / cfg.adc_rate_hz);
        let slow = wrap(4.0 * PI * v * cfg.chirp_repetition_s / cfg.wavelength_m());
        let ant = wrap(2.0 * PI * 0.5 * az.to_radians().sin());
        for s in 0..31 {
            let step = (frame.at(1, s + 1, 3) / frame.at(1, s, 3)).arg();
            assert!((wrap(step - fast)).abs() < 1e-9);
        }
        for a in 0..15 {
            let step = (frame.at(2, 5, a + 1) / frame.at(2, 5, a)).arg();
            assert!((wrap(step - slow)).abs() < 1e-9);
        }
        for m in 0..3 {
            let step = (frame.at(m + 1, 7, 2) / frame.at(m, 7, 2)).arg();
            assert!((wrap(step - ant)).abs() < 1e-9);
        }
        let amp = Target::with_rcs(TargetKind::User, d, v, az, 1.0).reflectivity;
        assert!((frame.at(0, 0, 0).norm() - amp).abs() < 1e-12);
    }

    #[test]
    fn superposition_without_noise() {
        let cfg = small_config();
        let a = user(9.0, -3.0, -31.0);
        let b = Target::with_rcs(TargetKind::Clutter, 21.5, 0.0, 12.0, 1.7);
        let mut rng = scene_rng(0, 0);
        let both = synthesize_frame(&cfg, &scene(vec![a, b]), &mut rng).unwrap();
        let fa = synthesize_frame(&cfg, &scene(vec![a]), &mut rng).unwrap();
        let fb = synthesize_frame(&cfg, &scene(vec![b]), &mut rng).unwrap();
        let scale = both.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..both.data.len() {
            assert!((both.data[i] - fa.data[i] - fb.data[i]).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn noise_is_deterministic_and_has_requested_power() {
        let cfg = RadarConfig { noise_power: 2.0, ..small_config() };
        let s = scene(vec![]);
        let f1 = synthesize_frame(&cfg, &s, &mut scene_rng(5, 0)).unwrap();
        let f2 = synthesize_frame(&cfg, &s, &mut scene_rng(5, 0)).unwrap();
        assert_eq!(f1, f2);
        let power = f1.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / f1.data.len() as f64;
        assert!((power - 2.0).abs() < 0.15, "{power}");
        assert!(f1.is_finite());
    }

    #[test]
    fn rejects_out_of_range_targets() {
        let cfg = small_config();
        let mut rng = scene_rng(0, 0);
        let far = synthesize_frame(&cfg, &scene(vec![user(50.0, 0.0, 0.0)]), &mut rng);
        assert!(matches!(far, Err(SimError::RangeOutOfBounds { .. })));
        let fast = synthesize_frame(&cfg, &scene(vec![user(10.0, 16.0, 0.0)]), &mut rng);
        assert!(matches!(fast, Err(SimError::VelocityOutOfBounds { .. })));
        let mut moving = Target::with_rcs(TargetKind::Clutter, 10.0, 0.0, 0.0, 1.0);
        moving.radial_velocity_mps = 1.0;
        let clutter = synthesize_frame(&cfg, &scene(vec![moving]), &mut rng);
        assert!(matches!(clutter, Err(SimError::MovingClutter { .. })));
    }

    #[test]
    fn f32_round_trip_shape() {
        let cfg = small_config();
        let frame = synthesize_frame(&cfg, &scene(vec![user(12.0, 1.0, 5.0)]), &mut scene_rng(0, 0)).unwrap();
        let back = RadarFrame::from_f32(frame.shape, &frame.to_f32());
        for (a, b) in frame.data.iter().zip(&back.data) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}
