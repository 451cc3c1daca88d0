use serde::{Deserialize, Serialize};

use super::SimError;
use crate::SPEED_OF_LIGHT;

/// Physical parameters of the FMCW radar.
///
/// Defaults reproduce a 77 GHz short-range setup: 750 MHz bandwidth at
/// 15 MHz/us, 256 samples per chirp, 128 chirps per frame, 4 RX antennas,
/// with the ADC rate and chirp repetition picked so that the unambiguous
/// range is ~45 m and the unambiguous speed is 56 km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_slope_hz_per_s: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    pub rx_antennas: usize,
    /// Chirp start-to-start interval (ramp plus idle time).
    pub chirp_repetition_s: f64,
    pub adc_rate_hz: f64,
    /// RX element pitch in wavelengths.
    pub rx_spacing_wavelengths: f64,
    /// Per-element complex noise variance (linear).
    pub noise_power: f64,
    /// Transmit amplitude gain (linear).
    pub tx_gain: f64,
    /// Accepted target azimuths are within +- this angle.
    pub fov_half_angle_deg: f64,
}

/// Max unambiguous speed of the default configuration: 56 km/h.
pub(crate) const DEFAULT_V_MAX_MPS: f64 = 56.0 / 3.6;

impl Default for RadarConfig {
    fn default() -> Self {
        let carrier = 77.0e9;
        let wavelength = SPEED_OF_LIGHT / carrier;
        Self {
            carrier_freq_hz: carrier,
            bandwidth_hz: 750.0e6,
            chirp_slope_hz_per_s: 15.0e12,
            samples_per_chirp: 256,
            chirps_per_frame: 128,
            rx_antennas: 4,
            chirp_repetition_s: wavelength / (4.0 * DEFAULT_V_MAX_MPS),
            adc_rate_hz: 4.5e6,
            rx_spacing_wavelengths: 0.5,
            noise_power: 0.0,
            tx_gain: 1.0,
            fov_half_angle_deg: 90.0,
        }
    }
}

impl RadarConfig {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Ramp duration implied by bandwidth and slope (B / mu).
    pub fn ramp_time_s(&self) -> f64 {
        self.bandwidth_hz / self.chirp_slope_hz_per_s
    }

    /// Duration of the sampled part of each chirp (S / f_s).
    pub fn adc_window_s(&self) -> f64 {
        self.samples_per_chirp as f64 / self.adc_rate_hz
    }

    /// Number of complex entries in one raw cube.
    pub fn cube_len(&self) -> usize {
        self.rx_antennas * self.samples_per_chirp * self.chirps_per_frame
    }

    pub fn cube_shape(&self) -> [usize; 3] {
        [self.rx_antennas, self.samples_per_chirp, self.chirps_per_frame]
    }

    /// Sets the ramp time explicitly, re-deriving the slope as B / T_c.
    pub fn with_ramp_time(mut self, ramp_s: f64) -> Self {
        self.chirp_slope_hz_per_s = self.bandwidth_hz / ramp_s;
        self
    }

    /// Checks an explicitly specified ramp time against the configured slope.
    pub fn check_ramp_time(&self, ramp_s: f64) -> Result<(), SimError> {
        let derived = self.bandwidth_hz / ramp_s;
        if !(ramp_s > 0.0) || ((self.chirp_slope_hz_per_s - derived) / derived).abs() > 1e-9 {
            return Err(SimError::SlopeMismatch { slope: self.chirp_slope_hz_per_s, derived });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("chirp_slope_hz_per_s", self.chirp_slope_hz_per_s),
            ("samples_per_chirp", self.samples_per_chirp as f64),
            ("chirps_per_frame", self.chirps_per_frame as f64),
            ("rx_antennas", self.rx_antennas as f64),
            ("chirp_repetition_s", self.chirp_repetition_s),
            ("adc_rate_hz", self.adc_rate_hz),
            ("rx_spacing_wavelengths", self.rx_spacing_wavelengths),
            ("tx_gain", self.tx_gain),
            ("fov_half_angle_deg", self.fov_half_angle_deg),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::NonPositive { name, value });
            }
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(SimError::NonPositive { name: "noise_power", value: self.noise_power });
        }
        if self.fov_half_angle_deg > 90.0 {
            return Err(SimError::NonPositive {
                name: "fov_half_angle_deg (must be <= 90)",
                value: self.fov_half_angle_deg,
            });
        }
        if self.adc_window_s() > self.chirp_repetition_s {
            return Err(SimError::AdcWindowTooLong {
                window_s: self.adc_window_s(),
                repetition_s: self.chirp_repetition_s,
            });
        }
        Ok(())
    }
}

/// Resolution and ambiguity limits implied by a [`RadarConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarLimits {
    /// c / 2B.
    pub range_resolution_m: f64,
    /// f_s c / 2 mu.
    pub r_max_m: f64,
    /// lambda / (4 T_rep).
    pub v_max_mps: f64,
    /// 2 v_max / A.
    pub velocity_resolution_mps: f64,
    /// Spacing of range FFT bins, r_max / S.
    pub range_bin_m: f64,
}

pub fn derive_radar_limits(config: &RadarConfig) -> Result<RadarLimits, SimError> {
    config.validate()?;
    let c = SPEED_OF_LIGHT;
    let r_max = config.adc_rate_hz * c / (2.0 * config.chirp_slope_hz_per_s);
    let v_max = config.wavelength_m() / (4.0 * config.chirp_repetition_s);
    Ok(RadarLimits {
        range_resolution_m: c / (2.0 * config.bandwidth_hz),
        r_max_m: r_max,
        v_max_mps: v_max,
        velocity_resolution_mps: 2.0 * v_max / config.chirps_per_frame as f64,
        range_bin_m: r_max / config.samples_per_chirp as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_limits() {
        let limits = derive_radar_limits(&RadarConfig::default()).unwrap();
        // c / (2 * 750 MHz)
        assert!((limits.range_resolution_m - 0.199_861_638_666_666_7).abs() < 1e-12);
        // 4.5 MHz * c / (2 * 15 MHz/us)
        assert!((limits.r_max_m - 44.968_868_7).abs() < 1e-6);
        assert!((limits.v_max_mps - 56.0 / 3.6).abs() < 1e-9);
        assert!((limits.velocity_resolution_mps - 2.0 * 56.0 / 3.6 / 128.0).abs() < 1e-12);
    }

    #[test]
    fn default_timing() {
        let cfg = RadarConfig::default();
        assert!((cfg.ramp_time_s() - 50e-6).abs() < 1e-15);
        assert!((cfg.adc_window_s() - 56.888_888_9e-6).abs() < 1e-12);
        assert!((cfg.chirp_repetition_s - 62.57e-6).abs() < 0.01e-6);
        cfg.validate().unwrap();
    }

    #[test]
    fn doubling_bandwidth_halves_resolution() {
        let cfg = RadarConfig::default();
        let wide = RadarConfig { bandwidth_hz: 2.0 * cfg.bandwidth_hz, ..cfg.clone() };
        let a = derive_radar_limits(&cfg).unwrap().range_resolution_m;
        let b = derive_radar_limits(&wide).unwrap().range_resolution_m;
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn ramp_time_sets_slope() {
        let cfg = RadarConfig::default().with_ramp_time(50e-6);
        let mu = cfg.bandwidth_hz / 50e-6;
        assert!(((cfg.chirp_slope_hz_per_s - mu) / mu).abs() < 1e-9);
        cfg.check_ramp_time(50e-6).unwrap();
        assert!(matches!(cfg.check_ramp_time(40e-6), Err(SimError::SlopeMismatch { .. })));
    }

    #[test]
    fn rejects_non_positive() {
        let cfg = RadarConfig { bandwidth_hz: 0.0, ..Default::default() };
        assert!(matches!(derive_radar_limits(&cfg), Err(SimError::NonPositive { name: "bandwidth_hz", .. })));
        let cfg = RadarConfig { adc_rate_hz: -1.0, ..Default::default() };
        assert!(derive_radar_limits(&cfg).is_err());
        let cfg = RadarConfig { noise_power: f64::NAN, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_adc_window_longer_than_chirp() {
        let cfg = RadarConfig { adc_rate_hz: 1.0e6, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(SimError::AdcWindowTooLong { .. })));
    }
}
