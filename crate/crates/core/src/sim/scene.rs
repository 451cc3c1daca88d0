use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{derive_radar_limits, RadarConfig, SimError};

/// Range at which a unit-RCS reflector has unit amplitude.
pub const REFERENCE_RANGE_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    /// The vehicle carrying the communication transmitter.
    User,
    /// Static reflector (zero radial velocity).
    Clutter,
    /// Moving reflector that is not the user (other cars, bikes).
    Distractor,
}

/// A point reflector seen by the radar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    /// Positive when receding.
    pub radial_velocity_mps: f64,
    /// Zero at boresight, positive towards increasing antenna index phase.
    pub azimuth_deg: f64,
    /// Amplitude sqrt(E_r).
    pub reflectivity: f64,
    pub kind: TargetKind,
}

impl Target {
    /// Builds a target whose amplitude follows the two-way path loss
    /// `rcs * (REFERENCE_RANGE_M / range)^2`.
    pub fn with_rcs(kind: TargetKind, range_m: f64, radial_velocity_mps: f64, azimuth_deg: f64, rcs: f64) -> Self {
        let radial_velocity_mps = if kind == TargetKind::Clutter { 0.0 } else { radial_velocity_mps };
        Target {
            range_m,
            radial_velocity_mps,
            azimuth_deg,
            reflectivity: rcs * (REFERENCE_RANGE_M / range_m).powi(2),
            kind,
        }
    }

    pub fn is_clutter(&self) -> bool {
        self.kind == TargetKind::Clutter
    }
}

/// Ground truth of the communication user in one scene.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UserTruth {
    pub range_m: f64,
    pub radial_velocity_mps: f64,
    pub azimuth_deg: f64,
}

/// One radar frame's worth of reflectors. The first target is the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub targets: Vec<Target>,
    /// Seed of this scene's private random stream (noise, channel phase).
    pub seed: u64,
    pub timestamp_index: u64,
}

impl Scene {
    pub fn user(&self) -> Option<&Target> {
        self.targets.first().filter(|t| t.kind == TargetKind::User)
    }

    pub fn user_truth(&self) -> Option<UserTruth> {
        self.user().map(|u| UserTruth {
            range_m: u.range_m,
            radial_velocity_mps: u.radial_velocity_mps,
            azimuth_deg: u.azimuth_deg,
        })
    }

    pub fn count(&self, kind: TargetKind) -> usize {
        self.targets.iter().filter(|t| t.kind == kind).count()
    }

    /// Exactly one user, placed first.
    pub fn validate_roles(&self) -> Result<(), SimError> {
        if self.user().is_none() || self.count(TargetKind::User) != 1 {
            return Err(SimError::BadUser);
        }
        Ok(())
    }
}

/// Parameters of the synthetic drive-by scenario.
///
/// The user drives along a straight lane parallel to the array at
/// `lane_offset_m`, left to right, between `start_azimuth_deg` and
/// `end_azimuth_deg` (nominal lane). Scenes are grouped in passes of
/// `frames_per_pass` frames; each pass draws its own lane jitter, speed and
/// user RCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lane_offset_m: f64,
    /// Half-width of the uniform per-pass lateral jitter.
    pub lane_jitter_m: f64,
    pub start_azimuth_deg: f64,
    pub end_azimuth_deg: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub frames_per_pass: usize,
    pub user_rcs_min: f64,
    pub user_rcs_max: f64,
    pub clutter_count: usize,
    pub clutter_range_min_m: f64,
    pub clutter_range_max_m: f64,
    pub clutter_rcs_min: f64,
    pub clutter_rcs_max: f64,
    pub distractor_count: usize,
    pub distractor_speed_max_mps: f64,
    pub distractor_rcs_min: f64,
    pub distractor_rcs_max: f64,
    /// Clutter and distractors are spread over +- this azimuth.
    pub spread_azimuth_deg: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            lane_offset_m: 8.0,
            lane_jitter_m: 0.0,
            start_azimuth_deg: -60.0,
            end_azimuth_deg: 60.0,
            speed_min_mps: 5.0,
            speed_max_mps: 12.0,
            frames_per_pass: 100,
            user_rcs_min: 0.5,
            user_rcs_max: 2.0,
            clutter_count: 0,
            clutter_range_min_m: 3.0,
            clutter_range_max_m: 40.0,
            clutter_rcs_min: 0.5,
            clutter_rcs_max: 2.0,
            distractor_count: 0,
            distractor_speed_max_mps: 12.0,
            distractor_rcs_min: 0.2,
            distractor_rcs_max: 1.0,
            spread_azimuth_deg: 70.0,
        }
    }
}

impl ScenarioConfig {
    /// Checks the whole trajectory family against the radar's unambiguous
    /// range and velocity.
    pub fn validate(&self, radar: &RadarConfig) -> Result<(), SimError> {
        let limits = derive_radar_limits(radar)?;
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        if self.frames_per_pass == 0 {
            return bad("frames_per_pass must be positive".into());
        }
        if !(self.lane_offset_m > self.lane_jitter_m && self.lane_jitter_m >= 0.0) {
            return bad("lane offset must exceed the non-negative lane jitter".into());
        }
        if !(self.start_azimuth_deg < self.end_azimuth_deg)
            || self.start_azimuth_deg.abs() >= 90.0
            || self.end_azimuth_deg.abs() >= 90.0
        {
            return bad("need -90 < start_azimuth < end_azimuth < 90".into());
        }
        for (name, lo, hi) in [
            ("speed", self.speed_min_mps, self.speed_max_mps),
            ("user_rcs", self.user_rcs_min, self.user_rcs_max),
            ("clutter_range", self.clutter_range_min_m, self.clutter_range_max_m),
            ("clutter_rcs", self.clutter_rcs_min, self.clutter_rcs_max),
            ("distractor_rcs", self.distractor_rcs_min, self.distractor_rcs_max),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} bounds must satisfy 0 < min <= max"));
            }
        }
        let x_max = self.lane_x(self.start_azimuth_deg).abs().max(self.lane_x(self.end_azimuth_deg).abs());
        let far = x_max.hypot(self.lane_offset_m + self.lane_jitter_m);
        if far >= limits.r_max_m {
            return bad(format!("trajectory reaches {far:.2} m, beyond r_max {:.2} m", limits.r_max_m));
        }
        if self.speed_max_mps >= limits.v_max_mps {
            return bad(format!("speed {} m/s reaches v_max {:.2} m/s", self.speed_max_mps, limits.v_max_mps));
        }
        if self.clutter_range_max_m >= limits.r_max_m {
            return bad("clutter range exceeds r_max".into());
        }
        if !(self.distractor_speed_max_mps >= 0.0 && self.distractor_speed_max_mps < limits.v_max_mps) {
            return bad("distractor speed must lie in [0, v_max)".into());
        }
        if !(self.spread_azimuth_deg > 0.0 && self.spread_azimuth_deg <= radar.fov_half_angle_deg) {
            return bad("spread azimuth must lie in (0, radar field of view]".into());
        }
        let user_fov = self.start_azimuth_deg.abs().max(self.end_azimuth_deg.abs());
        if user_fov > radar.fov_half_angle_deg {
            return bad("trajectory leaves the radar field of view".into());
        }
        Ok(())
    }

    fn lane_x(&self, azimuth_deg: f64) -> f64 {
        self.lane_offset_m * azimuth_deg.to_radians().tan()
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates `n_samples` drive-by scenes.
///
/// Within a pass the user's lane position strictly increases frame to frame
/// (one uniformly jittered position per equal slot), so its azimuth sequence
/// is monotonic. Each scene gets its own seed drawn from `rng`.
pub fn generate_scenario(
    config: &ScenarioConfig,
    radar: &RadarConfig,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Scene>, SimError> {
    if n_samples == 0 {
        return Err(SimError::InvalidScenario("n_samples must be positive".into()));
    }
    config.validate(radar)?;
    let x_start = config.lane_x(config.start_azimuth_deg);
    let x_end = config.lane_x(config.end_azimuth_deg);
    let frames = config.frames_per_pass;

    let mut scenes = Vec::with_capacity(n_samples);
    let mut pass = (0.0, 0.0, 0.0);
    for l in 0..n_samples {
        let k = l % frames;
        if k == 0 {
            pass = (
                config.lane_offset_m + uniform(rng, -config.lane_jitter_m, config.lane_jitter_m),
                uniform(rng, config.speed_min_mps, config.speed_max_mps),
                uniform(rng, config.user_rcs_min, config.user_rcs_max),
            );
        }
        let (lane, speed, rcs) = pass;
        let slot = (k as f64 + rng.random::<f64>()) / frames as f64;
        let x = x_start + (x_end - x_start) * slot;
        let range = x.hypot(lane);
        let azimuth = x.atan2(lane).to_degrees();
        // d/dt sqrt(x^2 + y^2) with dx/dt = speed
        let radial = speed * x / range;

        let mut targets = Vec::with_capacity(1 + config.clutter_count + config.distractor_count);
        targets.push(Target::with_rcs(TargetKind::User, range, radial, azimuth, rcs));
        for _ in 0..config.clutter_count {
            targets.push(Target::with_rcs(
                TargetKind::Clutter,
                uniform(rng, config.clutter_range_min_m, config.clutter_range_max_m),
                0.0,
                uniform(rng, -config.spread_azimuth_deg, config.spread_azimuth_deg),
                uniform(rng, config.clutter_rcs_min, config.clutter_rcs_max),
            ));
        }
        for _ in 0..config.distractor_count {
            targets.push(Target::with_rcs(
                TargetKind::Distractor,
                uniform(rng, config.clutter_range_min_m, config.clutter_range_max_m),
                uniform(rng, -config.distractor_speed_max_mps, config.distractor_speed_max_mps),
                uniform(rng, -config.spread_azimuth_deg, config.spread_azimuth_deg),
                uniform(rng, config.distractor_rcs_min, config.distractor_rcs_max),
            ));
        }
        scenes.push(Scene { targets, seed: rng.random(), timestamp_index: l as u64 });
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gen(config: &ScenarioConfig, n: usize) -> Vec<Scene> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        generate_scenario(config, &RadarConfig::default(), n, &mut rng).unwrap()
    }

    #[test]
    fn no_clutter_single_target() {
        let scenes = gen(&ScenarioConfig::default(), 3);
        assert_eq!(scenes.len(), 3);
        for s in &scenes {
            assert_eq!(s.targets.len(), 1);
            s.validate_roles().unwrap();
        }
    }

    #[test]
    fn clutter_targets_are_static() {
        let cfg = ScenarioConfig { clutter_count: 5, ..Default::default() };
        for s in gen(&cfg, 20) {
            assert_eq!(s.targets.len(), 6);
            assert_eq!(s.targets.iter().filter(|t| t.radial_velocity_mps == 0.0).count(), 5);
            assert_eq!(s.count(TargetKind::Clutter), 5);
        }
    }

    #[test]
    fn drive_by_azimuth_is_monotonic() {
        let cfg = ScenarioConfig { frames_per_pass: 100, ..Default::default() };
        let scenes = gen(&cfg, 100);
        let az: Vec<f64> = scenes.iter().map(|s| s.user_truth().unwrap().azimuth_deg).collect();
        assert!(az.windows(2).all(|w| w[0] < w[1]));
        assert!(az[0] >= -61.0 && az[99] <= 61.0);
        // left of boresight approaching, right of it receding
        assert!(scenes[0].targets[0].radial_velocity_mps < 0.0);
        assert!(scenes[99].targets[0].radial_velocity_mps > 0.0);
    }

    #[test]
    fn distractors_and_timestamps() {
        let cfg = ScenarioConfig { clutter_count: 2, distractor_count: 3, ..Default::default() };
        let scenes = gen(&cfg, 250);
        for (l, s) in scenes.iter().enumerate() {
            assert_eq!(s.timestamp_index, l as u64);
            assert_eq!(s.count(TargetKind::Distractor), 3);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ScenarioConfig { clutter_count: 3, ..Default::default() };
        assert_eq!(gen(&cfg, 50), gen(&cfg, 50));
    }

    #[test]
    fn rejects_out_of_bounds_trajectories() {
        let radar = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let far = ScenarioConfig { lane_offset_m: 30.0, ..Default::default() };
        assert!(generate_scenario(&far, &radar, 1, &mut rng).is_err());
        let fast = ScenarioConfig { speed_max_mps: 20.0, ..Default::default() };
        assert!(generate_scenario(&fast, &radar, 1, &mut rng).is_err());
        assert!(generate_scenario(&ScenarioConfig::default(), &radar, 0, &mut rng).is_err());
    }
}
