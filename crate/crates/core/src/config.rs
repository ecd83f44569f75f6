//! Run configuration: one TOML document covering every module parameter.
//!
//! Parsing is strict (unknown keys are rejected) and every value is
//! validated with a named field in the error, so batch results can always
//! be traced to an exact, fully-resolved configuration. The resolved
//! configuration is embedded verbatim in output metadata.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::UavParams;
use crate::math::Vec3;
use crate::perception::{QualityMode, RiskParams, SensorModel, YawOptConfig};
use crate::safety::CbfParams;
use crate::sensing::{CoastModel, ExplorationPeak};
use crate::tracking::{lqr_synthesize, AttitudeGains, LqrGain};

#[derive(Debug, Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub uav: UavConfig,
    pub lqr: LqrConfig,
    pub attitude: AttitudeConfig,
    pub cbf: CbfConfig,
    pub clf: ClfConfig,
    pub qp: QpConfig,
    pub sensor: SensorConfig,
    pub risk: RiskConfig,
    pub yaw_opt: YawOptSection,
    pub policy: PolicyConfig,
    pub sim: SimSection,
    pub infinity: InfinityConfig,
    pub corridor: CorridorConfig,
    pub obstacles: ObstacleConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            uav: UavConfig::default(),
            lqr: LqrConfig::default(),
            attitude: AttitudeConfig::default(),
            cbf: CbfConfig::default(),
            clf: ClfConfig::default(),
            qp: QpConfig::default(),
            sensor: SensorConfig::default(),
            risk: RiskConfig::default(),
            yaw_opt: YawOptSection::default(),
            policy: PolicyConfig::default(),
            sim: SimSection::default(),
            infinity: InfinityConfig::default(),
            corridor: CorridorConfig::default(),
            obstacles: ObstacleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavConfig {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub radius: f64,
    pub mu_min: [f64; 3],
    pub mu_max: [f64; 3],
}

impl Default for UavConfig {
    fn default() -> Self {
        let p = UavParams::crazyflie();
        Self {
            mass: p.mass,
            inertia: p.inertia.as_array(),
            radius: p.radius,
            mu_min: p.mu_min.as_array(),
            mu_max: p.mu_max.as_array(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrConfig {
    pub q_pos: f64,
    pub q_vel: f64,
    pub r_weight: f64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        // Closed-loop natural frequency about 2 rad/s per axis, critically
        // damped.
        Self {
            q_pos: 16.0,
            q_vel: 8.0,
            r_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttitudeConfig {
    pub k_q: f64,
    pub k_omega: f64,
}

impl Default for AttitudeConfig {
    fn default() -> Self {
        Self {
            k_q: 1800.0,
            k_omega: 60.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbfConfig {
    pub zeta: f64,
    pub omega_n: f64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        Self {
            zeta: 1.0,
            omega_n: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClfConfig {
    pub rate: f64,
}

impl Default for ClfConfig {
    fn default() -> Self {
        Self { rate: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpConfig {
    pub weight: [f64; 3],
    pub slack_weight: f64,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            weight: [1.0, 1.0, 1.0],
            slack_weight: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub half_angle_deg: f64,
    /// Defaults to the half-angle (quality reaches zero exactly at the FOV
    /// edge).
    pub degrade_angle_deg: Option<f64>,
    pub max_range: f64,
    pub mode: QualityMode,
    /// Testing hook: every obstacle is detected every step.
    pub omniscient: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            half_angle_deg: 50.0,
            degrade_angle_deg: None,
            max_range: 4.0,
            mode: QualityMode::Degraded,
            omniscient: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub nominal_height: f64,
    pub risk_decay: f64,
    pub nominal_sharpness: f64,
    pub confidence_decay: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            nominal_height: 1.0,
            risk_decay: 0.5,
            nominal_sharpness: 8.0,
            confidence_decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YawOptSection {
    pub rate_penalty: f64,
    pub increment_deg: f64,
    pub quadrature_points: usize,
}

impl Default for YawOptSection {
    fn default() -> Self {
        Self {
            rate_penalty: 0.002,
            increment_deg: 9.0,
            quadrature_points: 17,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Heading used by the fixed-yaw arm.
    pub fixed_value_deg: f64,
    /// Heading at flight start, also the initial previous-solution value
    /// for the rate penalty.
    pub initial_yaw_deg: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            fixed_value_deg: 0.0,
            initial_yaw_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Control, perception, and physics all tick at this rate.
    pub control_hz: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { control_hz: 500.0 }
    }
}

/// Obstacle motion families available to the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Static,
    Linear,
    Sinusoidal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfinityConfig {
    /// Half-extent of the track along x (m).
    pub amp_x: f64,
    /// Figure-height parameter; the track spans `[-amp_y/2, amp_y/2]` in y.
    pub amp_y: f64,
    pub period: f64,
    pub altitude: f64,
    pub duration: f64,
    pub obstacle_count: usize,
    /// Obstacle region padding beyond the track extents (m).
    pub region_pad: f64,
    pub kinds: Vec<ObstacleKind>,
    /// Fixed gaze-bias peaks for this mission; empty disables exploration.
    pub exploration: Vec<ExplorationPeak>,
}

impl Default for InfinityConfig {
    fn default() -> Self {
        Self {
            amp_x: 1.0,
            amp_y: 1.0,
            period: 10.0,
            altitude: 0.5,
            duration: 30.0,
            obstacle_count: 2,
            region_pad: 1.2,
            kinds: vec![ObstacleKind::Linear],
            exploration: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorConfig {
    pub length: f64,
    pub width: f64,
    /// Lateral amplitude of the reference sine (m).
    pub amplitude: f64,
    pub period: f64,
    /// Forward speed along the corridor (m/s).
    pub speed: f64,
    pub altitude: f64,
    pub obstacle_count: usize,
    pub kinds: Vec<ObstacleKind>,
    /// Fixed gaze-bias peaks for this mission; empty disables exploration.
    pub exploration: Vec<ExplorationPeak>,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self {
            length: 15.0,
            width: 2.0,
            amplitude: 0.75,
            period: 6.0,
            speed: 0.4,
            altitude: 0.5,
            obstacle_count: 20,
            kinds: vec![ObstacleKind::Sinusoidal],
            exploration: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleConfig {
    pub radius_true: f64,
    pub safety_factor: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub sin_amp_min: f64,
    pub sin_amp_max: f64,
    pub sin_freq_min: f64,
    pub sin_freq_max: f64,
    pub coast: CoastModel,
    pub spawn_attempts: usize,
    /// Minimum distance between an obstacle's initial position and the
    /// vehicle start; clamped up to the barrier radius.
    pub spawn_clearance: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            radius_true: 0.10,
            safety_factor: 1.5,
            speed_min: 0.1,
            speed_max: 0.25,
            sin_amp_min: 0.3,
            sin_amp_max: 0.6,
            sin_freq_min: 0.2,
            sin_freq_max: 0.6,
            coast: CoastModel::HoldPosition,
            spawn_attempts: 1000,
            spawn_clearance: 0.8,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| bad("<toml>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("<config path>", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.uav.mass <= 0.0 {
            return Err(bad("uav.mass", "must be positive"));
        }
        if self.uav.inertia.iter().any(|&j| j <= 0.0) {
            return Err(bad("uav.inertia", "diagonal entries must be positive"));
        }
        if self.uav.radius <= 0.0 {
            return Err(bad("uav.radius", "must be positive"));
        }
        for axis in 0..3 {
            if self.uav.mu_min[axis] >= self.uav.mu_max[axis] {
                return Err(bad(
                    "uav.mu_min",
                    format!("must be below uav.mu_max on axis {axis}"),
                ));
            }
        }
        if self.lqr.q_pos <= 0.0 || self.lqr.q_vel < 0.0 || self.lqr.r_weight <= 0.0 {
            return Err(bad("lqr", "weights must be positive (q_vel may be zero)"));
        }
        if self.attitude.k_q <= 0.0 || self.attitude.k_omega <= 0.0 {
            return Err(bad("attitude", "gains must be positive"));
        }
        if self.cbf.zeta < 1.0 {
            return Err(bad(
                "cbf.zeta",
                "must be at least 1: the barrier characteristic roots are real \
                 and negative only for zeta >= 1 with omega_n > 0",
            ));
        }
        if self.cbf.omega_n <= 0.0 {
            return Err(bad("cbf.omega_n", "must be positive"));
        }
        if self.clf.rate <= 0.0 {
            return Err(bad("clf.rate", "must be positive"));
        }
        if self.qp.weight.iter().any(|&w| w <= 0.0) {
            return Err(bad("qp.weight", "diagonal entries must be positive"));
        }
        if self.qp.slack_weight <= 0.0 {
            return Err(bad("qp.slack_weight", "must be positive"));
        }
        let sigma = self.sensor.half_angle_deg.to_radians();
        if !(sigma > 0.0 && sigma <= std::f64::consts::PI) {
            return Err(bad("sensor.half_angle_deg", "must be in (0, 180]"));
        }
        if let Some(kappa) = self.sensor.degrade_angle_deg {
            if self.sensor.mode == QualityMode::Degraded
                && (kappa < self.sensor.half_angle_deg || kappa > 180.0)
            {
                return Err(bad(
                    "sensor.degrade_angle_deg",
                    "must lie in [half_angle_deg, 180] so quality stays in [0, 1] on the FOV",
                ));
            }
        }
        if self.sensor.max_range <= 0.0 {
            return Err(bad("sensor.max_range", "must be positive"));
        }
        if self.risk.nominal_height <= 0.0
            || self.risk.risk_decay <= 0.0
            || self.risk.nominal_sharpness <= 0.0
            || self.risk.confidence_decay <= 0.0
        {
            return Err(bad("risk", "all parameters must be positive"));
        }
        if self.yaw_opt.rate_penalty < 0.0 {
            return Err(bad("yaw_opt.rate_penalty", "must be non-negative"));
        }
        let grid = (360.0 / self.yaw_opt.increment_deg).round();
        if !(self.yaw_opt.increment_deg > 0.0) || grid < 8.0 {
            return Err(bad(
                "yaw_opt.increment_deg",
                "must divide the circle into at least 8 samples",
            ));
        }
        if self.yaw_opt.quadrature_points < 16 {
            return Err(bad("yaw_opt.quadrature_points", "must be at least 16"));
        }
        if !(self.sim.control_hz >= 100.0) {
            return Err(bad(
                "sim.control_hz",
                "must be at least 100 (integration step at most 10 ms)",
            ));
        }
        if self.infinity.period <= 0.0 || self.infinity.duration <= 0.0 {
            return Err(bad("infinity", "period and duration must be positive"));
        }
        if self.infinity.amp_x <= 0.0 || self.infinity.amp_y <= 0.0 {
            return Err(bad("infinity", "track extents must be positive"));
        }
        if self.infinity.kinds.is_empty() {
            return Err(bad("infinity.kinds", "at least one obstacle kind"));
        }
        if self.corridor.length <= 0.0 || self.corridor.width <= 0.0 || self.corridor.speed <= 0.0
        {
            return Err(bad("corridor", "geometry and speed must be positive"));
        }
        if self.corridor.amplitude > self.corridor.width / 2.0 {
            return Err(bad(
                "corridor.amplitude",
                "reference sine must stay inside the corridor half-width",
            ));
        }
        if self.corridor.period <= 0.0 {
            return Err(bad("corridor.period", "must be positive"));
        }
        if self.corridor.kinds.is_empty() {
            return Err(bad("corridor.kinds", "at least one obstacle kind"));
        }
        if self.obstacles.radius_true <= 0.0 {
            return Err(bad("obstacles.radius_true", "must be positive"));
        }
        if self.obstacles.safety_factor < 1.0 {
            return Err(bad("obstacles.safety_factor", "must be at least 1"));
        }
        if self.obstacles.speed_min < 0.0 || self.obstacles.speed_max < self.obstacles.speed_min {
            return Err(bad("obstacles.speed_min", "need 0 <= speed_min <= speed_max"));
        }
        if self.obstacles.sin_amp_min < 0.0
            || self.obstacles.sin_amp_max < self.obstacles.sin_amp_min
        {
            return Err(bad("obstacles.sin_amp_min", "need 0 <= min <= max"));
        }
        if self.obstacles.sin_freq_min <= 0.0
            || self.obstacles.sin_freq_max < self.obstacles.sin_freq_min
        {
            return Err(bad("obstacles.sin_freq_min", "need 0 < min <= max"));
        }
        if self.obstacles.spawn_attempts == 0 {
            return Err(bad("obstacles.spawn_attempts", "must be positive"));
        }
        if self.obstacles.spawn_clearance < 0.0 {
            return Err(bad("obstacles.spawn_clearance", "must be non-negative"));
        }
        for (section, peaks) in [
            ("infinity.exploration", &self.infinity.exploration),
            ("corridor.exploration", &self.corridor.exploration),
        ] {
            for (i, p) in peaks.iter().enumerate() {
                if p.height <= 0.0 || p.sharpness <= 0.0 {
                    return Err(bad(
                        section,
                        format!("peak {i}: height and sharpness must be positive"),
                    ));
                }
            }
        }
        Ok(())
    }

    // Typed views consumed by the modules.

    pub fn uav_params(&self) -> UavParams {
        UavParams {
            mass: self.uav.mass,
            inertia: Vec3::from(self.uav.inertia),
            mu_min: Vec3::from(self.uav.mu_min),
            mu_max: Vec3::from(self.uav.mu_max),
            radius: self.uav.radius,
        }
    }

    pub fn lqr_gain(&self) -> LqrGain {
        // Weights are validated positive, so synthesis cannot fail.
        lqr_synthesize(self.lqr.q_pos, self.lqr.q_vel, self.lqr.r_weight)
            .expect("validated LQR weights")
    }

    pub fn attitude_gains(&self) -> AttitudeGains {
        AttitudeGains {
            k_q: self.attitude.k_q,
            k_omega: self.attitude.k_omega,
        }
    }

    pub fn cbf_params(&self) -> CbfParams {
        CbfParams {
            zeta: self.cbf.zeta,
            omega_n: self.cbf.omega_n,
        }
    }

    pub fn sensor_model(&self) -> SensorModel {
        let half = self.sensor.half_angle_deg.to_radians();
        SensorModel {
            half_angle: half,
            degrade_angle: self
                .sensor
                .degrade_angle_deg
                .map(f64::to_radians)
                .unwrap_or(half),
            max_range: self.sensor.max_range,
            mode: self.sensor.mode,
        }
    }

    pub fn risk_params(&self) -> RiskParams {
        RiskParams {
            nominal_height: self.risk.nominal_height,
            risk_decay: self.risk.risk_decay,
            nominal_sharpness: self.risk.nominal_sharpness,
            confidence_decay: self.risk.confidence_decay,
        }
    }

    pub fn yaw_opt(&self) -> YawOptConfig {
        YawOptConfig {
            rate_penalty: self.yaw_opt.rate_penalty,
            search_increment: self.yaw_opt.increment_deg.to_radians(),
            quadrature_points: self.yaw_opt.quadrature_points,
        }
    }

    /// Control/physics step (s).
    pub fn dt(&self) -> f64 {
        1.0 / self.sim.control_hz
    }

    /// Barrier radius from physical radius, vehicle size, and safety factor.
    pub fn barrier_radius(&self) -> f64 {
        self.obstacles.safety_factor * (self.obstacles.radius_true + self.uav.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = Config::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(
            serde_json::to_string(&cfg).unwrap(),
            serde_json::to_string(&back).unwrap()
        );
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = Config::from_toml_str("[cbf]\nzeta = 1.0\nbogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus") || err.field == "<toml>");
    }

    #[test]
    fn rejects_inadmissible_zeta() {
        let err = Config::from_toml_str("[cbf]\nzeta = 0.5\n").unwrap_err();
        assert_eq!(err.field, "cbf.zeta");
        assert!(err.to_string().contains("zeta >= 1"));
    }

    #[test]
    fn rejects_degrade_angle_below_half_angle() {
        let err =
            Config::from_toml_str("[sensor]\nhalf_angle_deg = 40.0\ndegrade_angle_deg = 20.0\n")
                .unwrap_err();
        assert_eq!(err.field, "sensor.degrade_angle_deg");
    }

    #[test]
    fn rejects_coarse_grid() {
        let err = Config::from_toml_str("[yaw_opt]\nincrement_deg = 60.0\n").unwrap_err();
        assert_eq!(err.field, "yaw_opt.increment_deg");
    }

    #[test]
    fn barrier_radius_composition() {
        let cfg = Config::default();
        assert!((cfg.barrier_radius() - 1.5 * (0.10 + 0.06)).abs() < 1e-12);
        assert!((cfg.barrier_radius() - 0.24).abs() < 1e-12);
    }
}
