//! Mission profiles: reference trajectories and randomized obstacle fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ObstacleKind};
use crate::dynamics::{ObstacleTrajectory, ReflectBox, TrajectoryKind};
use crate::math::{Rng, Vec3};
use crate::tracking::PositionReference;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("failed to place obstacle {index} clear of the start after {attempts} attempts")]
    Placement { index: usize, attempts: usize },
}

/// Which mission profile a flight runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionKind {
    /// Laps of a figure-eight at fixed altitude with a sparse obstacle set.
    Infinity,
    /// One pass through a long corridor dense with obstacles.
    Corridor,
}

impl MissionKind {
    pub fn name(&self) -> &'static str {
        match self {
            MissionKind::Infinity => "infinity",
            MissionKind::Corridor => "corridor",
        }
    }
}

/// Flight duration for the profile (s).
pub fn mission_duration(cfg: &Config, kind: MissionKind) -> f64 {
    match kind {
        MissionKind::Infinity => cfg.infinity.duration,
        MissionKind::Corridor => cfg.corridor.length / cfg.corridor.speed,
    }
}

fn infinity_reference(cfg: &Config, t: f64) -> PositionReference {
    let m = &cfg.infinity;
    let w1 = 2.0 * std::f64::consts::PI / m.period;
    let w2 = 2.0 * w1;
    let (s1, c1) = (w1 * t).sin_cos();
    let (s2, c2) = (w2 * t).sin_cos();
    PositionReference {
        position: Vec3::new(m.amp_x * s1, m.amp_y * s2 / 2.0, m.altitude),
        velocity: Vec3::new(m.amp_x * w1 * c1, m.amp_y * w2 * c2 / 2.0, 0.0),
        acceleration: Vec3::new(-m.amp_x * w1 * w1 * s1, -m.amp_y * w2 * w2 * s2 / 2.0, 0.0),
    }
}

fn corridor_reference(cfg: &Config, t: f64) -> PositionReference {
    let m = &cfg.corridor;
    let w = 2.0 * std::f64::consts::PI / m.period;
    let (s, c) = (w * t).sin_cos();
    PositionReference {
        position: Vec3::new(m.speed * t, m.amplitude * s, m.altitude),
        velocity: Vec3::new(m.speed, m.amplitude * w * c, 0.0),
        acceleration: Vec3::new(0.0, -m.amplitude * w * w * s, 0.0),
    }
}

/// Reference position, velocity, and acceleration at time `t`. Outside
/// `[0, duration]` the reference clamps to the endpoint with zero
/// derivatives.
pub fn reference_at(cfg: &Config, kind: MissionKind, t: f64) -> PositionReference {
    let duration = mission_duration(cfg, kind);
    let clamped = t.clamp(0.0, duration);
    let inner = match kind {
        MissionKind::Infinity => infinity_reference(cfg, clamped),
        MissionKind::Corridor => corridor_reference(cfg, clamped),
    };
    if (t - clamped).abs() > 0.0 {
        PositionReference::hold(inner.position)
    } else {
        inner
    }
}

/// Spatial region obstacles live in (also their reflective walls).
pub fn obstacle_region(cfg: &Config, kind: MissionKind) -> ReflectBox {
    match kind {
        MissionKind::Infinity => {
            let m = &cfg.infinity;
            ReflectBox {
                lo: Vec3::new(
                    -(m.amp_x + m.region_pad),
                    -(m.amp_y / 2.0 + m.region_pad),
                    m.altitude,
                ),
                hi: Vec3::new(
                    m.amp_x + m.region_pad,
                    m.amp_y / 2.0 + m.region_pad,
                    m.altitude,
                ),
            }
        }
        MissionKind::Corridor => {
            let m = &cfg.corridor;
            ReflectBox {
                lo: Vec3::new(0.0, -m.width / 2.0, m.altitude),
                hi: Vec3::new(m.length, m.width / 2.0, m.altitude),
            }
        }
    }
}

/// One obstacle of a generated field.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimObstacle {
    pub trajectory: ObstacleTrajectory,
    pub radius_true: f64,
    pub radius_barrier: f64,
}

/// Sample the obstacle field for a mission. Obstacles live at flight
/// altitude inside the mission region with reflective walls; initial
/// positions clear the vehicle start by at least the barrier radius.
pub fn generate_obstacles(
    cfg: &Config,
    kind: MissionKind,
    rng: &mut Rng,
) -> Result<Vec<SimObstacle>, GenerationError> {
    let region = obstacle_region(cfg, kind);
    let (count, kinds) = match kind {
        MissionKind::Infinity => (cfg.infinity.obstacle_count, &cfg.infinity.kinds),
        MissionKind::Corridor => (cfg.corridor.obstacle_count, &cfg.corridor.kinds),
    };
    let start = reference_at(cfg, kind, 0.0).position;
    let radius_true = cfg.obstacles.radius_true;
    let radius_barrier = cfg.barrier_radius();
    let o = &cfg.obstacles;
    let clearance = o.spawn_clearance.max(radius_barrier);

    let mut field = Vec::with_capacity(count);
    for index in 0..count {
        let mut placed = None;
        for _ in 0..o.spawn_attempts {
            let anchor = Vec3::new(
                rng.range(region.lo.x, region.hi.x),
                rng.range(region.lo.y, region.hi.y),
                region.lo.z,
            );
            if (anchor - start).norm() < clearance {
                continue;
            }
            let kind_pick = kinds[rng.pick(kinds.len())];
            let traj_kind = match kind_pick {
                ObstacleKind::Static => TrajectoryKind::Static,
                ObstacleKind::Linear => {
                    let speed = rng.range(o.speed_min, o.speed_max);
                    let heading = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
                    TrajectoryKind::Linear {
                        velocity: Vec3::new(speed * heading.cos(), speed * heading.sin(), 0.0),
                    }
                }
                ObstacleKind::Sinusoidal => {
                    let amp = rng.range(o.sin_amp_min, o.sin_amp_max);
                    let dir = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
                    TrajectoryKind::Sinusoidal {
                        velocity: Vec3::zero(),
                        amplitude: Vec3::new(amp * dir.cos(), amp * dir.sin(), 0.0),
                        angular_freq: rng.range(o.sin_freq_min, o.sin_freq_max),
                        phase: rng.range(0.0, 2.0 * std::f64::consts::PI),
                    }
                }
            };
            placed = Some(SimObstacle {
                trajectory: ObstacleTrajectory {
                    anchor,
                    kind: traj_kind,
                    bounds: Some(region),
                },
                radius_true,
                radius_barrier,
            });
            break;
        }
        match placed {
            Some(obstacle) => field.push(obstacle),
            None => {
                return Err(GenerationError::Placement {
                    index,
                    attempts: o.spawn_attempts,
                })
            }
        }
    }
    Ok(field)
}
