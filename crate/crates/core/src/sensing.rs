//! Simulated field-of-view sensor and per-obstacle track maintenance.
//!
//! Detection is planar: the sensor sweeps the yaw axis and an obstacle is
//! detected only when its entire horizontal silhouette fits inside the
//! angular field of view and within range. Detected obstacles get truth
//! kinematics (the sensor is idealized); undetected ones coast on their last
//! velocity while their staleness clock runs.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ObstacleState, UavState};
use crate::math::{wrap_angle, Vec3};
use crate::perception::{confidence_beta, risk_alpha, DensityPeak, DensityScene, RiskParams, SensorModel};
use crate::safety::{cbf_row, CbfParams};

/// Perception record for one obstacle that has been seen at least once.
/// Obstacles that were never detected have no track and contribute nothing
/// downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrack {
    pub id: usize,
    /// Estimated position: truth at detection, propagated while unseen (m).
    pub position: Vec3,
    /// Estimated velocity: truth at last detection (m/s).
    pub velocity: Vec3,
    /// Seconds since the obstacle was last inside the field of view.
    pub time_since_seen: f64,
    /// Latest barrier constraint value at the probe acceleration.
    pub h_value: f64,
    /// Barrier radius used for this obstacle's constraint row (m).
    pub radius_barrier: f64,
}

/// Propagation model for unseen tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoastModel {
    /// Integrate the last seen velocity.
    ConstantVelocity,
    /// Freeze the last seen position.
    HoldPosition,
}

/// Fixed world-frame density peak used to bias the gaze when no obstacle
/// risk is present (disabled by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationPeak {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub sharpness: f64,
}

/// True when the obstacle's horizontal silhouette lies entirely inside the
/// sensor field of view at heading `psi` and within range.
///
/// An interpenetrating obstacle counts as detected: the flight is already
/// in contact and hiding it would only corrupt the record.
pub fn detect(uav: &UavState, psi: f64, sensor: &SensorModel, obs: &ObstacleState) -> bool {
    let rel = obs.position - uav.position;
    let dist = rel.norm_xy();
    if dist < obs.radius_true {
        return true;
    }
    if dist > sensor.max_range - obs.radius_true {
        return false;
    }
    let bearing = rel.y.atan2(rel.x);
    let half_width = (obs.radius_true / dist).asin();
    wrap_angle(bearing - psi).abs() + half_width <= sensor.half_angle
}

/// Advance the track set one control step.
///
/// Detected obstacles snap to truth with a reset staleness clock; unseen
/// tracks coast and age; never-seen obstacles stay absent. Every surviving
/// track's barrier value is recomputed from its current estimate at the
/// probe acceleration.
#[allow(clippy::too_many_arguments)]
pub fn update_tracks(
    tracks: &mut Vec<ObstacleTrack>,
    detections: &[bool],
    truth: &[ObstacleState],
    uav: &UavState,
    mu_probe: Vec3,
    cbf: &CbfParams,
    coast: CoastModel,
    dt: f64,
) {
    debug_assert!(dt > 0.0);
    debug_assert_eq!(detections.len(), truth.len());

    for (id, (&seen, obs)) in detections.iter().zip(truth).enumerate() {
        let existing = tracks.iter_mut().find(|t| t.id == id);
        match (seen, existing) {
            (true, Some(track)) => {
                track.position = obs.position;
                track.velocity = obs.velocity;
                track.time_since_seen = 0.0;
                track.radius_barrier = obs.radius_barrier;
            }
            (true, None) => {
                tracks.push(ObstacleTrack {
                    id,
                    position: obs.position,
                    velocity: obs.velocity,
                    time_since_seen: 0.0,
                    h_value: 0.0,
                    radius_barrier: obs.radius_barrier,
                });
                tracks.sort_by_key(|t| t.id);
            }
            (false, Some(track)) => {
                if coast == CoastModel::ConstantVelocity {
                    track.position = track.position + track.velocity * dt;
                }
                track.time_since_seen += dt;
            }
            (false, None) => {}
        }
    }

    for track in tracks.iter_mut() {
        let estimate = ObstacleState {
            position: track.position,
            velocity: track.velocity,
            radius_true: 0.0,
            radius_barrier: track.radius_barrier,
        };
        if let Ok(row) = cbf_row(uav, mu_probe, &estimate, Vec3::zero(), cbf) {
            track.h_value = row.h_value;
        }
        // Singular geometry (track on top of the vehicle) keeps the last h.
    }
}

/// Build the density snapshot from the current tracks, in UAV-relative
/// polar coordinates, plus any configured exploration peaks.
pub fn scene_from_tracks(
    uav: &UavState,
    tracks: &[ObstacleTrack],
    risk: &RiskParams,
    exploration: &[ExplorationPeak],
) -> DensityScene {
    let mut peaks = Vec::with_capacity(tracks.len() + exploration.len());
    for track in tracks {
        let rel = track.position - uav.position;
        peaks.push(DensityPeak {
            range: rel.norm_xy(),
            bearing: wrap_angle(rel.y.atan2(rel.x)),
            height: risk_alpha(track.h_value, risk),
            sharpness: confidence_beta(track.time_since_seen, risk),
        });
    }
    for e in exploration {
        let rel = Vec3::new(e.x, e.y, 0.0) - Vec3::new(uav.position.x, uav.position.y, 0.0);
        peaks.push(DensityPeak {
            range: rel.norm_xy(),
            bearing: wrap_angle(rel.y.atan2(rel.x)),
            height: e.height,
            sharpness: e.sharpness,
        });
    }
    DensityScene { peaks }
}
