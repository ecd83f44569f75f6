//! Heuristic yaw policies used as comparison arms against the risk-aware
//! optimizer.

use serde::{Deserialize, Serialize};

use crate::dynamics::UavState;
use crate::math::wrap_angle;
use crate::sensing::ObstacleTrack;
use crate::tracking::PositionReference;

/// Yaw reference source for a flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YawPolicy {
    /// Constant heading.
    Fixed { value: f64 },
    /// Point at the position reference (previews the upcoming airspace).
    LookAhead,
    /// Point at the closest currently tracked obstacle; with no tracks,
    /// fall back to look-ahead.
    NearestObstacle,
    /// Risk-aware global search over the density objective.
    SafetyAware,
}

impl YawPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            YawPolicy::Fixed { .. } => "fixed",
            YawPolicy::LookAhead => "look_ahead",
            YawPolicy::NearestObstacle => "nearest",
            YawPolicy::SafetyAware => "safety_aware",
        }
    }
}

/// Constant-heading policy.
pub fn fixed_yaw(value: f64) -> f64 {
    wrap_angle(value)
}

/// Bearing from the vehicle to the position reference, in the horizontal
/// plane. Holds the previous heading when the reference is effectively
/// overhead (horizontal distance below 1 mm).
pub fn look_ahead(uav: &UavState, reference: &PositionReference, psi_prev: f64) -> f64 {
    let rel = reference.position - uav.position;
    if rel.norm_xy() < 1e-3 {
        wrap_angle(psi_prev)
    } else {
        rel.y.atan2(rel.x)
    }
}

/// Bearing to the closest tracked obstacle by horizontal distance; ties go
/// to the lower track id (iteration order), and an empty track set falls
/// back to [`look_ahead`].
pub fn nearest_obstacle(
    uav: &UavState,
    tracks: &[ObstacleTrack],
    reference: &PositionReference,
    psi_prev: f64,
) -> f64 {
    let mut best: Option<(f64, f64)> = None; // (distance, bearing)
    for track in tracks {
        let rel = track.position - uav.position;
        let dist = rel.norm_xy();
        let closer = match best {
            Some((d, _)) => dist < d,
            None => true,
        };
        if closer {
            best = Some((dist, rel.y.atan2(rel.x)));
        }
    }
    match best {
        Some((_, bearing)) => wrap_angle(bearing),
        None => look_ahead(uav, reference, psi_prev),
    }
}
