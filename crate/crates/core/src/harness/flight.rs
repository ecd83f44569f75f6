//! Closed-loop flight execution and post-flight classification.
//!
//! One control step runs: sense, maintain tracks, pick the yaw reference,
//! compute the tracking acceleration, filter it through the safety QP,
//! synthesize force/attitude/torque, and integrate the rigid body. Control,
//! perception, and physics share the same tick.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dynamics::{obstacle_state_at, step_uav, ObstacleState, UavState};
use crate::math::{wrap_angle, Quat, Vec3};
use crate::perception::optimal_yaw;
use crate::policy::{fixed_yaw, look_ahead, nearest_obstacle, YawPolicy};
use crate::safety::{
    barrier_value, cbf_row, clf_row, least_violating_mu, solve_qp, CbfRow, QpProblem, QpStatus,
};
use crate::sensing::{detect, scene_from_tracks, update_tracks, ObstacleTrack};
use crate::tracking::{attitude_control, compose_desired_attitude, force_from_mu, position_control};

use super::mission::{generate_obstacles, mission_duration, reference_at, GenerationError, MissionKind, SimObstacle};

/// Wall-clock statistics of the yaw optimizer, in microseconds.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct TimingStats {
    pub count: u64,
    pub total_us: f64,
    pub max_us: f64,
}

impl TimingStats {
    pub fn record(&mut self, us: f64) {
        self.count += 1;
        self.total_us += us;
        if us > self.max_us {
            self.max_us = us;
        }
    }

    pub fn merge(&mut self, other: &TimingStats) {
        self.count += other.count;
        self.total_us += other.total_us;
        if other.max_us > self.max_us {
            self.max_us = other.max_us;
        }
    }

    pub fn mean_us(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total_us / self.count as f64
        }
    }
}

/// Everything logged for a single control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub state: UavState,
    pub mu_desired: Vec3,
    pub mu: Vec3,
    pub delta: f64,
    pub psi_d: f64,
    pub qp_feasible: bool,
    pub tracks: Vec<ObstacleTrack>,
    /// True barrier value per obstacle at the post-step state.
    pub barriers: Vec<f64>,
}

/// Complete log of one simulated flight plus its verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlightRecord {
    pub profile: MissionKind,
    pub policy: YawPolicy,
    pub seed: u64,
    pub total_steps: usize,
    pub infeasible_steps: usize,
    /// Minimum over time and obstacles of the true barrier value.
    pub min_barrier: f64,
    /// Minimum over time and obstacles of body-to-body clearance.
    pub min_clearance: f64,
    /// Largest position tracking error after the initial transient (m).
    pub max_tracking_error: f64,
    /// RMS of the wrapped yaw tracking error after the initial transient.
    pub yaw_rms_error: f64,
    pub blew_up: bool,
    pub collision_free: bool,
    pub safe: bool,
    pub yaw_timing: TimingStats,
    /// Per-step series; empty unless step recording was requested.
    pub steps: Vec<StepRecord>,
}

/// Transient window excluded from tracking-error statistics (s).
const SETTLE_TIME: f64 = 5.0;

/// Two-tier verdict from the logged minima: collision-free means the bodies
/// never touched (strict), safe means the barrier never went negative.
/// A numerical blow-up fails both.
pub fn classify(record: &FlightRecord) -> (bool, bool) {
    if record.blew_up {
        return (false, false);
    }
    let collision_free = record.min_clearance > 0.0;
    let safe = record.min_barrier >= 0.0;
    (collision_free, safe)
}

/// Run one flight on an explicit obstacle field.
pub fn run_flight_with(
    cfg: &Config,
    kind: MissionKind,
    policy: YawPolicy,
    obstacles: &[SimObstacle],
    seed: u64,
    record_steps: bool,
) -> FlightRecord {
    let dt = cfg.dt();
    let duration = mission_duration(cfg, kind);
    let total_steps = (duration / dt).round() as usize;

    let params = cfg.uav_params();
    let gain = cfg.lqr_gain();
    let att_gains = cfg.attitude_gains();
    let cbf_params = cfg.cbf_params();
    let sensor = cfg.sensor_model();
    let risk = cfg.risk_params();
    let yaw_cfg = cfg.yaw_opt();
    let exploration = match kind {
        MissionKind::Infinity => cfg.infinity.exploration.as_slice(),
        MissionKind::Corridor => cfg.corridor.exploration.as_slice(),
    };
    let initial_yaw = cfg.policy.initial_yaw_deg.to_radians();

    let mut state = UavState::at_rest(reference_at(cfg, kind, 0.0).position, initial_yaw);
    let mut tracks: Vec<ObstacleTrack> = Vec::new();
    let mut psi_prev = wrap_angle(initial_yaw);
    let mut q_d_prev = Quat::from_yaw(initial_yaw);

    let mut record = FlightRecord {
        profile: kind,
        policy,
        seed,
        total_steps,
        infeasible_steps: 0,
        min_barrier: f64::INFINITY,
        min_clearance: f64::INFINITY,
        max_tracking_error: 0.0,
        yaw_rms_error: 0.0,
        blew_up: false,
        collision_free: false,
        safe: false,
        yaw_timing: TimingStats::default(),
        steps: Vec::new(),
    };
    if record_steps {
        record.steps.reserve(total_steps);
    }

    let mut truth: Vec<ObstacleState> = Vec::with_capacity(obstacles.len());
    let mut detections: Vec<bool> = Vec::with_capacity(obstacles.len());
    let mut rows: Vec<CbfRow> = Vec::with_capacity(obstacles.len());

    let update_minima = |record: &mut FlightRecord, pos: Vec3, truth: &[ObstacleState]| {
        for obs in truth {
            let dist = (obs.position - pos).norm();
            let clearance = dist - obs.radius_true - params.radius;
            let barrier = dist - obs.radius_barrier;
            if clearance < record.min_clearance {
                record.min_clearance = clearance;
            }
            if barrier < record.min_barrier {
                record.min_barrier = barrier;
            }
        }
    };

    truth.clear();
    truth.extend(
        obstacles
            .iter()
            .map(|o| obstacle_state_at(&o.trajectory, o.radius_true, o.radius_barrier, 0.0)),
    );
    update_minima(&mut record, state.position, &truth);

    let mut yaw_sq_sum = 0.0;
    let mut yaw_samples = 0u64;

    for step in 0..total_steps {
        let t = step as f64 * dt;

        truth.clear();
        truth.extend(
            obstacles
                .iter()
                .map(|o| obstacle_state_at(&o.trajectory, o.radius_true, o.radius_barrier, t)),
        );

        let reference = reference_at(cfg, kind, t);
        let mu_desired = position_control(&state, &reference, &gain);

        let yaw_now = state.yaw();
        detections.clear();
        detections.extend(
            truth
                .iter()
                .map(|obs| cfg.sensor.omniscient || detect(&state, yaw_now, &sensor, obs)),
        );
        update_tracks(
            &mut tracks,
            &detections,
            &truth,
            &state,
            mu_desired,
            &cbf_params,
            cfg.obstacles.coast,
            dt,
        );

        let psi_d = match policy {
            YawPolicy::Fixed { value } => fixed_yaw(value),
            YawPolicy::LookAhead => look_ahead(&state, &reference, psi_prev),
            YawPolicy::NearestObstacle => nearest_obstacle(&state, &tracks, &reference, psi_prev),
            YawPolicy::SafetyAware => {
                let scene = scene_from_tracks(&state, &tracks, &risk, exploration);
                let started = Instant::now();
                let psi = optimal_yaw(&scene, &sensor, &yaw_cfg, psi_prev);
                record
                    .yaw_timing
                    .record(started.elapsed().as_secs_f64() * 1e6);
                psi
            }
        };

        rows.clear();
        for track in &tracks {
            let estimate = ObstacleState {
                position: track.position,
                velocity: track.velocity,
                radius_true: 0.0,
                radius_barrier: track.radius_barrier,
            };
            if let Ok(row) = cbf_row(&state, mu_desired, &estimate, Vec3::zero(), &cbf_params) {
                rows.push(row);
            }
        }
        let problem = QpProblem {
            weight: Vec3::from(cfg.qp.weight),
            slack_weight: cfg.qp.slack_weight,
            mu_desired,
            cbf_rows: &rows,
            clf: clf_row(&state, &reference, cfg.clf.rate),
            mu_min: params.mu_min,
            mu_max: params.mu_max,
        };
        let solution = solve_qp(&problem);
        let (mu, delta, feasible) = match solution.status {
            QpStatus::Optimal => (solution.mu, solution.delta, true),
            QpStatus::Infeasible => {
                record.infeasible_steps += 1;
                (least_violating_mu(&problem), 0.0, false)
            }
        };

        let f_d = force_from_mu(mu, params.mass);
        let q_d = compose_desired_attitude(f_d, psi_d).unwrap_or(q_d_prev);
        let torque = attitude_control(
            &state,
            q_d,
            Vec3::zero(),
            Vec3::zero(),
            &att_gains,
            params.inertia,
        );
        let thrust = f_d.dot(state.attitude.body_z()).max(0.0);

        state = match step_uav(&state, &params, thrust, torque, dt) {
            Ok(next) => next,
            Err(_) => {
                record.blew_up = true;
                break;
            }
        };

        // Truth-based verdict inputs at the post-step state.
        let t_next = (step + 1) as f64 * dt;
        truth.clear();
        truth.extend(
            obstacles
                .iter()
                .map(|o| obstacle_state_at(&o.trajectory, o.radius_true, o.radius_barrier, t_next)),
        );
        update_minima(&mut record, state.position, &truth);

        if t >= SETTLE_TIME {
            let err = (reference_at(cfg, kind, t_next).position - state.position).norm();
            if err > record.max_tracking_error {
                record.max_tracking_error = err;
            }
            let yaw_err = wrap_angle(state.yaw() - psi_d);
            yaw_sq_sum += yaw_err * yaw_err;
            yaw_samples += 1;
        }

        if record_steps {
            record.steps.push(StepRecord {
                t,
                state,
                mu_desired,
                mu,
                delta,
                psi_d,
                qp_feasible: feasible,
                tracks: tracks.clone(),
                barriers: truth
                    .iter()
                    .map(|o| barrier_value(state.position, o.position, o.radius_barrier))
                    .collect(),
            });
        }

        psi_prev = psi_d;
        q_d_prev = q_d;
    }

    if yaw_samples > 0 {
        record.yaw_rms_error = (yaw_sq_sum / yaw_samples as f64).sqrt();
    }
    let (collision_free, safe) = classify(&record);
    record.collision_free = collision_free;
    record.safe = safe;
    record
}

/// Generate the obstacle field for `seed` and run the flight.
pub fn run_flight(
    cfg: &Config,
    kind: MissionKind,
    policy: YawPolicy,
    seed: u64,
    record_steps: bool,
) -> Result<FlightRecord, GenerationError> {
    let mut rng = crate::math::Rng::new(seed);
    let obstacles = generate_obstacles(cfg, kind, &mut rng)?;
    Ok(run_flight_with(cfg, kind, policy, &obstacles, seed, record_steps))
}

/// Resolve the policy enum for a flight, substituting the configured
/// constant for the fixed arm.
pub fn policy_from_name(name: &str, cfg: &Config) -> Option<YawPolicy> {
    match name {
        "fixed" => Some(YawPolicy::Fixed {
            value: cfg.policy.fixed_value_deg.to_radians(),
        }),
        "look_ahead" => Some(YawPolicy::LookAhead),
        "nearest" => Some(YawPolicy::NearestObstacle),
        "safety_aware" => Some(YawPolicy::SafetyAware),
        _ => None,
    }
}

/// The four comparison arms in reporting order.
pub fn all_policies(cfg: &Config) -> [YawPolicy; 4] {
    [
        YawPolicy::Fixed {
            value: cfg.policy.fixed_value_deg.to_radians(),
        },
        YawPolicy::LookAhead,
        YawPolicy::NearestObstacle,
        YawPolicy::SafetyAware,
    ]
}
