//! Rigid-body quadrotor dynamics and obstacle kinematics.
//!
//! The vehicle model is a standard 6-DOF rigid body with thrust restricted
//! to the body-vertical axis and a direct torque input; actuator mixing is
//! intentionally not modeled. Integration is fixed-step RK4 at the control
//! rate, one physics step per control step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Quat, Vec3};

/// World gravity, z-up frame.
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

#[derive(Debug, Error)]
pub enum DynamicsError {
    /// Integration produced a non-finite state; the flight is unrecoverable.
    #[error("non-finite state after integration step")]
    NumericalBlowUp,
}

/// Full rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    /// Position, world frame (m).
    pub position: Vec3,
    /// Velocity, world frame (m/s).
    pub velocity: Vec3,
    /// Attitude, body-to-world.
    pub attitude: Quat,
    /// Angular rate, body frame (rad/s).
    pub angular_rate: Vec3,
}

impl UavState {
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zero(),
            attitude: Quat::from_yaw(yaw),
            angular_rate: Vec3::zero(),
        }
    }

    /// Current heading angle.
    pub fn yaw(&self) -> f64 {
        self.attitude.yaw()
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.attitude.is_finite()
            && self.angular_rate.is_finite()
    }
}

/// Physical parameters of the vehicle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UavParams {
    /// Mass (kg).
    pub mass: f64,
    /// Diagonal of the inertia matrix (kg m^2).
    pub inertia: Vec3,
    /// Lower bound on the commanded virtual acceleration (m/s^2).
    pub mu_min: Vec3,
    /// Upper bound on the commanded virtual acceleration (m/s^2).
    pub mu_max: Vec3,
    /// Bounding-sphere radius of the airframe (m).
    pub radius: f64,
}

impl UavParams {
    /// Crazyflie 2.1-like defaults (conventional public values, configuration
    /// rather than measured ground truth).
    pub fn crazyflie() -> Self {
        Self {
            mass: 0.033,
            inertia: Vec3::new(1.66e-5, 1.66e-5, 2.93e-5),
            mu_min: Vec3::new(-5.0, -5.0, -5.0),
            mu_max: Vec3::new(5.0, 5.0, 6.0),
            radius: 0.06,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Derivative {
    dr: Vec3,
    dv: Vec3,
    dq: Quat,
    dw: Vec3,
}

fn state_derivative(s: &UavState, p: &UavParams, thrust: f64, torque: Vec3) -> Derivative {
    let body_z = s.attitude.body_z();
    let accel = GRAVITY + body_z * (thrust / p.mass);

    // q_dot = 1/2 q * (0, omega), omega in body frame.
    let w = s.angular_rate;
    let q = s.attitude;
    let dq = Quat::new(
        -0.5 * (q.x * w.x + q.y * w.y + q.z * w.z),
        0.5 * (q.w * w.x + q.y * w.z - q.z * w.y),
        0.5 * (q.w * w.y - q.x * w.z + q.z * w.x),
        0.5 * (q.w * w.z + q.x * w.y - q.y * w.x),
    );

    // Euler's equations with diagonal inertia.
    let j = p.inertia;
    let jw = w.hadamard(j);
    let dw = Vec3::new(
        (torque.x - (w.y * jw.z - w.z * jw.y)) / j.x,
        (torque.y - (w.z * jw.x - w.x * jw.z)) / j.y,
        (torque.z - (w.x * jw.y - w.y * jw.x)) / j.z,
    );

    Derivative {
        dr: s.velocity,
        dv: accel,
        dq,
        dw,
    }
}

fn advance(s: &UavState, d: &Derivative, dt: f64) -> UavState {
    UavState {
        position: s.position + d.dr * dt,
        velocity: s.velocity + d.dv * dt,
        attitude: Quat::new(
            s.attitude.w + d.dq.w * dt,
            s.attitude.x + d.dq.x * dt,
            s.attitude.y + d.dq.y * dt,
            s.attitude.z + d.dq.z * dt,
        ),
        angular_rate: s.angular_rate + d.dw * dt,
    }
}

/// One RK4 step of the rigid-body dynamics. The attitude quaternion is
/// renormalized after the combine.
pub fn step_uav(
    s: &UavState,
    p: &UavParams,
    thrust: f64,
    torque: Vec3,
    dt: f64,
) -> Result<UavState, DynamicsError> {
    debug_assert!(dt > 0.0 && dt <= 0.01, "dt out of supported range");
    debug_assert!(thrust >= 0.0, "thrust must be non-negative");

    let k1 = state_derivative(s, p, thrust, torque);
    let s2 = advance(s, &k1, dt / 2.0);
    let k2 = state_derivative(&s2, p, thrust, torque);
    let s3 = advance(s, &k2, dt / 2.0);
    let k3 = state_derivative(&s3, p, thrust, torque);
    let s4 = advance(s, &k3, dt);
    let k4 = state_derivative(&s4, p, thrust, torque);

    let mut out = UavState {
        position: s.position
            + (k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr) * (dt / 6.0),
        velocity: s.velocity
            + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * (dt / 6.0),
        attitude: Quat::new(
            s.attitude.w + (k1.dq.w + 2.0 * (k2.dq.w + k3.dq.w) + k4.dq.w) * (dt / 6.0),
            s.attitude.x + (k1.dq.x + 2.0 * (k2.dq.x + k3.dq.x) + k4.dq.x) * (dt / 6.0),
            s.attitude.y + (k1.dq.y + 2.0 * (k2.dq.y + k3.dq.y) + k4.dq.y) * (dt / 6.0),
            s.attitude.z + (k1.dq.z + 2.0 * (k2.dq.z + k3.dq.z) + k4.dq.z) * (dt / 6.0),
        ),
        angular_rate: s.angular_rate
            + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * (dt / 6.0),
    };
    out.attitude = out.attitude.normalized();

    if out.is_finite() {
        Ok(out)
    } else {
        Err(DynamicsError::NumericalBlowUp)
    }
}

/// Translational + rotational + potential energy; used by integrator checks.
pub fn mechanical_energy(s: &UavState, p: &UavParams) -> f64 {
    let trans = 0.5 * p.mass * s.velocity.dot(s.velocity);
    let rot = 0.5 * s.angular_rate.dot(s.angular_rate.hadamard(p.inertia));
    let pot = p.mass * (-GRAVITY.z) * s.position.z;
    trans + rot + pot
}

/// Instantaneous obstacle state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObstacleState {
    /// Center position, world frame (m).
    pub position: Vec3,
    /// Velocity, world frame (m/s).
    pub velocity: Vec3,
    /// Physical radius (m).
    pub radius_true: f64,
    /// Barrier radius, physical radius inflated by vehicle size and safety
    /// factor (m).
    pub radius_barrier: f64,
}

/// Axis-aligned box that folds a trajectory back inside itself, producing
/// reflective bounces off the walls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReflectBox {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl ReflectBox {
    /// Fold a raw coordinate into `[lo, hi]`; returns (position, velocity sign).
    fn fold_axis(raw: f64, lo: f64, hi: f64) -> (f64, f64) {
        let width = hi - lo;
        if width <= 0.0 {
            return (lo, 0.0);
        }
        let u = (raw - lo).rem_euclid(2.0 * width);
        if u < width {
            (lo + u, 1.0)
        } else {
            (hi - (u - width), -1.0)
        }
    }

    fn fold(&self, raw: Vec3, vel: Vec3) -> (Vec3, Vec3) {
        let (px, sx) = Self::fold_axis(raw.x, self.lo.x, self.hi.x);
        let (py, sy) = Self::fold_axis(raw.y, self.lo.y, self.hi.y);
        let (pz, sz) = Self::fold_axis(raw.z, self.lo.z, self.hi.z);
        (
            Vec3::new(px, py, pz),
            Vec3::new(vel.x * sx, vel.y * sy, vel.z * sz),
        )
    }
}

/// Motion model of a single obstacle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Static,
    Linear {
        velocity: Vec3,
    },
    Sinusoidal {
        velocity: Vec3,
        amplitude: Vec3,
        angular_freq: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObstacleTrajectory {
    pub anchor: Vec3,
    #[serde(flatten)]
    pub kind: TrajectoryKind,
    /// When present, positions are folded back into this box (reflective
    /// walls); velocities flip sign accordingly.
    pub bounds: Option<ReflectBox>,
}

impl ObstacleTrajectory {
    fn raw_kinematics(&self, t: f64) -> (Vec3, Vec3) {
        match self.kind {
            TrajectoryKind::Static => (self.anchor, Vec3::zero()),
            TrajectoryKind::Linear { velocity } => (self.anchor + velocity * t, velocity),
            TrajectoryKind::Sinusoidal {
                velocity,
                amplitude,
                angular_freq,
                phase,
            } => {
                let arg = angular_freq * t + phase;
                (
                    self.anchor + velocity * t + amplitude * arg.sin(),
                    velocity + amplitude * (angular_freq * arg.cos()),
                )
            }
        }
    }

    /// Position and analytic velocity at time `t`.
    pub fn kinematics_at(&self, t: f64) -> (Vec3, Vec3) {
        let (raw_pos, raw_vel) = self.raw_kinematics(t);
        match self.bounds {
            Some(b) => b.fold(raw_pos, raw_vel),
            None => (raw_pos, raw_vel),
        }
    }
}

/// Exact obstacle state at time `t`.
pub fn obstacle_state_at(
    traj: &ObstacleTrajectory,
    radius_true: f64,
    radius_barrier: f64,
    t: f64,
) -> ObstacleState {
    debug_assert!(t >= 0.0);
    let (position, velocity) = traj.kinematics_at(t);
    ObstacleState {
        position,
        velocity,
        radius_true,
        radius_barrier,
    }
}
