//! Nominal tracking control: LQR position loop, force synthesis,
//! desired-attitude composition, and the quaternion attitude loop.
//!
//! The position loop is three decoupled double integrators, so the LQR gain
//! has a closed form. The attitude loop is a quaternion PD with feedforward
//! and inertia shaping; the scalar-part sign keeps the double cover from
//! commanding long-way-around rotations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{UavState, GRAVITY};
use crate::math::{quat_error, Quat, Vec3};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("LQR weights must be positive, got ({0}, {1}, {2})")]
    NonPositiveWeight(f64, f64, f64),
    /// Desired force too small to define a thrust direction; the caller
    /// should hold the previous attitude reference.
    #[error("desired force norm below threshold, attitude undefined")]
    DegenerateThrust,
}

/// Position reference with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionReference {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl PositionReference {
    pub fn hold(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zero(),
            acceleration: Vec3::zero(),
        }
    }
}

/// Per-axis state-feedback gains for the decoupled double integrator.
/// Identical on all three axes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LqrGain {
    pub kp: f64,
    pub kv: f64,
}

/// Attitude loop gains; both strictly positive.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttitudeGains {
    pub k_q: f64,
    pub k_omega: f64,
}

/// Solve the continuous-time LQR for a double integrator per axis.
///
/// With state cost diag(q_pos, q_vel) and input cost r, the Riccati solution
/// reduces to `kp = sqrt(q_pos/r)` and `kv = sqrt(q_vel/r + 2 kp)`.
pub fn lqr_synthesize(q_pos: f64, q_vel: f64, r_weight: f64) -> Result<LqrGain, ControlError> {
    if q_pos <= 0.0 || q_vel < 0.0 || r_weight <= 0.0 {
        return Err(ControlError::NonPositiveWeight(q_pos, q_vel, r_weight));
    }
    let kp = (q_pos / r_weight).sqrt();
    let kv = (q_vel / r_weight + 2.0 * kp).sqrt();
    Ok(LqrGain { kp, kv })
}

/// Desired virtual acceleration tracking the reference.
pub fn position_control(s: &UavState, reference: &PositionReference, gain: &LqrGain) -> Vec3 {
    let e_pos = reference.position - s.position;
    let e_vel = reference.velocity - s.velocity;
    e_pos * gain.kp + e_vel * gain.kv + reference.acceleration
}

/// Desired force from the (filtered) virtual acceleration.
pub fn force_from_mu(mu: Vec3, mass: f64) -> Vec3 {
    (mu - GRAVITY) * mass
}

/// Compose the attitude whose body-z axis carries the desired force and
/// whose heading (body-x projected to the horizontal plane) equals `psi_d`.
///
/// The basis is constructed directly: the body-x axis is chosen in the plane
/// spanned by the heading direction and world-z, which makes the extracted
/// heading exactly `psi_d` for any thrust tilt short of 90 degrees.
pub fn compose_desired_attitude(f_d: Vec3, psi_d: f64) -> Result<Quat, ControlError> {
    let norm = f_d.norm();
    if norm < 1e-9 {
        return Err(ControlError::DegenerateThrust);
    }
    let z_b = f_d * (1.0 / norm);

    let (sin_psi, cos_psi) = psi_d.sin_cos();
    // Component of z_b along the heading direction, and its vertical part.
    let c = z_b.x * cos_psi + z_b.y * sin_psi;
    let d = z_b.z;
    if d <= 1e-9 {
        // Thrust tilted to or past the horizon; no heading-consistent basis.
        return Err(ControlError::DegenerateThrust);
    }
    let scale = 1.0 / (c * c + d * d).sqrt();
    let x_b = Vec3::new(d * cos_psi * scale, d * sin_psi * scale, -c * scale);
    let y_b = z_b.cross(x_b);
    Ok(Quat::from_basis(x_b, y_b, z_b))
}

/// Quaternion attitude controller with rate feedback and inertia shaping.
///
/// Returns the body torque `tau = J nu + omega x J omega` where
/// `nu = k_q n_e sgn(m_e) + k_omega (omega_d - omega) + omega_dot_d`.
pub fn attitude_control(
    s: &UavState,
    q_d: Quat,
    omega_d: Vec3,
    omega_dot_d: Vec3,
    gains: &AttitudeGains,
    inertia: Vec3,
) -> Vec3 {
    let q_e = quat_error(s.attitude, q_d);
    // sgn(0) = +1 keeps the law total at the double-cover boundary.
    let sign = if q_e.scalar() >= 0.0 { 1.0 } else { -1.0 };
    let nu = q_e.vector() * (gains.k_q * sign)
        + (omega_d - s.angular_rate) * gains.k_omega
        + omega_dot_d;
    let w = s.angular_rate;
    nu.hadamard(inertia) + w.cross(w.hadamard(inertia))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{wrap_angle, Rng};

    #[test]
    fn lqr_closed_form_cases() {
        let g = lqr_synthesize(1.0, 0.0, 1.0).unwrap();
        assert!((g.kp - 1.0).abs() < 1e-12);
        assert!((g.kv - 2.0f64.sqrt()).abs() < 1e-12);

        let g = lqr_synthesize(4.0, 0.0, 1.0).unwrap();
        assert!((g.kp - 2.0).abs() < 1e-12);
        assert!((g.kv - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lqr_weight_scaling_invariance() {
        let a = lqr_synthesize(3.0, 1.5, 0.5).unwrap();
        let b = lqr_synthesize(6.0, 3.0, 1.0).unwrap();
        assert!((a.kp - b.kp).abs() < 1e-12);
        assert!((a.kv - b.kv).abs() < 1e-12);
    }

    #[test]
    fn lqr_rejects_bad_weights() {
        assert!(lqr_synthesize(0.0, 1.0, 1.0).is_err());
        assert!(lqr_synthesize(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn position_control_cases() {
        let gain = lqr_synthesize(1.0, 0.0, 1.0).unwrap();
        let s = UavState::at_rest(Vec3::zero(), 0.0);

        let hold = PositionReference::hold(Vec3::zero());
        assert!(position_control(&s, &hold, &gain).norm() < 1e-12);

        let ff = PositionReference {
            position: Vec3::zero(),
            velocity: Vec3::zero(),
            acceleration: Vec3::new(0.5, -0.2, 0.1),
        };
        assert!((position_control(&s, &ff, &gain) - ff.acceleration).norm() < 1e-12);

        let unit_err = PositionReference::hold(Vec3::new(1.0, 0.0, 0.0));
        let mu = position_control(&s, &unit_err, &gain);
        assert!((mu - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn force_from_mu_cases() {
        let f = force_from_mu(Vec3::zero(), 0.033);
        assert!((f - Vec3::new(0.0, 0.0, 9.81 * 0.033)).norm() < 1e-12);

        assert!(force_from_mu(GRAVITY, 0.5).norm() < 1e-12);

        let f = force_from_mu(Vec3::new(1.0, 0.0, 0.0), 0.033);
        assert!((f - Vec3::new(0.033, 0.0, 0.033 * 9.81)).norm() < 1e-12);
    }

    #[test]
    fn desired_attitude_vertical_cases() {
        let up = Vec3::new(0.0, 0.0, 1.0);
        let q = compose_desired_attitude(up, 0.0).unwrap();
        assert!((q.w.abs() - 1.0).abs() < 1e-12);

        let q = compose_desired_attitude(up, std::f64::consts::FRAC_PI_2).unwrap();
        let expect = Quat::from_yaw(std::f64::consts::FRAC_PI_2);
        let dot = (q.w * expect.w + q.z * expect.z).abs();
        assert!(dot > 1.0 - 1e-12);
    }

    #[test]
    fn desired_attitude_reconstructs_force_direction() {
        let tilt = 10.0_f64.to_radians();
        let f = Vec3::new(tilt.sin(), 0.0, tilt.cos());
        let q = compose_desired_attitude(f, 0.0).unwrap();
        let z = q.body_z();
        assert!((z - f.normalized()).norm() < 1e-9);
    }

    #[test]
    fn desired_attitude_heading_exact() {
        let mut rng = Rng::new(31);
        for _ in 0..500 {
            let tilt = rng.range(0.0, 1.4); // < 90 deg
            let azim = rng.range(-3.1, 3.1);
            let psi = rng.range(-3.1, 3.1);
            let f = Vec3::new(
                tilt.sin() * azim.cos(),
                tilt.sin() * azim.sin(),
                tilt.cos(),
            ) * rng.range(0.1, 3.0);
            let q = compose_desired_attitude(f, psi).unwrap();
            assert!((q.body_z() - f.normalized()).norm() < 1e-9);
            assert!(
                wrap_angle(q.yaw() - psi).abs() < 1e-9,
                "yaw {} vs psi {psi}",
                q.yaw()
            );
        }
    }

    #[test]
    fn desired_attitude_degenerate_thrust() {
        assert!(compose_desired_attitude(Vec3::zero(), 0.0).is_err());
        assert!(compose_desired_attitude(Vec3::new(0.0, 0.0, -1.0), 0.0).is_err());
    }

    #[test]
    fn attitude_control_zero_error() {
        let s = UavState::at_rest(Vec3::zero(), 0.4);
        let gains = AttitudeGains {
            k_q: 100.0,
            k_omega: 20.0,
        };
        let tau = attitude_control(
            &s,
            Quat::from_yaw(0.4),
            Vec3::zero(),
            Vec3::zero(),
            &gains,
            Vec3::new(1e-5, 1e-5, 2e-5),
        );
        assert!(tau.norm() < 1e-12);
    }

    #[test]
    fn attitude_control_pure_yaw_error() {
        let s = UavState::at_rest(Vec3::zero(), 0.0);
        let gains = AttitudeGains {
            k_q: 50.0,
            k_omega: 10.0,
        };
        let j = Vec3::new(1.66e-5, 1.66e-5, 2.93e-5);
        let delta = 0.6;
        let tau = attitude_control(
            &s,
            Quat::from_yaw(delta),
            Vec3::zero(),
            Vec3::zero(),
            &gains,
            j,
        );
        let expected = j.z * gains.k_q * (delta / 2.0).sin();
        assert!((tau.z - expected).abs() < 1e-12);
        assert!(tau.x.abs() < 1e-15 && tau.y.abs() < 1e-15);
    }

    #[test]
    fn attitude_control_double_cover() {
        let s = UavState::at_rest(Vec3::zero(), 0.2);
        let gains = AttitudeGains {
            k_q: 50.0,
            k_omega: 10.0,
        };
        let j = Vec3::new(1e-5, 1e-5, 2e-5);
        let q_d = s.attitude;
        let q_d_neg = Quat::new(-q_d.w, -q_d.x, -q_d.y, -q_d.z);
        let tau_pos = attitude_control(&s, q_d, Vec3::zero(), Vec3::zero(), &gains, j);
        let tau_neg = attitude_control(&s, q_d_neg, Vec3::zero(), Vec3::zero(), &gains, j);
        assert!(tau_pos.norm() < 1e-12);
        assert!(tau_neg.norm() < 1e-12);
    }
}
