//! Safety filter: per-obstacle exponential barrier constraints, a softened
//! Lyapunov tracking constraint, and the small dense quadratic program that
//! minimally modifies the desired acceleration.
//!
//! The barrier for a spherical obstacle is `B = ||r_c - r|| - R`, used with
//! relative degree two: the filtered acceleration must satisfy
//! `B_ddot + 2 zeta omega_n B_dot + omega_n^2 B >= 0`, which is linear in
//! the commanded acceleration and becomes one inequality row per obstacle.
//!
//! The solver is a dual active-set method specialized to the four decision
//! variables (acceleration deviation plus slack). It starts from the
//! unconstrained minimum, never needs a feasibility phase, and runs on
//! fixed-size stack arrays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ObstacleState, UavState};
use crate::math::Vec3;
use crate::tracking::PositionReference;

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("UAV and obstacle centers coincide; barrier gradient undefined")]
    SingularGeometry,
}

/// Barrier dynamics shaping. Admissible when `zeta >= 1` and `omega_n > 0`
/// (real negative characteristic roots).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CbfParams {
    pub zeta: f64,
    pub omega_n: f64,
}

impl CbfParams {
    pub fn is_admissible(&self) -> bool {
        self.zeta >= 1.0 && self.omega_n > 0.0
    }
}

/// One linear inequality `normal . mu <= bound` enforcing the barrier
/// condition for a single obstacle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CbfRow {
    /// Row vector multiplying the acceleration (unit vector toward the
    /// obstacle).
    pub normal: Vec3,
    /// Right-hand side.
    pub bound: f64,
    /// Constraint value `h` evaluated at the probe acceleration.
    pub h_value: f64,
}

/// Softened tracking constraint `normal . mu <= bound + delta`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClfRow {
    pub normal: Vec3,
    pub bound: f64,
}

/// Signed distance to the barrier sphere.
pub fn barrier_value(position: Vec3, obstacle_center: Vec3, radius_barrier: f64) -> f64 {
    (obstacle_center - position).norm() - radius_barrier
}

/// Build the barrier row for one obstacle.
///
/// `B_ddot` is linear in the commanded acceleration, so the condition
/// `h(mu) >= 0` rearranges to `normal . mu <= bound` with
/// `h(mu) = bound - normal . mu`. `h_value` is `h` at `mu_probe`.
/// Obstacle acceleration is taken from `obs_accel` (zero when the caller has
/// only a constant-velocity estimate).
pub fn cbf_row(
    uav: &UavState,
    mu_probe: Vec3,
    obs: &ObstacleState,
    obs_accel: Vec3,
    p: &CbfParams,
) -> Result<CbfRow, SafetyError> {
    let d = obs.position - uav.position;
    let dist = d.norm();
    if dist <= 1e-9 {
        return Err(SafetyError::SingularGeometry);
    }
    let unit = d * (1.0 / dist);
    let d_dot = obs.velocity - uav.velocity;

    let barrier = dist - obs.radius_barrier;
    let barrier_dot = unit.dot(d_dot);
    // B_ddot = (|d_dot|^2 + d.(a_c - mu))/dist - (d.d_dot)^2/dist^3
    let bound = (d_dot.dot(d_dot) + d.dot(obs_accel)) / dist - barrier_dot * barrier_dot / dist
        + 2.0 * p.zeta * p.omega_n * barrier_dot
        + p.omega_n * p.omega_n * barrier;

    Ok(CbfRow {
        normal: unit,
        bound,
        h_value: bound - unit.dot(mu_probe),
    })
}

/// Build the Lyapunov decrease row for `V = 1/2 |e|^2` on the stacked
/// position/velocity error, enforcing `V_dot(mu) <= -rate V` before
/// softening.
pub fn clf_row(uav: &UavState, reference: &PositionReference, clf_rate: f64) -> ClfRow {
    debug_assert!(clf_rate > 0.0);
    let e_pos = reference.position - uav.position;
    let e_vel = reference.velocity - uav.velocity;
    let v = 0.5 * (e_pos.dot(e_pos) + e_vel.dot(e_vel));
    // V_dot = e_pos . e_vel + e_vel . (r_dd_ref - mu)
    ClfRow {
        normal: -e_vel,
        bound: -clf_rate * v - e_pos.dot(e_vel) - e_vel.dot(reference.acceleration),
    }
}

/// Quadratic program instance for one control step.
#[derive(Debug, Clone)]
pub struct QpProblem<'a> {
    /// Diagonal weights on the acceleration deviation (all positive).
    pub weight: Vec3,
    /// Weight on the squared slack (positive).
    pub slack_weight: f64,
    /// Desired acceleration from the tracking controller.
    pub mu_desired: Vec3,
    pub cbf_rows: &'a [CbfRow],
    pub clf: ClfRow,
    pub mu_min: Vec3,
    pub mu_max: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

/// Solution of the safety filter step.
#[derive(Debug, Clone, Copy)]
pub struct QpSolution {
    /// Filtered acceleration `mu = mu_desired + deviation`.
    pub mu: Vec3,
    /// Slack on the tracking constraint.
    pub delta: f64,
    pub status: QpStatus,
    /// Active constraint indices with their multipliers (for diagnostics and
    /// optimality checks). Indexing matches [`constraint`].
    pub active: [(usize, f64); DIM],
    pub active_len: usize,
}

pub const DIM: usize = 4;
const STEP_TOL: f64 = 1e-12;
const VIOLATION_TOL: f64 = 1e-11;

/// Number of inequality rows for a problem with `n_cbf` barrier rows:
/// barriers, one tracking row, six box rows, slack non-negativity.
pub fn constraint_count(n_cbf: usize) -> usize {
    n_cbf + 8
}

/// Materialize constraint `i` as `(g, c)` meaning `g . x <= c` over the
/// decision vector `x = [deviation; slack]`.
pub fn constraint(p: &QpProblem, i: usize) -> ([f64; DIM], f64) {
    let n = p.cbf_rows.len();
    if i < n {
        let row = &p.cbf_rows[i];
        let g = [row.normal.x, row.normal.y, row.normal.z, 0.0];
        (g, row.bound - row.normal.dot(p.mu_desired))
    } else if i == n {
        let g = [p.clf.normal.x, p.clf.normal.y, p.clf.normal.z, -1.0];
        (g, p.clf.bound - p.clf.normal.dot(p.mu_desired))
    } else if i < n + 4 {
        // upper box on each acceleration axis
        let j = i - n - 1;
        let mut g = [0.0; DIM];
        g[j] = 1.0;
        (g, p.mu_max[j] - p.mu_desired[j])
    } else if i < n + 7 {
        // lower box
        let j = i - n - 4;
        let mut g = [0.0; DIM];
        g[j] = -1.0;
        (g, p.mu_desired[j] - p.mu_min[j])
    } else {
        // slack >= 0
        let mut g = [0.0; DIM];
        g[3] = -1.0;
        (g, 0.0)
    }
}

fn dot4(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Solve `M r = rhs` for the k x k active-set Gram matrix by Gaussian
/// elimination with partial pivoting. Returns false on singularity.
fn solve_small(m: &mut [[f64; DIM]; DIM], rhs: &mut [f64; DIM], k: usize) -> bool {
    for col in 0..k {
        let mut piv = col;
        for row in col + 1..k {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() < 1e-14 {
            return false;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            for c in col..k {
                m[row][c] -= f * m[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..k).rev() {
        let mut acc = rhs[col];
        for c in col + 1..k {
            acc -= m[col][c] * rhs[c];
        }
        rhs[col] = acc / m[col][col];
    }
    true
}

/// Minimize `1/2 x' G x` subject to `n_i . x >= beta_i` by the dual
/// active-set method: start at the unconstrained minimum, repeatedly add the
/// most violated constraint, stepping in the primal/dual directions and
/// dropping blocking constraints as needed.
pub fn solve_qp(p: &QpProblem) -> QpSolution {
    let m = constraint_count(p.cbf_rows.len());
    let g_inv = [
        1.0 / p.weight.x,
        1.0 / p.weight.y,
        1.0 / p.weight.z,
        1.0 / p.slack_weight,
    ];

    // Constraints in >= form: n_i = -g_i, beta_i = -c_i.
    let normal = |i: usize| -> ([f64; DIM], f64) {
        let (g, c) = constraint(p, i);
        ([-g[0], -g[1], -g[2], -g[3]], -c)
    };

    let mut x = [0.0_f64; DIM];
    let mut active: [usize; DIM] = [0; DIM];
    let mut lambda: [f64; DIM] = [0.0; DIM];
    let mut k = 0usize;

    // Re-solve the equality-constrained KKT system on the final active set
    // (no ridge) so the returned point meets tight optimality residuals.
    let polish = |x: &mut [f64; DIM], lambda: &mut [f64; DIM], active: &[usize; DIM], k: usize| {
        if k == 0 {
            *x = [0.0; DIM];
            return;
        }
        let mut gram = [[0.0f64; DIM]; DIM];
        let mut rhs = [0.0f64; DIM];
        for a in 0..k {
            let (n_a, beta_a) = normal(active[a]);
            for b in 0..k {
                let (n_b, _) = normal(active[b]);
                let mut acc = 0.0;
                for d in 0..DIM {
                    acc += n_a[d] * g_inv[d] * n_b[d];
                }
                gram[a][b] = acc;
            }
            rhs[a] = beta_a;
        }
        if !solve_small(&mut gram, &mut rhs, k) {
            return;
        }
        if rhs[..k].iter().any(|&l| l < -1e-9) {
            return;
        }
        let mut refined = [0.0f64; DIM];
        for a in 0..k {
            let (n_a, _) = normal(active[a]);
            for d in 0..DIM {
                refined[d] += n_a[d] * rhs[a];
            }
        }
        for d in 0..DIM {
            refined[d] *= g_inv[d];
        }
        *x = refined;
        lambda[..k].copy_from_slice(&rhs[..k]);
        for l in lambda[..k].iter_mut() {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
    };

    let finish = |x: [f64; DIM], active: [usize; DIM], lambda: [f64; DIM], k: usize, status| {
        let mut pairs = [(0usize, 0.0f64); DIM];
        for i in 0..k {
            pairs[i] = (active[i], lambda[i]);
        }
        QpSolution {
            mu: p.mu_desired + Vec3::new(x[0], x[1], x[2]),
            delta: x[3],
            status,
            active: pairs,
            active_len: k,
        }
    };

    let max_outer = 8 * m + 32;
    for _ in 0..max_outer {
        // Most violated constraint at the current point.
        let mut worst = None;
        let mut worst_violation = VIOLATION_TOL;
        for i in 0..m {
            if active[..k].contains(&i) {
                continue;
            }
            let (n_i, beta_i) = normal(i);
            let violation = beta_i - dot4(&n_i, &x);
            if violation > worst_violation {
                worst_violation = violation;
                worst = Some(i);
            }
        }
        let Some(pick) = worst else {
            polish(&mut x, &mut lambda, &active, k);
            return finish(x, active, lambda, k, QpStatus::Optimal);
        };
        let (n_p, beta_p) = normal(pick);
        let mut lambda_pick = 0.0f64;

        // Inner loop: take primal/dual steps until `pick` becomes feasible
        // or infeasibility is proven.
        loop {
            // Dual direction r solves (N' G^-1 N) r = N' G^-1 n_p;
            // primal direction z = G^-1 (n_p - N r).
            let mut r = [0.0f64; DIM];
            let mut singular = false;
            if k > 0 {
                let mut gram = [[0.0f64; DIM]; DIM];
                let mut rhs = [0.0f64; DIM];
                let mut trace = 0.0;
                for a in 0..k {
                    let (n_a, _) = normal(active[a]);
                    for b in 0..k {
                        let (n_b, _) = normal(active[b]);
                        let mut acc = 0.0;
                        for d in 0..DIM {
                            acc += n_a[d] * g_inv[d] * n_b[d];
                        }
                        gram[a][b] = acc;
                    }
                    trace += gram[a][a];
                    let mut acc = 0.0;
                    for d in 0..DIM {
                        acc += n_a[d] * g_inv[d] * n_p[d];
                    }
                    rhs[a] = acc;
                }
                // Tiny ridge keeps near-dependent active sets from blowing
                // up the elimination.
                let ridge = 1e-13 * trace.max(1.0);
                for a in 0..k {
                    gram[a][a] += ridge;
                }
                singular = !solve_small(&mut gram, &mut rhs, k);
                if singular {
                    r = [0.0; DIM];
                } else {
                    r = rhs;
                }
            }

            // With a full active set the normals span the space, so the
            // projected primal direction is exactly zero.
            let mut z = [0.0f64; DIM];
            if !singular && k < DIM {
                for d in 0..DIM {
                    let mut nr = 0.0;
                    for a in 0..k {
                        let (n_a, _) = normal(active[a]);
                        nr += n_a[d] * r[a];
                    }
                    z[d] = g_inv[d] * (n_p[d] - nr);
                }
            }
            let z_norm2 = dot4(&z, &z);
            let np_scale = 1.0 + dot4(&n_p, &n_p);

            // Full primal step that makes constraint `pick` tight.
            let t1 = if z_norm2 > STEP_TOL * np_scale {
                let denom = dot4(&n_p, &z);
                if denom > STEP_TOL * np_scale {
                    (beta_p - dot4(&n_p, &x)) / denom
                } else {
                    f64::INFINITY
                }
            } else {
                f64::INFINITY
            };

            // Largest dual step before some active multiplier hits zero.
            let mut t2 = f64::INFINITY;
            let mut blocking = usize::MAX;
            for a in 0..k {
                if r[a] > STEP_TOL {
                    let ratio = lambda[a] / r[a];
                    if ratio < t2 {
                        t2 = ratio;
                        blocking = a;
                    }
                }
            }

            if !t1.is_finite() && !t2.is_finite() {
                return finish(x, active, lambda, k, QpStatus::Infeasible);
            }

            let t = t1.min(t2);
            if t.is_finite() && t > 0.0 {
                for d in 0..DIM {
                    x[d] += t * z[d];
                }
                for a in 0..k {
                    lambda[a] -= t * r[a];
                }
                lambda_pick += t;
            }

            if t1 <= t2 {
                // Constraint satisfied exactly; admit it to the active set.
                active[k] = pick;
                lambda[k] = lambda_pick;
                k += 1;
                break;
            }
            // Drop the blocking constraint and retry.
            for a in blocking..k - 1 {
                active[a] = active[a + 1];
                lambda[a] = lambda[a + 1];
            }
            k -= 1;
        }
    }

    // Iteration guard tripped; report the current iterate honestly as
    // infeasible so the caller applies the fallback policy.
    finish(x, active, lambda, k, QpStatus::Infeasible)
}

/// Fallback command when the hard constraints admit no solution: descend the
/// summed squared barrier-row violations from the desired acceleration, then
/// clamp to the acceleration box.
pub fn least_violating_mu(p: &QpProblem) -> Vec3 {
    let mut mu = p.mu_desired;
    let n = p.cbf_rows.len().max(1) as f64;
    let step = 1.0 / n;
    for _ in 0..200 {
        let mut grad = Vec3::zero();
        for row in p.cbf_rows {
            let viol = row.normal.dot(mu) - row.bound;
            if viol > 0.0 {
                grad = grad + row.normal * viol;
            }
        }
        if grad.norm() < 1e-12 {
            break;
        }
        mu = mu - grad * step;
    }
    mu.clamp(p.mu_min, p.mu_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    fn free_problem(rows: &[CbfRow], mu_d: Vec3) -> QpProblem<'_> {
        QpProblem {
            weight: Vec3::new(1.0, 1.0, 1.0),
            slack_weight: 10.0,
            mu_desired: mu_d,
            cbf_rows: rows,
            clf: ClfRow {
                normal: Vec3::zero(),
                bound: 0.0,
            },
            mu_min: Vec3::new(-100.0, -100.0, -100.0),
            mu_max: Vec3::new(100.0, 100.0, 100.0),
        }
    }

    #[test]
    fn barrier_value_cases() {
        assert!((barrier_value(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), 0.3) - 0.7).abs() < 1e-12);
        assert!(barrier_value(Vec3::zero(), Vec3::new(0.3, 0.0, 0.0), 0.3).abs() < 1e-12);
        assert!(barrier_value(Vec3::zero(), Vec3::new(0.1, 0.0, 0.0), 0.3) < 0.0);
    }

    #[test]
    fn cbf_row_static_case() {
        // Everything at rest: only the omega_n^2 B term survives at mu = 0.
        let uav = UavState::at_rest(Vec3::zero(), 0.0);
        let obs = ObstacleState {
            position: Vec3::new(2.0, 0.0, 0.0),
            velocity: Vec3::zero(),
            radius_true: 0.1,
            radius_barrier: 0.5,
        };
        let p = CbfParams {
            zeta: 1.0,
            omega_n: 2.0,
        };
        let row = cbf_row(&uav, Vec3::zero(), &obs, Vec3::zero(), &p).unwrap();
        assert!((row.h_value - 4.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn cbf_row_linear_in_mu() {
        let uav = UavState {
            position: Vec3::new(0.2, -0.3, 0.5),
            velocity: Vec3::new(0.5, 0.1, -0.2),
            attitude: crate::math::Quat::identity(),
            angular_rate: Vec3::zero(),
        };
        let obs = ObstacleState {
            position: Vec3::new(1.5, 0.8, 0.5),
            velocity: Vec3::new(-0.2, 0.0, 0.0),
            radius_true: 0.1,
            radius_barrier: 0.24,
        };
        let p = CbfParams {
            zeta: 1.2,
            omega_n: 1.7,
        };
        let h = |mu: Vec3| {
            cbf_row(&uav, mu, &obs, Vec3::zero(), &p)
                .unwrap()
                .h_value
        };
        let m1 = Vec3::new(0.7, -0.4, 0.2);
        let m2 = Vec3::new(-0.3, 0.9, -0.6);
        let lhs = h(m1 + m2) - h(Vec3::zero());
        let rhs = (h(m1) - h(Vec3::zero())) + (h(m2) - h(Vec3::zero()));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn cbf_row_matches_finite_difference_along_trajectory() {
        // Integrate both bodies under constant accelerations and compare the
        // row-predicted h against second differences of B.
        let mut rng = Rng::new(91);
        let p = CbfParams {
            zeta: 1.0,
            omega_n: 2.0,
        };
        for _ in 0..50 {
            let r0 = Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(0.0, 1.0));
            let v0 = Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-0.5, 0.5));
            let rc0 = r0
                + Vec3::new(rng.range(0.5, 2.0), rng.range(0.5, 2.0), rng.range(-0.5, 0.5));
            let vc = Vec3::new(rng.range(-0.5, 0.5), rng.range(-0.5, 0.5), 0.0);
            let mu = Vec3::new(rng.range(-2.0, 2.0), rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));

            let uav = UavState {
                position: r0,
                velocity: v0,
                attitude: crate::math::Quat::identity(),
                angular_rate: Vec3::zero(),
            };
            let obs = ObstacleState {
                position: rc0,
                velocity: vc,
                radius_true: 0.1,
                radius_barrier: 0.24,
            };
            let row = cbf_row(&uav, mu, &obs, Vec3::zero(), &p).unwrap();

            let barrier_at = |t: f64| {
                let r = r0 + v0 * t + mu * (0.5 * t * t);
                let rc = rc0 + vc * t;
                barrier_value(r, rc, obs.radius_barrier)
            };
            let h = 1e-4;
            let b0 = barrier_at(0.0);
            let bp = barrier_at(h);
            let bm = barrier_at(-h);
            let b_dot = (bp - bm) / (2.0 * h);
            let b_ddot = (bp - 2.0 * b0 + bm) / (h * h);
            let h_fd = b_ddot + 2.0 * p.zeta * p.omega_n * b_dot + p.omega_n * p.omega_n * b0;
            assert!(
                (h_fd - row.h_value).abs() < 1e-4,
                "fd {h_fd} vs row {}",
                row.h_value
            );
        }
    }

    #[test]
    fn cbf_row_singular_geometry() {
        let uav = UavState::at_rest(Vec3::zero(), 0.0);
        let obs = ObstacleState {
            position: Vec3::zero(),
            velocity: Vec3::zero(),
            radius_true: 0.1,
            radius_barrier: 0.2,
        };
        let p = CbfParams {
            zeta: 1.0,
            omega_n: 1.0,
        };
        assert!(cbf_row(&uav, Vec3::zero(), &obs, Vec3::zero(), &p).is_err());
    }

    #[test]
    fn clf_row_cases() {
        let uav = UavState::at_rest(Vec3::new(1.0, 0.0, 0.0), 0.0);
        let row = clf_row(&uav, &PositionReference::hold(Vec3::new(1.0, 0.0, 0.0)), 1.0);
        assert!(row.normal.norm() < 1e-12 && row.bound.abs() < 1e-12);

        // Coefficients on mu equal the negated velocity error.
        let reference = PositionReference {
            position: Vec3::new(2.0, 0.0, 0.0),
            velocity: Vec3::new(0.5, -0.3, 0.2),
            acceleration: Vec3::new(0.1, 0.0, 0.0),
        };
        let row = clf_row(&uav, &reference, 2.0);
        assert!((row.normal + reference.velocity).norm() < 1e-12);
    }

    #[test]
    fn qp_identity_when_feasible() {
        let mu_d = Vec3::new(0.5, -0.2, 0.3);
        let rows = [CbfRow {
            normal: Vec3::new(1.0, 0.0, 0.0),
            bound: 5.0,
            h_value: 0.0,
        }];
        let p = free_problem(&rows, mu_d);
        let sol = solve_qp(&p);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.mu - mu_d).norm() < 1e-10);
        assert!(sol.delta.abs() < 1e-10);
    }

    #[test]
    fn qp_halfspace_projection() {
        // Single active barrier row, identity weights, free box: the filter
        // projects onto the half-space.
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let mu_d = Vec3::new(rng.range(-2.0, 2.0), rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
            let a = Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0))
                .normalized();
            let b = rng.range(-1.0, 1.0);
            let rows = [CbfRow {
                normal: a,
                bound: b,
                h_value: 0.0,
            }];
            let p = free_problem(&rows, mu_d);
            let sol = solve_qp(&p);
            let expected = mu_d - a * (a.dot(mu_d) - b).max(0.0);
            assert!(
                (sol.mu - expected).norm() < 1e-9,
                "sol {:?} vs projection {:?}",
                sol.mu,
                expected
            );
        }
    }

    #[test]
    fn qp_respects_box_bounds() {
        let rows: [CbfRow; 0] = [];
        let mut p = free_problem(&rows, Vec3::new(10.0, -10.0, 0.0));
        p.mu_min = Vec3::new(-1.0, -1.0, -1.0);
        p.mu_max = Vec3::new(1.0, 1.0, 1.0);
        let sol = solve_qp(&p);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.mu.x - 1.0).abs() < 1e-10);
        assert!((sol.mu.y + 1.0).abs() < 1e-10);
        assert!(sol.mu.z.abs() < 1e-10);
    }

    #[test]
    fn qp_clf_softening_uses_slack() {
        // An aggressive tracking row conflicting with a barrier row must be
        // absorbed by slack, not violate the barrier.
        let rows = [CbfRow {
            normal: Vec3::new(1.0, 0.0, 0.0),
            bound: 0.0,
            h_value: 0.0,
        }];
        let mut p = free_problem(&rows, Vec3::new(2.0, 0.0, 0.0));
        p.clf = ClfRow {
            normal: Vec3::new(-1.0, 0.0, 0.0),
            bound: -1.0, // wants mu_x >= 1, barrier wants mu_x <= 0
        };
        let sol = solve_qp(&p);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.mu.x <= 1e-9);
        assert!(sol.delta >= 1.0 - 1e-9);
    }

    #[test]
    fn qp_detects_infeasible() {
        let rows = [
            CbfRow {
                normal: Vec3::new(1.0, 0.0, 0.0),
                bound: -2.0, // mu_x <= -2
                h_value: 0.0,
            },
            CbfRow {
                normal: Vec3::new(-1.0, 0.0, 0.0),
                bound: -2.0, // mu_x >= 2
                h_value: 0.0,
            },
        ];
        let p = free_problem(&rows, Vec3::zero());
        let sol = solve_qp(&p);
        assert_eq!(sol.status, QpStatus::Infeasible);
        let fallback = least_violating_mu(&p);
        assert!(fallback.is_finite());
    }

    #[test]
    fn qp_kkt_conditions_on_random_problems() {
        let mut rng = Rng::new(77);
        let mut solved = 0;
        for _ in 0..500 {
            let mu_d = Vec3::new(rng.range(-3.0, 3.0), rng.range(-3.0, 3.0), rng.range(-3.0, 3.0));
            let mut rows = Vec::new();
            for _ in 0..rng.pick(4) {
                let a = Vec3::new(
                    rng.range(-1.0, 1.0),
                    rng.range(-1.0, 1.0),
                    rng.range(-1.0, 1.0),
                );
                if a.norm() < 1e-3 {
                    continue;
                }
                rows.push(CbfRow {
                    normal: a.normalized(),
                    bound: rng.range(-1.5, 3.0),
                    h_value: 0.0,
                });
            }
            let p = QpProblem {
                weight: Vec3::new(rng.range(0.5, 2.0), rng.range(0.5, 2.0), rng.range(0.5, 2.0)),
                slack_weight: rng.range(1.0, 20.0),
                mu_desired: mu_d,
                cbf_rows: &rows,
                clf: ClfRow {
                    normal: Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)),
                    bound: rng.range(-1.0, 1.0),
                },
                mu_min: Vec3::new(-4.0, -4.0, -4.0),
                mu_max: Vec3::new(4.0, 4.0, 4.0),
            };
            let sol = solve_qp(&p);
            if sol.status != QpStatus::Optimal {
                continue;
            }
            solved += 1;

            let x = [
                sol.mu.x - mu_d.x,
                sol.mu.y - mu_d.y,
                sol.mu.z - mu_d.z,
                sol.delta,
            ];
            // Feasibility of every constraint.
            for i in 0..constraint_count(rows.len()) {
                let (g, c) = constraint(&p, i);
                assert!(
                    dot4(&g, &x) <= c + 1e-8,
                    "constraint {i} violated by {}",
                    dot4(&g, &x) - c
                );
            }
            // Stationarity: G x = sum lambda_i n_i with n_i = -g_i.
            let gmat = [p.weight.x, p.weight.y, p.weight.z, p.slack_weight];
            let mut resid = [0.0f64; DIM];
            for d in 0..DIM {
                resid[d] = gmat[d] * x[d];
            }
            for a in 0..sol.active_len {
                let (idx, lam) = sol.active[a];
                assert!(lam >= -1e-10, "negative multiplier {lam}");
                let (g, _) = constraint(&p, idx);
                for d in 0..DIM {
                    resid[d] += lam * g[d];
                }
            }
            let stationarity = dot4(&resid, &resid).sqrt();
            assert!(stationarity < 1e-8, "stationarity residual {stationarity}");
            // Complementary slackness.
            for a in 0..sol.active_len {
                let (idx, lam) = sol.active[a];
                let (g, c) = constraint(&p, idx);
                let slack = c - dot4(&g, &x);
                assert!(
                    (lam * slack).abs() < 1e-8,
                    "complementarity {} on row {idx}",
                    lam * slack
                );
            }
        }
        assert!(solved > 400, "only {solved} problems were feasible");
    }
}
