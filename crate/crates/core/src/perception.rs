//! Risk-aware sensor pointing.
//!
//! The local environment is summarized by a polar density surface: one
//! rational peak per point of interest, with height driven by how close the
//! barrier constraint is to activating and width driven by how stale the
//! observation is. Convolving that surface with the sensor's angular quality
//! profile gives, for each candidate heading, the total risk the sensor
//! would observe. The heading is chosen by maximizing that objective over a
//! fixed grid, with a rate penalty that discourages jumps between distant
//! maxima.
//!
//! The radial part of the convolution integral has a closed form, which is
//! what makes the whole pipeline cheap enough to run inside the control
//! loop: each objective evaluation costs one 1-D quadrature instead of a
//! 2-D one.

use serde::{Deserialize, Serialize};

use crate::math::wrap_angle;

/// One point of interest in UAV-relative polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPeak {
    /// Distance from the vehicle (m).
    #[serde(rename = "r_k")]
    pub range: f64,
    /// World-frame bearing, wrapped to `[-pi, pi)`.
    #[serde(rename = "theta_k")]
    pub bearing: f64,
    /// Peak height (collision risk weight).
    #[serde(rename = "alpha_k")]
    pub height: f64,
    /// Peak sharpness; larger values give narrower peaks (higher location
    /// confidence).
    #[serde(rename = "beta_k")]
    pub sharpness: f64,
}

/// Snapshot of all density peaks for one control step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityScene {
    pub peaks: Vec<DensityPeak>,
}

impl DensityScene {
    pub fn empty() -> Self {
        Self { peaks: Vec::new() }
    }
}

/// Parameters mapping barrier values and observation staleness to peak
/// shape.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskParams {
    /// Nominal peak height at zero barrier margin.
    pub nominal_height: f64,
    /// Exponential decay of risk with the barrier constraint value.
    pub risk_decay: f64,
    /// Nominal sharpness for a just-observed obstacle.
    pub nominal_sharpness: f64,
    /// Exponential decay of sharpness with time since last observation.
    pub confidence_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// Unit quality across the field of view.
    Binary,
    /// Cosine roll-off toward the field-of-view edge.
    Degraded,
}

/// Angular sensing model: half-angle, edge-degradation angle, range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensorModel {
    /// Field-of-view half-angle (rad), in `(0, pi]`.
    pub half_angle: f64,
    /// Angle at which degraded quality reaches zero (rad); in
    /// `[half_angle, pi]` so quality stays in `[0, 1]` inside the FOV.
    pub degrade_angle: f64,
    /// Maximum sensing range (m).
    pub max_range: f64,
    pub mode: QualityMode,
}

/// Heading search configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct YawOptConfig {
    /// Weight on the squared (wrapped) heading change per decision.
    pub rate_penalty: f64,
    /// Grid increment for the global search (rad).
    pub search_increment: f64,
    /// Nodes of the fixed convolution quadrature (rounded up to an odd
    /// count).
    pub quadrature_points: usize,
}

/// Peak height from the barrier constraint value: low margin, high risk.
pub fn risk_alpha(h_value: f64, p: &RiskParams) -> f64 {
    p.nominal_height * (-p.risk_decay * h_value).exp()
}

/// Peak sharpness from staleness: fresh observations give narrow peaks.
pub fn confidence_beta(time_since_seen: f64, p: &RiskParams) -> f64 {
    debug_assert!(time_since_seen >= 0.0);
    p.nominal_sharpness * (-p.confidence_decay * time_since_seen).exp()
}

/// Density surface value at polar `(r, theta)` relative to the vehicle.
pub fn density_eval(scene: &DensityScene, r: f64, theta: f64) -> f64 {
    debug_assert!(r >= 0.0);
    scene
        .peaks
        .iter()
        .map(|p| {
            let quad = r * r - 2.0 * r * p.range * (theta - p.bearing).cos() + p.range * p.range;
            p.height / (p.sharpness * quad + 1.0)
        })
        .sum()
}

/// Angular quality at offset `delta` from the pointing axis.
pub fn quality_eval(sensor: &SensorModel, delta: f64) -> f64 {
    let d = wrap_angle(delta).abs();
    if d > sensor.half_angle {
        return 0.0;
    }
    match sensor.mode {
        QualityMode::Binary => 1.0,
        QualityMode::Degraded => {
            let ck = sensor.degrade_angle.cos();
            (d.cos() - ck) / (1.0 - ck)
        }
    }
}

/// Closed form of the radial integral `int_0^rho Phi(r, theta) r dr`.
///
/// Per peak the integrand is `alpha r / (a r^2 + b r + c)` with
/// `a = beta`, `b = -2 beta r_k cos(theta - theta_k)`, `c = beta r_k^2 + 1`.
/// The discriminant `4ac - b^2 = 4 beta (beta r_k^2 sin^2(theta - theta_k) + 1)`
/// is strictly positive, so the antiderivative is a log plus an arctangent.
/// Keeping the arctangent as a difference of two evaluations (rather than
/// collapsing it with the quotient identity) makes it continuous in `rho`
/// without branch bookkeeping.
pub fn radial_profile(scene: &DensityScene, rho: f64, theta: f64) -> f64 {
    let mut total = 0.0;
    for p in &scene.peaks {
        let a = p.sharpness;
        let b = -2.0 * p.sharpness * p.range * (theta - p.bearing).cos();
        let c = p.sharpness * p.range * p.range + 1.0;
        let s = (4.0 * a * c - b * b).sqrt();
        let log_term = ((a * rho * rho + b * rho + c) / c).ln();
        let atan_term = if b == 0.0 {
            0.0
        } else {
            (2.0 * b / s) * (((2.0 * a * rho + b) / s).atan() - (b / s).atan())
        };
        total += p.height / (2.0 * a) * (log_term - atan_term);
    }
    total
}

fn odd_at_least(n: usize) -> usize {
    let n = n.max(3);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Observed-risk objective for pointing direction `psi`: fixed-node
/// composite Simpson quadrature of the radial profile against the quality
/// kernel over the field of view.
pub fn objective_gamma(
    scene: &DensityScene,
    sensor: &SensorModel,
    quadrature_points: usize,
    psi: f64,
) -> f64 {
    if scene.peaks.is_empty() {
        return 0.0;
    }
    let n = odd_at_least(quadrature_points);
    let lo = psi - sensor.half_angle;
    let hi = psi + sensor.half_angle;
    let h = (hi - lo) / (n - 1) as f64;

    let mut acc = 0.0;
    for i in 0..n {
        let theta = lo + h * i as f64;
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * radial_profile(scene, sensor.max_range, theta) * quality_eval(sensor, psi - theta);
    }
    acc * h / 3.0
}

/// Grid size implied by the configured increment.
pub fn grid_size(cfg: &YawOptConfig) -> usize {
    (2.0 * std::f64::consts::PI / cfg.search_increment).round() as usize
}

/// Global heading search: argmax over the wrapped grid of the objective
/// minus the rate penalty `epsilon * wrap(psi - psi_prev)^2`.
///
/// Ties pick the candidate closest (by wrapped distance) to the previous
/// heading, then the smallest angle, so the result is deterministic.
pub fn optimal_yaw(
    scene: &DensityScene,
    sensor: &SensorModel,
    cfg: &YawOptConfig,
    psi_prev: f64,
) -> f64 {
    let m = grid_size(cfg);
    debug_assert!(m >= 8, "grid too coarse: {m} samples");
    let step = 2.0 * std::f64::consts::PI / m as f64;

    let mut best_psi = f64::NAN;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_dist = f64::INFINITY;
    for i in 0..m {
        let psi = wrap_angle(-std::f64::consts::PI + step * i as f64);
        let swing = wrap_angle(psi - psi_prev);
        let score =
            objective_gamma(scene, sensor, cfg.quadrature_points, psi) - cfg.rate_penalty * swing * swing;
        let dist = swing.abs();
        let take = score > best_score || (score == best_score && dist < best_dist);
        if take {
            best_psi = psi;
            best_score = score;
            best_dist = dist;
        }
    }
    best_psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use std::f64::consts::PI;

    fn degraded(half_angle: f64, max_range: f64) -> SensorModel {
        SensorModel {
            half_angle,
            degrade_angle: half_angle,
            max_range,
            mode: QualityMode::Degraded,
        }
    }

    fn random_scene(rng: &mut Rng, max_peaks: usize) -> DensityScene {
        let n = rng.pick(max_peaks + 1);
        let peaks = (0..n)
            .map(|_| DensityPeak {
                range: rng.range(0.0, 10.0),
                bearing: rng.range(-PI, PI),
                height: rng.range(0.05, 5.0),
                sharpness: rng.range(0.1, 100.0),
            })
            .collect();
        DensityScene { peaks }
    }

    /// Dense Simpson reference for the radial integral, independent of the
    /// closed form.
    fn radial_quadrature(scene: &DensityScene, rho: f64, theta: f64, nodes: usize) -> f64 {
        let n = if nodes % 2 == 0 { nodes + 1 } else { nodes };
        let h = rho / (n - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let r = h * i as f64;
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * density_eval(scene, r, theta) * r;
        }
        acc * h / 3.0
    }

    #[test]
    fn risk_alpha_cases() {
        let p = RiskParams {
            nominal_height: 1.0,
            risk_decay: 1.0,
            nominal_sharpness: 10.0,
            confidence_decay: 0.5,
        };
        assert!((risk_alpha(0.0, &p) - 1.0).abs() < 1e-12);
        assert!(risk_alpha(100.0, &p) < 1e-12);
        assert!((risk_alpha(1.0, &p) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn confidence_beta_cases() {
        let p = RiskParams {
            nominal_height: 1.0,
            risk_decay: 1.0,
            nominal_sharpness: 10.0,
            confidence_decay: 0.5,
        };
        assert!((confidence_beta(0.0, &p) - 10.0).abs() < 1e-12);
        assert!((confidence_beta(2.0, &p) - 10.0 * (-1.0f64).exp()).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let b = confidence_beta(i as f64 * 0.3, &p);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn density_eval_cases() {
        assert_eq!(density_eval(&DensityScene::empty(), 1.0, 0.3), 0.0);

        let lone = DensityScene {
            peaks: vec![DensityPeak {
                range: 2.0,
                bearing: 0.7,
                height: 3.5,
                sharpness: 8.0,
            }],
        };
        assert!((density_eval(&lone, 2.0, 0.7) - 3.5).abs() < 1e-12);

        let two = DensityScene {
            peaks: vec![lone.peaks[0], {
                DensityPeak {
                    range: 1.0,
                    bearing: -1.2,
                    height: 0.5,
                    sharpness: 2.0,
                }
            }],
        };
        let single_b = DensityScene {
            peaks: vec![two.peaks[1]],
        };
        let sum = density_eval(&lone, 1.5, 0.1) + density_eval(&single_b, 1.5, 0.1);
        assert!((density_eval(&two, 1.5, 0.1) - sum).abs() < 1e-12);
    }

    #[test]
    fn quality_eval_cases() {
        let s = degraded(0.6, 3.0);
        assert!((quality_eval(&s, 0.0) - 1.0).abs() < 1e-12);
        assert!(quality_eval(&s, 0.6).abs() < 1e-12);
        assert_eq!(quality_eval(&s, 0.9), 0.0);

        let b = SensorModel {
            mode: QualityMode::Binary,
            ..s
        };
        assert_eq!(quality_eval(&b, 0.3), 1.0);
        assert_eq!(quality_eval(&b, 0.9), 0.0);
    }

    #[test]
    fn quality_bounded_unit_interval() {
        let mut rng = Rng::new(2);
        for _ in 0..500 {
            let sigma = rng.range(0.1, PI);
            let s = SensorModel {
                half_angle: sigma,
                degrade_angle: rng.range(sigma, PI),
                max_range: 1.0,
                mode: if rng.pick(2) == 0 {
                    QualityMode::Binary
                } else {
                    QualityMode::Degraded
                },
            };
            let q = quality_eval(&s, rng.range(-7.0, 7.0));
            assert!((0.0..=1.0).contains(&q));
        }
    }

    #[test]
    fn radial_profile_peak_at_origin() {
        let scene = DensityScene {
            peaks: vec![DensityPeak {
                range: 0.0,
                bearing: 0.0,
                height: 2.0,
                sharpness: 5.0,
            }],
        };
        let rho = 3.0;
        let expected = 2.0 / (2.0 * 5.0) * (5.0 * rho * rho + 1.0f64).ln();
        assert!((radial_profile(&scene, rho, 1.1) - expected).abs() < 1e-12);
        assert_eq!(radial_profile(&DensityScene::empty(), rho, 0.0), 0.0);
    }

    #[test]
    fn radial_profile_matches_quadrature() {
        let mut rng = Rng::new(41);
        for _ in 0..60 {
            let scene = random_scene(&mut rng, 6);
            if scene.peaks.is_empty() {
                continue;
            }
            let rho = rng.range(0.5, 8.0);
            let theta = rng.range(-PI, PI);
            let analytic = radial_profile(&scene, rho, theta);
            let numeric = radial_quadrature(&scene, rho, theta, 40_001);
            let scale = analytic.abs().max(1e-12);
            assert!(
                ((analytic - numeric) / scale).abs() < 1e-7,
                "analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn discriminant_positive_identity() {
        let mut rng = Rng::new(4);
        for _ in 0..1000 {
            let beta = rng.range(1e-3, 200.0);
            let r_k = rng.range(0.0, 20.0);
            let dth = rng.range(-PI, PI);
            let a = beta;
            let b = -2.0 * beta * r_k * dth.cos();
            let c = beta * r_k * r_k + 1.0;
            let disc = 4.0 * a * c - b * b;
            let identity = 4.0 * beta * (beta * r_k * r_k * dth.sin().powi(2) + 1.0);
            assert!(disc > 0.0);
            assert!((disc - identity).abs() < 1e-9 * identity.max(1.0));
        }
    }

    #[test]
    fn gamma_empty_and_symmetric() {
        let sensor = degraded(0.7, 4.0);
        for psi in [-3.0, -1.0, 0.0, 2.5] {
            assert_eq!(objective_gamma(&DensityScene::empty(), &sensor, 33, psi), 0.0);
        }

        let centered = DensityScene {
            peaks: vec![DensityPeak {
                range: 0.0,
                bearing: 0.0,
                height: 1.0,
                sharpness: 3.0,
            }],
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..64 {
            let psi = -PI + 2.0 * PI * i as f64 / 64.0;
            let g = objective_gamma(&centered, &sensor, 33, psi);
            lo = lo.min(g);
            hi = hi.max(g);
        }
        assert!(hi - lo < 1e-9, "rotationally symmetric scene varied by {}", hi - lo);
        assert!(lo > 0.0);
    }

    #[test]
    fn gamma_nonnegative_random() {
        let mut rng = Rng::new(9);
        for _ in 0..100 {
            let scene = random_scene(&mut rng, 5);
            let sensor = degraded(rng.range(0.2, 1.5), rng.range(1.0, 6.0));
            let g = objective_gamma(&scene, &sensor, 33, rng.range(-PI, PI));
            assert!(g >= 0.0);
        }
    }

    #[test]
    fn optimal_yaw_tracks_single_peak() {
        let sensor = degraded(0.7, 5.0);
        let cfg = YawOptConfig {
            rate_penalty: 0.0,
            search_increment: 9.0f64.to_radians(),
            quadrature_points: 33,
        };
        let mut rng = Rng::new(13);
        for _ in 0..40 {
            let bearing = rng.range(-PI, PI);
            let scene = DensityScene {
                peaks: vec![DensityPeak {
                    range: 2.0,
                    bearing,
                    height: 4.0,
                    sharpness: 10.0,
                }],
            };
            let psi = optimal_yaw(&scene, &sensor, &cfg, 0.0);
            assert!(
                wrap_angle(psi - bearing).abs() <= cfg.search_increment + 1e-12,
                "psi {psi} vs bearing {bearing}"
            );
        }
    }

    #[test]
    fn optimal_yaw_penalty_dominates() {
        let sensor = degraded(0.7, 5.0);
        let cfg = YawOptConfig {
            rate_penalty: 1e9,
            search_increment: 9.0f64.to_radians(),
            quadrature_points: 33,
        };
        let scene = DensityScene {
            peaks: vec![DensityPeak {
                range: 1.0,
                bearing: 2.0,
                height: 10.0,
                sharpness: 5.0,
            }],
        };
        let psi_prev = -0.8;
        let psi = optimal_yaw(&scene, &sensor, &cfg, psi_prev);
        assert!(wrap_angle(psi - psi_prev).abs() <= cfg.search_increment / 2.0 + 1e-12);
    }

    #[test]
    fn optimal_yaw_empty_scene_holds_heading() {
        let sensor = degraded(0.7, 5.0);
        let cfg = YawOptConfig {
            rate_penalty: 0.05,
            search_increment: 9.0f64.to_radians(),
            quadrature_points: 33,
        };
        let psi_prev = 1.234;
        let psi = optimal_yaw(&DensityScene::empty(), &sensor, &cfg, psi_prev);
        assert!(wrap_angle(psi - psi_prev).abs() <= cfg.search_increment / 2.0 + 1e-12);
    }

    #[test]
    fn optimal_yaw_rotation_equivariant() {
        let sensor = degraded(0.9, 5.0);
        let cfg = YawOptConfig {
            rate_penalty: 0.0,
            search_increment: 9.0f64.to_radians(),
            quadrature_points: 33,
        };
        let mut rng = Rng::new(21);
        for _ in 0..20 {
            let scene = {
                let mut s = random_scene(&mut rng, 4);
                while s.peaks.is_empty() {
                    s = random_scene(&mut rng, 4);
                }
                s
            };
            // Rotate by a multiple of the increment so grids align.
            let shift = cfg.search_increment * (1 + rng.pick(20)) as f64;
            let rotated = DensityScene {
                peaks: scene
                    .peaks
                    .iter()
                    .map(|p| DensityPeak {
                        bearing: wrap_angle(p.bearing + shift),
                        ..*p
                    })
                    .collect(),
            };
            let base = optimal_yaw(&scene, &sensor, &cfg, 0.0);
            let moved = optimal_yaw(&rotated, &sensor, &cfg, 0.0);
            let diff = wrap_angle(moved - (base + shift)).abs();
            assert!(
                diff <= cfg.search_increment + 1e-9,
                "equivariance off by {diff}"
            );
        }
    }

    #[test]
    fn optimal_yaw_height_scaling_invariant() {
        let sensor = degraded(0.9, 5.0);
        let cfg = YawOptConfig {
            rate_penalty: 0.0,
            search_increment: 9.0f64.to_radians(),
            quadrature_points: 33,
        };
        let mut rng = Rng::new(33);
        for _ in 0..20 {
            let mut scene = random_scene(&mut rng, 4);
            while scene.peaks.is_empty() {
                scene = random_scene(&mut rng, 4);
            }
            let scaled = DensityScene {
                peaks: scene
                    .peaks
                    .iter()
                    .map(|p| DensityPeak {
                        height: p.height * 37.5,
                        ..*p
                    })
                    .collect(),
            };
            let a = optimal_yaw(&scene, &sensor, &cfg, 0.4);
            let b = optimal_yaw(&scaled, &sensor, &cfg, 0.4);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn scene_json_round_trip() {
        let scene = DensityScene {
            peaks: vec![DensityPeak {
                range: 1.5,
                bearing: -0.4,
                height: 2.0,
                sharpness: 12.0,
            }],
        };
        let json = serde_json::to_string(&scene).unwrap();
        assert!(json.contains("\"r_k\""));
        assert!(json.contains("\"theta_k\""));
        assert!(json.contains("\"alpha_k\""));
        assert!(json.contains("\"beta_k\""));
        let back: DensityScene = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scene);
    }
}
