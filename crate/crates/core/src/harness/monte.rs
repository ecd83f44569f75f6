//! Paired-seed Monte-Carlo batches over the policy arms.
//!
//! Every policy flies the identical seed list, and each seed's obstacle
//! field is generated once and shared across arms, so rate differences
//! reflect the policy and not sampling noise. Workers run one seed each;
//! aggregation is in seed order, so results do not depend on the worker
//! count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::math::Rng;
use crate::policy::YawPolicy;

use super::flight::{all_policies, run_flight_with, TimingStats};
use super::mission::{generate_obstacles, MissionKind};

/// One row of the policy-versus-rate table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub profile: String,
    /// Completed runs (requested minus skipped).
    pub n: usize,
    pub collision_free_rate: f64,
    pub safe_rate: f64,
    /// Wilson 95% interval on the collision-free rate.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Present only when wall-clock timing was requested; timing is the one
    /// output that is not reproducible byte-for-byte.
    pub timing: Option<TimingStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub profile: MissionKind,
    pub base_seed: u64,
    pub requested: usize,
    pub skipped_seeds: Vec<u64>,
    pub rows: Vec<SummaryRow>,
}

impl MonteCarloSummary {
    pub fn row(&self, policy_name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.policy == policy_name)
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

const Z_95: f64 = 1.959963984540054;

/// Deterministic flight seed for run index `i` of a batch.
pub fn flight_seed(base_seed: u64, index: usize) -> u64 {
    Rng::new(base_seed).derive(index as u64).next_u64()
}

struct SeedOutcome {
    seed: u64,
    /// Per policy: verdicts and optimizer timing. `None` when obstacle
    /// generation failed for this seed.
    flights: Option<Vec<(bool, bool, TimingStats)>>,
}

/// Run `n_runs` paired flights of every policy arm on `profile`.
///
/// `jobs = 0` uses all available cores. The returned summary is identical
/// for any job count.
pub fn monte_carlo(
    cfg: &Config,
    profile: MissionKind,
    n_runs: usize,
    base_seed: u64,
    jobs: usize,
    include_timing: bool,
) -> MonteCarloSummary {
    assert!(n_runs >= 1);
    let policies = all_policies(cfg);

    let worker = |i: usize| -> SeedOutcome {
        let seed = flight_seed(base_seed, i);
        let mut rng = Rng::new(seed);
        let obstacles = match generate_obstacles(cfg, profile, &mut rng) {
            Ok(field) => field,
            Err(_) => {
                return SeedOutcome {
                    seed,
                    flights: None,
                }
            }
        };
        let flights = policies
            .iter()
            .map(|&policy| {
                let record = run_flight_with(cfg, profile, policy, &obstacles, seed, false);
                (record.collision_free, record.safe, record.yaw_timing)
            })
            .collect();
        SeedOutcome {
            seed,
            flights: Some(flights),
        }
    };

    let outcomes: Vec<SeedOutcome> = if jobs == 1 {
        (0..n_runs).map(worker).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if jobs > 0 {
            builder = builder.num_threads(jobs);
        }
        let pool = builder.build().expect("thread pool");
        pool.install(|| (0..n_runs).into_par_iter().map(worker).collect())
    };

    let mut skipped_seeds = Vec::new();
    let mut collision_free = vec![0usize; policies.len()];
    let mut safe = vec![0usize; policies.len()];
    let mut timing = vec![TimingStats::default(); policies.len()];
    let mut completed = 0usize;
    for outcome in &outcomes {
        match &outcome.flights {
            None => skipped_seeds.push(outcome.seed),
            Some(flights) => {
                completed += 1;
                for (p, &(cf, sf, t)) in flights.iter().enumerate() {
                    if cf {
                        collision_free[p] += 1;
                    }
                    if sf {
                        safe[p] += 1;
                    }
                    timing[p].merge(&t);
                }
            }
        }
    }

    let rows = policies
        .iter()
        .enumerate()
        .map(|(p, policy)| {
            let (ci_low, ci_high) = wilson_interval(collision_free[p], completed, Z_95);
            SummaryRow {
                policy: policy.name().to_string(),
                profile: profile.name().to_string(),
                n: completed,
                collision_free_rate: if completed == 0 {
                    0.0
                } else {
                    collision_free[p] as f64 / completed as f64
                },
                safe_rate: if completed == 0 {
                    0.0
                } else {
                    safe[p] as f64 / completed as f64
                },
                ci_low,
                ci_high,
                timing: if include_timing && matches!(policy, YawPolicy::SafetyAware) {
                    Some(timing[p])
                } else {
                    None
                },
            }
        })
        .collect();

    MonteCarloSummary {
        profile,
        base_seed,
        requested: n_runs,
        skipped_seeds,
        rows,
    }
}
