//! Serialization of flight records and batch summaries.
//!
//! Every artifact is self-describing: a metadata preamble embeds the tool
//! version, the seed, and the fully-resolved configuration. All numeric
//! formatting is fixed-precision so identical inputs produce identical
//! bytes.

use std::io::{self, Write};

use serde::Serialize;

use crate::config::Config;

use super::flight::FlightRecord;
use super::monte::MonteCarloSummary;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
struct Meta<'a> {
    version: &'static str,
    profile: &'a str,
    policy: &'a str,
    seed: u64,
    config: &'a Config,
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

/// Column order of the compact per-step CSV.
pub const FLIGHT_CSV_HEADER: &str = "t,pos_x,pos_y,pos_z,vel_x,vel_y,vel_z,\
quat_w,quat_x,quat_y,quat_z,rate_x,rate_y,rate_z,yaw,\
mu_d_x,mu_d_y,mu_d_z,mu_x,mu_y,mu_z,delta,psi_d,qp_feasible,\
min_barrier,tracked";

/// Write a recorded flight as CSV: metadata comment lines, a header, one
/// row per control step.
pub fn write_flight_csv(
    record: &FlightRecord,
    cfg: &Config,
    out: &mut dyn Write,
) -> io::Result<()> {
    let meta = Meta {
        version: VERSION,
        profile: record.profile.name(),
        policy: record.policy.name(),
        seed: record.seed,
        config: cfg,
    };
    writeln!(out, "# meta = {}", serde_json::to_string(&meta)?)?;
    writeln!(
        out,
        "# verdict = {{\"collision_free\":{},\"safe\":{},\"min_barrier\":{},\"min_clearance\":{},\"infeasible_steps\":{}}}",
        record.collision_free,
        record.safe,
        f(record.min_barrier),
        f(record.min_clearance),
        record.infeasible_steps
    )?;
    writeln!(out, "{FLIGHT_CSV_HEADER}")?;
    for s in &record.steps {
        let min_barrier = s
            .barriers
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(s.t),
            f(s.state.position.x),
            f(s.state.position.y),
            f(s.state.position.z),
            f(s.state.velocity.x),
            f(s.state.velocity.y),
            f(s.state.velocity.z),
            f(s.state.attitude.w),
            f(s.state.attitude.x),
            f(s.state.attitude.y),
            f(s.state.attitude.z),
            f(s.state.angular_rate.x),
            f(s.state.angular_rate.y),
            f(s.state.angular_rate.z),
            f(s.state.yaw()),
            f(s.mu_desired.x),
            f(s.mu_desired.y),
            f(s.mu_desired.z),
            f(s.mu.x),
            f(s.mu.y),
            f(s.mu.z),
            f(s.delta),
            f(s.psi_d),
            s.qp_feasible,
            if min_barrier.is_finite() {
                f(min_barrier)
            } else {
                String::new()
            },
            s.tracks.len()
        )?;
    }
    Ok(())
}

/// Write a recorded flight as line-delimited JSON: a metadata object, one
/// object per step (including the full track snapshot and per-obstacle
/// barrier values), and a trailing verdict object.
pub fn write_flight_jsonl(
    record: &FlightRecord,
    cfg: &Config,
    out: &mut dyn Write,
) -> io::Result<()> {
    let meta = Meta {
        version: VERSION,
        profile: record.profile.name(),
        policy: record.policy.name(),
        seed: record.seed,
        config: cfg,
    };
    writeln!(out, "{{\"meta\":{}}}", serde_json::to_string(&meta)?)?;
    for s in &record.steps {
        writeln!(out, "{}", serde_json::to_string(s)?)?;
    }
    let verdict = serde_json::json!({
        "collision_free": record.collision_free,
        "safe": record.safe,
        "min_barrier": record.min_barrier,
        "min_clearance": record.min_clearance,
        "infeasible_steps": record.infeasible_steps,
        "total_steps": record.total_steps,
        "blew_up": record.blew_up,
    });
    writeln!(out, "{{\"verdict\":{verdict}}}")
}

pub const SUMMARY_CSV_HEADER: &str =
    "policy,profile,n,collision_free_rate,safe_rate,ci_low,ci_high,mean_solve_us,max_solve_us";

/// Render one or more batch summaries as the policy-versus-rate CSV.
///
/// The timing columns stay empty unless wall-clock timing was requested;
/// everything else is a deterministic function of (seed, config).
pub fn summary_csv(summaries: &[MonteCarloSummary], cfg: &Config, base_seed: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("# lookout batch v{VERSION}\n"));
    out.push_str(&format!("# base_seed = {base_seed}\n"));
    for s in summaries {
        out.push_str(&format!(
            "# profile {} requested = {}, skipped_seeds = {:?}\n",
            s.profile.name(),
            s.requested,
            s.skipped_seeds
        ));
    }
    out.push_str(&format!(
        "# config = {}\n",
        serde_json::to_string(cfg).expect("config serializes")
    ));
    out.push_str(SUMMARY_CSV_HEADER);
    out.push('\n');
    for s in summaries {
        for row in &s.rows {
            let (mean_us, max_us) = match row.timing {
                Some(t) => (format!("{:.1}", t.mean_us()), format!("{:.1}", t.max_us)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{:.4},{},{}\n",
                row.policy,
                row.profile,
                row.n,
                row.collision_free_rate,
                row.safe_rate,
                row.ci_low,
                row.ci_high,
                mean_us,
                max_us
            ));
        }
    }
    out
}
