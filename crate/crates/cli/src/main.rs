//! Command-line front end: single flights, Monte-Carlo batches,
//! perception-only scene evaluation, and solve-time sweeps.
//!
//! Exit codes are the machine contract: 0 success (for `fly`: safe flight),
//! 1 safety violation, 2 configuration or input error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lookout::config::Config;
use lookout::harness::{
    monte_carlo, policy_from_name, run_flight, summary_csv, write_flight_csv, write_flight_jsonl,
    MissionKind, VERSION,
};
use lookout::math::Rng;
use lookout::perception::{grid_size, optimal_yaw, objective_gamma, DensityPeak, DensityScene};
use lookout::math::wrap_angle;

#[derive(Parser)]
#[command(name = "lookout", version, about = "Safety-aware flight simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Fixed,
    LookAhead,
    Nearest,
    SafetyAware,
}

impl PolicyArg {
    fn name(self) -> &'static str {
        match self {
            PolicyArg::Fixed => "fixed",
            PolicyArg::LookAhead => "look_ahead",
            PolicyArg::Nearest => "nearest",
            PolicyArg::SafetyAware => "safety_aware",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Infinity,
    Corridor,
}

impl ProfileArg {
    fn kind(self) -> MissionKind {
        match self {
            ProfileArg::Infinity => MissionKind::Infinity,
            ProfileArg::Corridor => MissionKind::Corridor,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config, String> {
        match &self.config {
            Some(path) => Config::load(path).map_err(|e| e.to_string()),
            None => Ok(Config::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one flight and report its safety verdict.
    Fly {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "safety-aware")]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value = "infinity")]
        profile: ProfileArg,
        /// Write the per-step record here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Paired Monte-Carlo comparison of all policy arms.
    Batch {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Restrict to one profile; both run when omitted.
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        /// Summary CSV path.
        #[arg(long, default_value = "summary.csv")]
        out: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Fill the mean/max solve-time columns (wall clock, not
        /// byte-reproducible).
        #[arg(long, default_value_t = false)]
        timing: bool,
    },
    /// Evaluate the pointing objective over the heading grid for a scene
    /// file.
    Scene {
        #[command(flatten)]
        config: ConfigArg,
        /// Scene JSON: {"peaks": [{"r_k", "theta_k", "alpha_k", "beta_k"}]}.
        #[arg(long)]
        scene: PathBuf,
        /// Override the search increment (degrees).
        #[arg(long)]
        increment: Option<f64>,
        /// Previous heading for the rate penalty (degrees).
        #[arg(long, default_value_t = 0.0)]
        psi_prev: f64,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure yaw-optimizer solve time across search increments.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Increments in degrees; repeat the flag for several.
        #[arg(long = "increment", value_name = "DEG")]
        increments: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optimizer calls per increment.
        #[arg(long, default_value_t = 500)]
        calls: usize,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Fly {
            config,
            seed,
            policy,
            profile,
            out,
            format,
        } => {
            let cfg = config.load()?;
            let policy = policy_from_name(policy.name(), &cfg).expect("known policy");
            let kind = profile.kind();
            let record = run_flight(&cfg, kind, policy, seed, true)
                .map_err(|e| format!("obstacle generation: {e}"))?;
            if let Some(path) = out {
                let mut file = fs::File::create(&path)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                match format {
                    FormatArg::Csv => write_flight_csv(&record, &cfg, &mut file),
                    FormatArg::Jsonl => write_flight_jsonl(&record, &cfg, &mut file),
                }
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            println!(
                "flight profile={} policy={} seed={} safe={} collision_free={} min_barrier={:.4} min_clearance={:.4} infeasible_steps={}",
                kind.name(),
                record.policy.name(),
                seed,
                record.safe,
                record.collision_free,
                record.min_barrier,
                record.min_clearance,
                record.infeasible_steps,
            );
            Ok(if record.safe {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Batch {
            config,
            seed,
            runs,
            profile,
            out,
            jobs,
            timing,
        } => {
            if runs == 0 {
                return Err("--runs must be at least 1".into());
            }
            let cfg = config.load()?;
            let profiles: Vec<MissionKind> = match profile {
                Some(p) => vec![p.kind()],
                None => vec![MissionKind::Infinity, MissionKind::Corridor],
            };
            let mut summaries = Vec::new();
            for kind in profiles {
                summaries.push(monte_carlo(&cfg, kind, runs, seed, jobs, timing));
            }
            let csv = summary_csv(&summaries, &cfg, seed);
            fs::write(&out, &csv).map_err(|e| format!("cannot write {}: {e}", out.display()))?;

            println!("{:<14}{:<10}{:>6}{:>18}{:>12}", "policy", "profile", "n", "collision_free", "safe");
            for s in &summaries {
                for row in &s.rows {
                    println!(
                        "{:<14}{:<10}{:>6}{:>17.1}%{:>11.1}%",
                        row.policy,
                        row.profile,
                        row.n,
                        row.collision_free_rate * 100.0,
                        row.safe_rate * 100.0
                    );
                }
                if !s.skipped_seeds.is_empty() {
                    eprintln!(
                        "warning: {} seed(s) skipped on {} (obstacle generation failed)",
                        s.skipped_seeds.len(),
                        s.profile.name()
                    );
                }
            }
            println!("summary written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Scene {
            config,
            scene,
            increment,
            psi_prev,
            out,
        } => {
            let mut cfg = config.load()?;
            if let Some(inc) = increment {
                cfg.yaw_opt.increment_deg = inc;
                cfg.validate().map_err(|e| e.to_string())?;
            }
            let text = fs::read_to_string(&scene)
                .map_err(|e| format!("cannot read {}: {e}", scene.display()))?;
            let scene: DensityScene =
                serde_json::from_str(&text).map_err(|e| format!("malformed scene: {e}"))?;
            validate_scene(&scene)?;

            let sensor = cfg.sensor_model();
            let yaw_cfg = cfg.yaw_opt();
            let psi_prev = psi_prev.to_radians();
            let psi_d = optimal_yaw(&scene, &sensor, &yaw_cfg, psi_prev);

            let m = grid_size(&yaw_cfg);
            let step = 2.0 * std::f64::consts::PI / m as f64;
            let mut csv = String::new();
            csv.push_str(&format!("# lookout scene v{VERSION}\n"));
            csv.push_str(&format!(
                "# config = {}\n",
                serde_json::to_string(&cfg).expect("config serializes")
            ));
            csv.push_str(&format!("# psi_prev_rad = {psi_prev:.6}\n"));
            csv.push_str(&format!("# psi_d_rad = {psi_d:.6}\n"));
            csv.push_str("psi_rad,gamma,gamma_bar\n");
            for i in 0..m {
                let psi = wrap_angle(-std::f64::consts::PI + step * i as f64);
                let gamma = objective_gamma(&scene, &sensor, yaw_cfg.quadrature_points, psi);
                let swing = wrap_angle(psi - psi_prev);
                let gamma_bar = gamma - yaw_cfg.rate_penalty * swing * swing;
                csv.push_str(&format!("{psi:.6},{gamma:.9},{gamma_bar:.9}\n"));
            }
            write_text(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            increments,
            seed,
            calls,
            out,
        } => {
            let cfg = config.load()?;
            let increments = if increments.is_empty() {
                vec![18.0, 9.0, 4.5, 2.25]
            } else {
                increments
            };
            let scene = sweep_scene(seed);
            let sensor = cfg.sensor_model();

            let mut csv = String::new();
            csv.push_str(&format!("# lookout sweep v{VERSION}\n"));
            csv.push_str(&format!("# seed = {seed}, calls = {calls}, peaks = {}\n", scene.peaks.len()));
            csv.push_str("increment_deg,grid_points,mean_solve_us\n");
            for &inc in &increments {
                let mut yaw_cfg = cfg.yaw_opt();
                yaw_cfg.search_increment = inc.to_radians();
                let m = grid_size(&yaw_cfg);
                if m < 8 {
                    return Err(format!("increment {inc} deg gives fewer than 8 grid samples"));
                }
                // Warm-up pass, then timed calls.
                let mut psi_prev = 0.0;
                psi_prev = optimal_yaw(&scene, &sensor, &yaw_cfg, psi_prev);
                let started = Instant::now();
                for _ in 0..calls {
                    psi_prev = optimal_yaw(&scene, &sensor, &yaw_cfg, psi_prev);
                }
                let mean_us = started.elapsed().as_secs_f64() * 1e6 / calls as f64;
                csv.push_str(&format!("{inc},{m},{mean_us:.2}\n"));
            }
            write_text(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate_scene(scene: &DensityScene) -> Result<(), String> {
    for (i, p) in scene.peaks.iter().enumerate() {
        let finite =
            p.range.is_finite() && p.bearing.is_finite() && p.height.is_finite() && p.sharpness.is_finite();
        if !finite || p.range < 0.0 || p.height <= 0.0 || p.sharpness <= 0.0 {
            return Err(format!(
                "malformed scene: peak {i} needs r_k >= 0, alpha_k > 0, beta_k > 0, all finite"
            ));
        }
    }
    Ok(())
}

/// Deterministic scene used by the timing sweep: a handful of tracked-
/// obstacle-like peaks.
fn sweep_scene(seed: u64) -> DensityScene {
    let mut rng = Rng::new(seed);
    let peaks = (0..4)
        .map(|_| DensityPeak {
            range: rng.range(0.5, 2.5),
            bearing: rng.range(-std::f64::consts::PI, std::f64::consts::PI),
            height: rng.range(0.2, 2.0),
            sharpness: rng.range(4.0, 16.0),
        })
        .collect();
    DensityScene { peaks }
}

fn write_text(path: Option<&std::path::Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| format!("stdout: {e}"))
        }
    }
}
