//! Batch flight simulation: mission profiles, closed-loop execution,
//! verdict classification, and Monte-Carlo evaluation.

pub mod flight;
pub mod mission;
pub mod monte;
pub mod report;

pub use flight::{all_policies, classify, policy_from_name, run_flight, run_flight_with, FlightRecord, StepRecord, TimingStats};
pub use mission::{
    generate_obstacles, mission_duration, obstacle_region, reference_at, GenerationError,
    MissionKind, SimObstacle,
};
pub use monte::{flight_seed, monte_carlo, wilson_interval, MonteCarloSummary, SummaryRow};
pub use report::{summary_csv, write_flight_csv, write_flight_jsonl, FLIGHT_CSV_HEADER, SUMMARY_CSV_HEADER, VERSION};
