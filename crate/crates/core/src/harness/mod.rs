//! Scenario harness: configuration files, closed-loop runs, metrics and
//! controller comparisons.

pub mod compare;
pub mod config;
pub mod metrics;
pub mod scenario;
pub mod sim;

pub use compare::{compare_controllers, run_with, sweep, write_run, Comparison, SweepPoint};
pub use config::{ConfigBuilder, SimConfig, TireConfig};
pub use metrics::{oscillation_events, RunSummary};
pub use scenario::{ControllerKind, Driver, PathFollower, ReferencePath, Scenario, SensorNoise, SteerProfile};
pub use sim::{csv_string, run_scenario, write_csv, RunResult, TelemetryRecord};
