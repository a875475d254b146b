use std::fs;
use std::path::Path;

use sideslip_mpc::harness::compare::write_run;
use sideslip_mpc::harness::sim::TelemetryRecord;
use sideslip_mpc::harness::{compare_controllers, csv_string, run_scenario, run_with, ControllerKind, SimConfig};
use sideslip_mpc::Error;

const DLC: &str = include_str!("../../../scenarios/double_lane_change.cfg");
const MILD_HIGH: &str = include_str!("../../../scenarios/mild_high_mu.cfg");

fn config(text: &str, overrides: &[(&str, &str)]) -> SimConfig {
    let overrides: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    SimConfig::from_text_with(text, Path::new("scenario.cfg"), &overrides).unwrap()
}

#[test]
fn double_lane_change_is_followed() {
    let cfg = config(DLC, &[]);
    let cmp = compare_controllers(&cfg).unwrap();
    for run in cmp.runs() {
        let err = run.summary.peak_path_error.unwrap();
        assert!(run.fault.is_none());
        assert!(err < 0.5, "{}: peak path error {err:.3} m", run.summary.controller);
        assert_eq!(run.summary.input_violations, 0);
    }
}

#[test]
fn double_lane_change_on_medium_friction() {
    let cfg = config(DLC, &[("scenario.mu", "0.5")]);
    let run = run_with(&cfg, ControllerKind::Mpc).unwrap();
    assert!(run.fault.is_none());
    assert!(run.summary.peak_path_error.unwrap() < 0.5);
}

#[test]
fn csv_and_summary_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(MILD_HIGH, &[("scenario.duration", "1.5")]);
    let run = run_scenario(&cfg).unwrap();
    let (csv, summary) = write_run(dir.path(), "mild", &run).unwrap();
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TelemetryRecord::HEADER);
    assert_eq!(lines.count(), run.records.len());
    assert_eq!(text, csv_string(&run.records));
    let summary = fs::read_to_string(summary).unwrap();
    assert!(summary.contains("controller = mpc"));
    assert!(summary.contains("oscillation_events = 0"));
}

#[test]
fn config_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.cfg");
    fs::write(&path, MILD_HIGH).unwrap();
    let from_file = SimConfig::from_file(&path).unwrap();
    assert_eq!(from_file, config(MILD_HIGH, &[]));

    fs::write(&path, "scenario.mu = 0.5\nmpc.N = nope\n").unwrap();
    match SimConfig::from_file(&path) {
        Err(Error::Config { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(SimConfig::from_file(&dir.path().join("missing.cfg")).is_err());
}

#[test]
fn noise_seed_changes_output_reproducibly() {
    let noisy = |seed: &str| {
        let cfg = config(
            MILD_HIGH,
            &[
                ("sensor.ay_noise", "0.05"),
                ("sensor.seed", seed),
                ("scenario.duration", "2"),
            ],
        );
        csv_string(&run_scenario(&cfg).unwrap().records)
    };
    assert_eq!(noisy("1"), noisy("1"));
    assert_ne!(noisy("1"), noisy("2"));
}

#[test]
fn mild_scenario_orders_excursions() {
    // both controllers converge; the MPC peak excursion does not exceed the conventional one
    let cmp = compare_controllers(&config(MILD_HIGH, &[])).unwrap();
    let (mpc, conv) = (&cmp.mpc.summary, &cmp.conventional.summary);
    assert!(
        mpc.peak_abs_x1 <= conv.peak_abs_x1 * (1.0 + 1e-9),
        "{} vs {}",
        mpc.peak_abs_x1,
        conv.peak_abs_x1
    );
    assert!(!mpc.unstable && !conv.unstable);
}
