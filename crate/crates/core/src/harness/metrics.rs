//! Run metrics: peak lateral acceleration, bound bookkeeping and
//! saturation-oscillation detection.

use std::fmt::Write as _;

use crate::mpc::turn_sign;

use super::config::SimConfig;
use super::scenario::ControllerKind;
use super::sim::{flags, TelemetryRecord, SLACK_TOLERANCE};

/// Window that ties a sign change of the yaw moment to a visit of the input
/// bound, and that merges repeated sign changes into one event [s].
pub const OSCILLATION_WINDOW: f64 = 0.5;

/// Count saturation-oscillation events.
///
/// A sign change of `M_z` between consecutive records qualifies when some
/// record within `window` seconds of it sits at the input bound. Qualifying
/// sign changes less than `window` after the start of the current event are
/// merged into it.
pub fn oscillation_events(records: &[TelemetryRecord], window: f64) -> usize {
    let at_bound: Vec<f64> = records
        .iter()
        .filter(|r| r.has(flags::INPUT_AT_BOUND))
        .map(|r| r.t)
        .collect();
    let near_bound = |t: f64| {
        let i = at_bound.partition_point(|&tb| tb < t - window - 1e-12);
        at_bound.get(i).is_some_and(|&tb| tb <= t + window + 1e-12)
    };
    let mut events = 0;
    let mut event_start = f64::NEG_INFINITY;
    for pair in records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.m_z * b.m_z < 0.0 && near_bound(b.t) && b.t - event_start > window {
            events += 1;
            event_start = b.t;
        }
    }
    events
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub controller: ControllerKind,
    pub mu: f64,
    pub v_x: f64,
    /// Largest |a_y| after the controller enable time [g].
    pub max_abs_ay: f64,
    /// Gain in `max_abs_ay` over a paired uncontrolled run [%].
    pub improvement_pct: Option<f64>,
    /// Records whose moment exceeds the input bound (must be zero).
    pub input_violations: usize,
    /// Records whose sign-folded state lies outside the MPC state bounds.
    pub state_violations: usize,
    /// Records with a positive MPC slack.
    pub slack_steps: usize,
    pub peak_slack: f64,
    /// Peak |x1| (measured) and |x2| (estimated) after enable [rad].
    pub peak_abs_x1: f64,
    pub peak_abs_x2: f64,
    pub peak_abs_m_z: f64,
    pub oscillation_events: usize,
    pub unstable: bool,
    /// Largest lateral path deviation [m] when a path follower drives.
    pub peak_path_error: Option<f64>,
    pub steps: usize,
}

impl RunSummary {
    pub fn from_records(
        records: &[TelemetryRecord],
        cfg: &SimConfig,
        unstable: bool,
        input_bounds: &[f64],
        path_errors: &[f64],
    ) -> Self {
        let sc = &cfg.scenario;
        let post: Vec<&TelemetryRecord> = records.iter().filter(|r| r.t >= sc.control_enable_time).collect();
        let peak = |f: &dyn Fn(&TelemetryRecord) -> f64| post.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
        let tol = SLACK_TOLERANCE;
        let mpc = &cfg.mpc;
        let state_violations = post
            .iter()
            .filter(|r| {
                let s = turn_sign(r.x1);
                let (x1, x2) = (s * r.x1, s * r.x2_hat);
                x1 > mpc.zeta_max + tol
                    || x1 < mpc.zeta_min - tol
                    || x2 > mpc.alpha_r_max + tol
                    || x2 < mpc.alpha_r_min - tol
            })
            .count();
        Self {
            scenario: sc.name.clone(),
            controller: sc.controller,
            mu: sc.mu,
            v_x: sc.v_x,
            max_abs_ay: peak(&|r| r.a_y) / cfg.vehicle.g,
            improvement_pct: None,
            input_violations: records
                .iter()
                .zip(input_bounds)
                .filter(|(r, b)| r.m_z.abs() > **b)
                .count(),
            state_violations,
            slack_steps: post.iter().filter(|r| r.slack > tol).count(),
            peak_slack: peak(&|r| r.slack),
            peak_abs_x1: peak(&|r| r.x1),
            peak_abs_x2: peak(&|r| r.x2_hat),
            peak_abs_m_z: peak(&|r| r.m_z),
            oscillation_events: oscillation_events(records, OSCILLATION_WINDOW),
            unstable,
            peak_path_error: if path_errors.is_empty() {
                None
            } else {
                Some(path_errors.iter().copied().fold(0.0, f64::max))
            },
            steps: records.len(),
        }
    }

    /// Fill `improvement_pct` relative to an uncontrolled run.
    pub fn with_baseline(mut self, uncontrolled: &RunSummary) -> Self {
        self.improvement_pct = improvement_pct(uncontrolled.max_abs_ay, self.max_abs_ay);
        self
    }

    /// `key = value` text, one field per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(out, "scenario = {}", self.scenario);
        let _ = writeln!(out, "controller = {}", self.controller);
        let _ = writeln!(out, "mu = {}", self.mu);
        let _ = writeln!(out, "v_x = {:.6}", self.v_x);
        let _ = writeln!(out, "max_abs_ay_g = {:.6}", self.max_abs_ay);
        let _ = writeln!(out, "improvement_pct = {}", opt(self.improvement_pct));
        let _ = writeln!(out, "input_violations = {}", self.input_violations);
        let _ = writeln!(out, "state_violations = {}", self.state_violations);
        let _ = writeln!(out, "slack_steps = {}", self.slack_steps);
        let _ = writeln!(out, "peak_slack_rad = {:.6e}", self.peak_slack);
        let _ = writeln!(out, "peak_abs_x1_rad = {:.6e}", self.peak_abs_x1);
        let _ = writeln!(out, "peak_abs_x2_rad = {:.6e}", self.peak_abs_x2);
        let _ = writeln!(out, "peak_abs_m_z = {:.3}", self.peak_abs_m_z);
        let _ = writeln!(out, "oscillation_events = {}", self.oscillation_events);
        let _ = writeln!(out, "unstable = {}", self.unstable);
        let _ = writeln!(out, "peak_path_error_m = {}", opt(self.peak_path_error));
        let _ = writeln!(out, "steps = {}", self.steps);
        out
    }
}

/// Relative gain of `controlled` over `reference` in percent.
pub fn improvement_pct(reference: f64, controlled: f64) -> Option<f64> {
    (reference > 0.0).then(|| (controlled - reference) / reference * 100.0)
}
