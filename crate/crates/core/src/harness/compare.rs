//! Paired runs, parameter sweeps and on-disk output.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::config::{ConfigBuilder, SimConfig};
use super::metrics::RunSummary;
use super::scenario::ControllerKind;
use super::sim::{run_scenario, write_csv, RunResult};

/// Uncontrolled, MPC and conventional runs of the same scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub uncontrolled: RunResult,
    pub mpc: RunResult,
    pub conventional: RunResult,
}

impl Comparison {
    pub fn runs(&self) -> [&RunResult; 3] {
        [&self.uncontrolled, &self.mpc, &self.conventional]
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        for run in self.runs() {
            out.push_str(&format!("[{}]\n", run.summary.controller));
            out.push_str(&run.summary.to_text());
            out.push('\n');
        }
        out
    }
}

/// Run `cfg` with the given controller, everything else unchanged.
pub fn run_with(cfg: &SimConfig, controller: ControllerKind) -> Result<RunResult> {
    let mut cfg = cfg.clone();
    cfg.scenario.controller = controller;
    run_scenario(&cfg)
}

/// Run all three controllers on one scenario; both controlled summaries get
/// their improvement over the uncontrolled run filled in.
pub fn compare_controllers(cfg: &SimConfig) -> Result<Comparison> {
    let uncontrolled = run_with(cfg, ControllerKind::None)?;
    let mut mpc = run_with(cfg, ControllerKind::Mpc)?;
    let mut conventional = run_with(cfg, ControllerKind::Conventional)?;
    mpc.summary = mpc.summary.with_baseline(&uncontrolled.summary);
    conventional.summary = conventional.summary.with_baseline(&uncontrolled.summary);
    Ok(Comparison {
        uncontrolled,
        mpc,
        conventional,
    })
}

/// One value of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub result: RunResult,
}

/// Re-run the scenario in `text` once per value of `param`. When the
/// scenario's controller is not `none`, each point also gets its improvement
/// over an uncontrolled run at the same parameter value.
pub fn sweep(text: &str, path: &Path, param: &str, values: &[String]) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let cfg = SimConfig::from_text_with(text, path, &[(param.to_string(), value.clone())])?;
        let mut result = run_scenario(&cfg)?;
        if cfg.scenario.controller != ControllerKind::None {
            let reference = run_with(&cfg, ControllerKind::None)?;
            result.summary = result.summary.with_baseline(&reference.summary);
        }
        points.push(SweepPoint {
            value: value.clone(),
            result,
        });
    }
    Ok(points)
}

/// Check that `param` is a known key without running anything.
pub fn check_param(param: &str, value: &str) -> Result<()> {
    ConfigBuilder::new().set(param, value).map(|_| ())
}

/// Write `<stem>.csv` and `<stem>_summary.txt` into `dir`.
pub fn write_run(dir: &Path, stem: &str, run: &RunResult) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let summary_path = dir.join(format!("{stem}_summary.txt"));
    let file = fs::File::create(&csv_path)?;
    write_csv(&run.records, std::io::BufWriter::new(file))?;
    fs::write(&summary_path, run.summary.to_text())?;
    Ok((csv_path, summary_path))
}

/// Tabular overview of several summaries.
pub fn summary_table(rows: &[(String, &RunSummary)]) -> String {
    let mut out = format!(
        "{:<24} {:>13} {:>12} {:>12} {:>8} {:>8} {:>9}\n",
        "run", "max|a_y| [g]", "improve [%]", "peak|Mz|", "slack", "osc", "unstable"
    );
    for (label, s) in rows {
        out.push_str(&format!(
            "{:<24} {:>13.6} {:>12} {:>12.1} {:>8} {:>8} {:>9}\n",
            label,
            s.max_abs_ay,
            s.improvement_pct.map_or_else(|| "-".into(), |v| format!("{v:.3}")),
            s.peak_abs_m_z,
            s.slack_steps,
            s.oscillation_events,
            s.unstable
        ));
    }
    out
}
