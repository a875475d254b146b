use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sideslip_mpc::harness::compare::{check_param, summary_table};
use sideslip_mpc::harness::{compare_controllers, sweep, write_run, ControllerKind, RunSummary, SimConfig};

#[derive(Parser, Debug)]
#[command(
    name = "sideslip-sim",
    version,
    about = "Closed-loop cornering scenarios with telemetry output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its CSV telemetry and summary.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override `scenario.controller`.
        #[arg(long)]
        controller: Option<ControllerKind>,
        /// Override `scenario.mu`.
        #[arg(long)]
        mu: Option<f64>,
        /// Override `sensor.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the uncontrolled, MPC and conventional variants of a scenario.
    Compare {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-run a scenario for each value of one parameter.
    Sweep {
        /// Scenario file; the built-in defaults are used when omitted.
        scenario: Option<PathBuf>,
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_set(items: &[String]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .with_context(|| format!("override `{item}` is not KEY=VALUE"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn read_scenario(path: Option<&Path>) -> Result<(String, PathBuf)> {
    match path {
        Some(p) => Ok((
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.to_path_buf(),
        )),
        None => Ok((String::new(), PathBuf::from("<defaults>"))),
    }
}

fn file_stem(cfg: &SimConfig) -> String {
    sanitize(&cfg.scenario.name)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            controller,
            mu,
            seed,
            set,
        } => {
            let (text, path) = read_scenario(Some(&scenario))?;
            let mut overrides = Vec::new();
            if let Some(c) = controller {
                overrides.push(("scenario.controller".to_string(), c.to_string()));
            }
            if let Some(mu) = mu {
                overrides.push(("scenario.mu".to_string(), mu.to_string()));
            }
            if let Some(seed) = seed {
                overrides.push(("sensor.seed".to_string(), seed.to_string()));
            }
            overrides.extend(parse_set(&set)?);
            let cfg = SimConfig::from_text_with(&text, &path, &overrides)?;
            let run = sideslip_mpc::harness::run_scenario(&cfg)?;
            let stem = format!("{}_{}", file_stem(&cfg), cfg.scenario.controller);
            let (csv, summary) = write_run(&out, &stem, &run)?;
            print!("{}", run.summary.to_text());
            eprintln!("wrote {} and {}", csv.display(), summary.display());
            if let Some(fault) = run.fault {
                eprintln!("run stopped early: {fault}");
            }
        }
        Command::Compare { scenario, out, set } => {
            let (text, path) = read_scenario(Some(&scenario))?;
            let cfg = SimConfig::from_text_with(&text, &path, &parse_set(&set)?)?;
            let cmp = compare_controllers(&cfg)?;
            let stem = file_stem(&cfg);
            let mut rows: Vec<(String, &RunSummary)> = Vec::new();
            for run in cmp.runs() {
                write_run(&out, &format!("{stem}_{}", run.summary.controller), run)?;
                rows.push((run.summary.controller.to_string(), &run.summary));
            }
            std::fs::write(out.join(format!("{stem}_compare.txt")), cmp.report())?;
            print!("{}", summary_table(&rows));
        }
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => {
            if values.is_empty() {
                bail!("--values needs at least one value");
            }
            check_param(&param, &values[0])?;
            let (text, path) = read_scenario(scenario.as_deref())?;
            let points = sweep(&text, &path, &param, &values)?;
            let mut rows: Vec<(String, &RunSummary)> = Vec::new();
            for p in &points {
                let stem = format!(
                    "{}_{}_{}",
                    sanitize(&p.result.summary.scenario),
                    param.replace('.', "-"),
                    p.value
                );
                write_run(&out, &stem, &p.result)?;
                rows.push((format!("{param}={}", p.value), &p.result.summary));
            }
            print!("{}", summary_table(&rows));
        }
    }
    Ok(())
}
