use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use firetrack_core::fire::ScenarioCase;
use firetrack_core::qos::{service_time, BoundConvention, BoundInputs};
use firetrack_sim::config::{ConfigError, ScenarioConfig};
use firetrack_sim::experiments::{run_experiment, Experiment, ExperimentOptions, ALTITUDE, HALF_ANGLE};
use firetrack_sim::plot::{line_chart, Series};
use firetrack_sim::scenario::{run_scenario, MetricsRecord};

const EXIT_VALIDATION: u8 = 2;
const EXIT_INSUFFICIENT: u8 = 3;

#[derive(Parser)]
#[command(name = "firetrack", version, about = "Multi-UAV wildfire tracking simulator")]
struct Cli {
    /// Overrides the seed of the config or experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiment grids.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics.csv, summary.json and plans.jsonl.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write plot.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Run a named experiment grid.
    Experiment {
        name: String,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Skip the SVG plot.
        #[arg(long)]
        no_plot: bool,
    },
    /// Print the service-time bound for one subgraph.
    Bounds {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        case: u8,
        /// Spanning-tree weight of the subgraph.
        #[arg(long)]
        path_len: f64,
        #[arg(long)]
        v: f64,
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        nq: usize,
        /// Footprint width; defaults to the standard camera at the standard altitude.
        #[arg(long)]
        fov: Option<f64>,
        /// Use the per-case formulas as printed instead of the combined horizon.
        #[arg(long)]
        literal: bool,
    },
}

enum Failure {
    Validation(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_run(dir: &Path, rec: &MetricsRecord, plot: bool) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "metrics.csv", &rec.to_csv())?;
    write(dir, "summary.json", &serde_json::to_vec_pretty(&rec.summary)?)?;
    let mut plans = Vec::new();
    for p in &rec.plans {
        serde_json::to_writer(&mut plans, p)?;
        plans.push(b'\n');
    }
    write(dir, "plans.jsonl", &plans)?;
    if plot {
        let series = [
            Series { label: "coverage residual".into(), points: rec.rows.iter().map(|r| (r.time as f64, r.coverage_residual)).collect() },
            Series {
                label: "measurement uncertainty".into(),
                points: rec.rows.iter().map(|r| (r.time as f64, r.measurement_uncertainty)).collect(),
            },
        ];
        write(dir, "plot.svg", line_chart("Scenario", "step", "value", &series).as_bytes())?;
    }
    Ok(())
}

fn simulate(config: &Path, out: &Path, plot: bool, seed: Option<u64>) -> Result<bool, Failure> {
    let mut cfg = ScenarioConfig::load(config).map_err(|e| match e {
        ConfigError::Io(_) => Failure::Other(anyhow::Error::new(e)),
        other => Failure::Validation(other.to_string()),
    })?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    let rec = run_scenario(&cfg).map_err(|e| Failure::Validation(e.to_string()))?;
    write_run(out, &rec, plot)?;
    if let Some(t) = rec.summary.first_insufficient {
        log::warn!("not enough UAVs from step {t} ({} rounds)", rec.summary.insufficient_rounds);
    }
    Ok(rec.insufficient())
}

fn experiment(name: &str, seeds: Option<usize>, out: &Path, plot: bool, cli: &Cli) -> Result<bool, Failure> {
    let e: Experiment = name.parse().map_err(|e: firetrack_sim::experiments::UnknownExperiment| Failure::Validation(e.to_string()))?;
    if seeds == Some(0) {
        return Err(Failure::Validation("--seeds must be at least 1".into()));
    }
    let mut opts = ExperimentOptions { seeds, workers: cli.workers.max(1), ..ExperimentOptions::default() };
    if let Some(s) = cli.seed {
        opts.base_seed = s;
    }
    let report = run_experiment(e, &opts);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, &format!("{}_trials.csv", report.name), &report.trials_csv)?;
    write(out, &format!("{}_summary.json", report.name), &serde_json::to_vec_pretty(&report.summary).map_err(anyhow::Error::new)?)?;
    if plot {
        write(out, &format!("{}.svg", report.name), report.svg.as_bytes())?;
    }
    println!("{}", serde_json::to_string_pretty(&report.summary).map_err(anyhow::Error::new)?);
    Ok(report.insufficient)
}

fn bounds(case: u8, path_len: f64, v: f64, zeta: f64, nq: usize, fov: Option<f64>, literal: bool) -> Result<bool, Failure> {
    let mut issues = Vec::new();
    if !(path_len.is_finite() && path_len >= 0.0) {
        issues.push("--path-len must be finite and non-negative");
    }
    if !(v.is_finite() && v > 0.0) {
        issues.push("--v must be positive");
    }
    if !(zeta.is_finite() && zeta >= 0.0) {
        issues.push("--zeta must be finite and non-negative");
    }
    if nq == 0 {
        issues.push("--nq must be at least 1");
    }
    let fov = fov.unwrap_or(2.0 * ALTITUDE * HALF_ANGLE.tan());
    if !(fov.is_finite() && fov > 0.0) {
        issues.push("--fov must be positive");
    }
    if !issues.is_empty() {
        return Err(Failure::Validation(issues.join("; ")));
    }
    let case = ScenarioCase::from_index(case as usize).expect("range checked by the parser");
    let convention = if literal { BoundConvention::Literal } else { BoundConvention::Combined };
    let t = service_time(case, &BoundInputs { path_len, v_max: v, zeta, n_q: nq, fov }, convention);
    match t.value() {
        Some(t) => println!("t_ub={t}\nfeasible=true"),
        None => println!("t_ub=inf\nfeasible=false"),
    }
    Ok(false)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, plot } => simulate(config, out, *plot, cli.seed),
        Command::Experiment { name, seeds, out, no_plot } => experiment(name, *seeds, out, !no_plot, &cli),
        Command::Bounds { case, path_len, v, zeta, nq, fov, literal } => bounds(*case, *path_len, *v, *zeta, *nq, *fov, *literal),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_INSUFFICIENT),
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
