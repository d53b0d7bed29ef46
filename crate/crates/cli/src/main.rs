//! Experiment harness: incremental demand sweeps over every solver mode,
//! with CSV, JSON and SVG output.

mod chart;
mod modes;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use entroute::measures::{EnvelopeVariant, MeasureKind, Measures};
use entroute::topology::{load_demands, load_topology, PhysicsOverrides};
use serde::Serialize;

use crate::modes::{Mode, RunContext};
use crate::report::{ErrorRecord, Row, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Envelope {
    Hat,
    Breve,
}

impl From<Envelope> for EnvelopeVariant {
    fn from(e: Envelope) -> Self {
        match e {
            Envelope::Hat => EnvelopeVariant::Hat,
            Envelope::Breve => EnvelopeVariant::Breve,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "entroute",
    version,
    about = "Utility-optimal single-path entanglement routing experiments"
)]
pub struct Args {
    /// Topology JSON file.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Demand list JSON file; demands are taken in file order.
    #[arg(long)]
    pub demands: Option<PathBuf>,
    /// One measure for every demand, or a comma-separated list per demand.
    #[arg(long, default_value = "skf")]
    pub measure: String,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Modes run at every k by `--mode sweep`.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Mode::SWEEP_DEFAULT.to_vec())]
    pub modes: Vec<Mode>,
    /// Demand counts to evaluate; defaults to all demands (every prefix for a sweep).
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Seed of the randomized heuristics; required when one runs.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Relative optimality gap of the branch-and-bound.
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    /// Minimum rate on a used link; defaults to 1e-6 times the smallest link constant.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = entroute::measures::DEFAULT_PWL_POINTS)]
    pub pwl_points: usize,
    #[arg(long, value_enum, default_value_t = Envelope::Hat)]
    pub envelope: Envelope,
    /// Also solve the exact mode with the underestimator and report the bracket.
    #[arg(long)]
    pub bracket: bool,
    /// Replaces the file's default kappa.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Replaces the file's default period T in seconds.
    #[arg(long)]
    pub period_t: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Record wall-clock times; makes the output non-reproducible.
    #[arg(long)]
    pub timings: bool,
}

/// Per-demand measures for `count` demands.
fn parse_measures(list: &str, count: usize) -> Result<Measures> {
    let kinds: Vec<MeasureKind> = list
        .split(',')
        .map(|s| s.trim().parse::<MeasureKind>().map_err(anyhow::Error::msg))
        .collect::<Result<_>>()?;
    match kinds.len() {
        1 => Ok(Measures::uniform(kinds[0], count)),
        n if n >= count => Ok(Measures { kinds }.prefix(count)),
        n => bail!("{n} measures given for {count} demands"),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(args: &Args) -> Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    if args.mode == Mode::EnvelopeReport {
        let rows = modes::envelope_report(&args.out)?;
        report::write_rows(&args.out.join("results.csv"), &rows)?;
        return Ok(());
    }

    let (Some(topology), Some(demands)) = (&args.topology, &args.demands) else {
        bail!(
            "--topology and --demands are required for mode {}",
            args.mode
        );
    };
    let overrides = PhysicsOverrides {
        kappa: args.kappa,
        period_t: args.period_t,
    };
    let network = load_topology(topology, overrides)?;
    let demand_set = load_demands(demands, &network)?;
    let measures = parse_measures(&args.measure, demand_set.len())?;

    let modes: Vec<Mode> = if args.mode == Mode::Sweep {
        args.modes.clone()
    } else {
        vec![args.mode]
    };
    if modes.contains(&Mode::Sweep) || modes.contains(&Mode::EnvelopeReport) {
        bail!("--modes may only list solver modes");
    }
    if modes.iter().any(|m| m.randomized()) && args.seed.is_none() {
        bail!("--seed is required for the randomized heuristics");
    }
    let ks: Vec<usize> = match (&args.k[..], args.mode) {
        ([], Mode::Sweep) => (1..=demand_set.len()).collect(),
        ([], _) => vec![demand_set.len()],
        (ks, _) => ks.to_vec(),
    };
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > demand_set.len()) {
        bail!("k = {bad} outside 1..={}", demand_set.len());
    }

    let ctx = RunContext::new(args);
    let mut rows: Vec<Row> = Vec::new();
    let mut summary = Summary::new(args, topology, &network, demand_set.len(), &ks, &modes)?;
    for &k in &ks {
        let point = modes::run_k(
            &ctx,
            &network,
            &demand_set.prefix(k),
            &measures.prefix(k),
            k,
            &modes,
        )?;
        rows.extend(point.rows);
        summary.push(point.summary);
    }
    report::write_rows(&args.out.join("results.csv"), &rows)?;
    write_json(&args.out.join("summary.json"), &summary)?;
    fs::write(args.out.join("chart.svg"), chart::render(&summary))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = ErrorRecord::from_error(&e);
            let text = serde_json::to_string(&record)
                .unwrap_or_else(|_| format!("{{\"error\":{:?}}}", e.to_string()));
            eprintln!("{text}");
            if args.out.is_dir() {
                let _ = write_json(&args.out.join("error.json"), &record);
            }
            ExitCode::from(2)
        }
    }
}
