use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use entroute::heuristics::{
    mc_heuristic, mc_upper_bound, min_congestion_lp, rr_heuristic, HeuristicConfig,
    HeuristicResult, McUbOptions,
};
use entroute::measures::{envelope, eval_f, EnvelopeVariant, MeasureKind, Measures, Z_LO_OFFSET};
use entroute::oracle::{brute_force_optimum, DEFAULT_MAX_ROUTINGS};
use entroute::routing_micp::{
    exactness_certificate, solve_exact, solve_relaxation_bound, ExactConfig, ExactSolution,
    MicpOptions,
};
use entroute::topology::{prune, DemandSet, NetworkModel};
use entroute::RoutingSolution;
use serde::Serialize;

use crate::report::Row;
use crate::Args;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    RelaxUb,
    RrHeur,
    McHeur,
    McUb,
    Oracle,
    EnvelopeReport,
    Sweep,
}

impl Mode {
    pub const SWEEP_DEFAULT: [Mode; 5] = [
        Mode::Exact,
        Mode::RelaxUb,
        Mode::McUb,
        Mode::RrHeur,
        Mode::McHeur,
    ];

    pub fn randomized(self) -> bool {
        matches!(self, Mode::RrHeur | Mode::McHeur)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::RelaxUb => "relax-ub",
            Mode::RrHeur => "rr-heur",
            Mode::McHeur => "mc-heur",
            Mode::McUb => "mc-ub",
            Mode::Oracle => "oracle",
            Mode::EnvelopeReport => "envelope-report",
            Mode::Sweep => "sweep",
        }
    }

    fn is_upper_bound(self) -> bool {
        matches!(self, Mode::RelaxUb | Mode::McUb)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Relative tolerance for re-validating a reported log-utility.
const RECHECK_TOL: f64 = 1e-5;
/// Slack of the per-k ordering check, in log-utility.
const ORDER_TOL: f64 = 1e-6;

pub struct RunContext {
    variant: EnvelopeVariant,
    exact: ExactConfig,
    heuristic: HeuristicConfig,
    mc_ub: McUbOptions,
    seed: Option<u64>,
    bracket: bool,
    timings: bool,
}

impl RunContext {
    pub fn new(args: &Args) -> Self {
        let variant = EnvelopeVariant::from(args.envelope);
        let micp = MicpOptions {
            epsilon: args.epsilon,
            pwl_points: args.pwl_points,
            ..MicpOptions::default()
        };
        let mut exact = ExactConfig {
            variant,
            micp: micp.clone(),
            ..ExactConfig::default()
        };
        exact.bnb.rel_gap = args.gap;
        let mut mc_ub = McUbOptions {
            pwl_points: args.pwl_points,
            ..McUbOptions::default()
        };
        mc_ub.bnb.rel_gap = args.gap;
        Self {
            variant,
            heuristic: HeuristicConfig {
                samples: args.samples,
                seed: args.seed.unwrap_or(0),
                variant,
                micp,
                solve: exact.bnb.solve.clone(),
            },
            exact,
            mc_ub,
            seed: args.seed,
            bracket: args.bracket,
            timings: args.timings,
        }
    }
}

/// Results of one mode at one `k`.
#[derive(Debug, Clone, Serialize)]
pub struct ModePoint {
    /// The value plotted for the mode: optimum, bound or best sample.
    pub value: f64,
    pub stats: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KPoint {
    pub k: usize,
    /// Size of the network after pruning for the first `k` demands.
    pub nodes: usize,
    pub links: usize,
    pub modes: BTreeMap<Mode, ModePoint>,
    /// Upper bounds >= exact >= heuristics, when the modes needed are present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering_holds: Option<bool>,
}

pub struct KResult {
    pub rows: Vec<Row>,
    pub summary: KPoint,
}

/// Checks a reported solution against a recomputation from its own routing and rates.
fn recheck(network: &NetworkModel, what: &str, sol: &RoutingSolution) -> Result<()> {
    let Some(again) = sol.recompute(network) else {
        bail!("{what}: reported allocation is infeasible on recomputation");
    };
    let scale = again.abs().max(sol.log_utility.abs()).max(1.0);
    if (again - sol.log_utility).abs() > RECHECK_TOL * scale {
        bail!(
            "{what}: reported log-utility {} but recomputation gives {again}",
            sol.log_utility
        );
    }
    Ok(())
}

fn solution_stats(stats: &mut BTreeMap<String, f64>, sol: &RoutingSolution) {
    stats.insert("log_utility".into(), sol.log_utility);
    stats.insert("utility".into(), sol.utility());
    stats.insert("exact_log_utility".into(), sol.exact_log_utility);
}

fn heuristic_stats(
    stats: &mut BTreeMap<String, f64>,
    network: &NetworkModel,
    name: &str,
    h: &HeuristicResult,
) -> Result<f64> {
    if let Some(best) = &h.best {
        recheck(network, name, best)?;
        stats.insert("utility".into(), best.utility());
    }
    stats.insert("best".into(), h.best_log_utility);
    stats.insert(
        "mean".into(),
        h.mean_log_utility.unwrap_or(f64::NEG_INFINITY),
    );
    stats.insert("failures".into(), h.failures as f64);
    stats.insert(
        "distinct_paths".into(),
        h.distribution
            .per_demand
            .iter()
            .map(Vec::len)
            .sum::<usize>() as f64,
    );
    Ok(h.best_log_utility)
}

fn exact_stats(
    ctx: &RunContext,
    stats: &mut BTreeMap<String, f64>,
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
) -> Result<f64> {
    let sol: ExactSolution = solve_exact(network, demands, measures, &ctx.exact)?;
    recheck(network, "exact", &sol.solution)?;
    solution_stats(stats, &sol.solution);
    stats.insert("bound".into(), sol.bound);
    stats.insert("nodes".into(), sol.bnb.nodes as f64);
    stats.insert("unsolved_leaves".into(), sol.bnb.unsolved_leaves as f64);
    if ctx.bracket {
        let other = match ctx.variant {
            EnvelopeVariant::Hat => EnvelopeVariant::Breve,
            EnvelopeVariant::Breve => EnvelopeVariant::Hat,
        };
        let config = ExactConfig {
            variant: other,
            ..ctx.exact.clone()
        };
        let alt = solve_exact(network, demands, measures, &config)?;
        recheck(network, "exact (bracket)", &alt.solution)?;
        let (hat, breve) = match ctx.variant {
            EnvelopeVariant::Hat => (&sol, &alt),
            EnvelopeVariant::Breve => (&alt, &sol),
        };
        let certificate = exactness_certificate(&hat.solution, measures, 1e-9)?;
        let (uh, ub) = (hat.solution.log_utility, breve.solution.log_utility);
        let gap = if certificate { 0.0 } else { (uh - ub).max(0.0) };
        stats.insert("hat_log_utility".into(), uh);
        stats.insert("breve_log_utility".into(), ub);
        stats.insert("bracket".into(), gap);
        stats.insert(
            "relative_bracket".into(),
            gap / uh.abs().max(f64::MIN_POSITIVE),
        );
        stats.insert("certificate".into(), f64::from(u8::from(certificate)));
    }
    Ok(sol.solution.log_utility)
}

fn run_mode(
    ctx: &RunContext,
    mode: Mode,
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
) -> Result<ModePoint> {
    let start = Instant::now();
    let mut stats = BTreeMap::new();
    let value = match mode {
        Mode::Exact => exact_stats(ctx, &mut stats, network, demands, measures)?,
        Mode::RelaxUb => {
            let r = solve_relaxation_bound(
                network,
                demands,
                measures,
                ctx.variant,
                &ctx.exact.micp,
                &ctx.exact.bnb.solve,
            )?;
            stats.insert("bound".into(), r.bound);
            stats.insert("integral".into(), f64::from(u8::from(r.integral)));
            r.bound
        }
        Mode::McUb => {
            let cert = min_congestion_lp(network, demands, &ctx.exact.bnb.solve)?;
            let ub = mc_upper_bound(
                network,
                demands,
                measures,
                ctx.variant,
                cert.ceil_c,
                &ctx.mc_ub,
            )?;
            stats.insert("bound".into(), ub.bound);
            stats.insert("congestion".into(), cert.value);
            stats.insert("ceil_congestion".into(), cert.ceil_c as f64);
            ub.bound
        }
        Mode::RrHeur => {
            let h = rr_heuristic(network, demands, measures, &ctx.heuristic)?;
            heuristic_stats(&mut stats, network, "rr-heur", &h)?
        }
        Mode::McHeur => {
            let h = mc_heuristic(network, demands, measures, &ctx.heuristic)?;
            heuristic_stats(&mut stats, network, "mc-heur", &h)?
        }
        Mode::Oracle => {
            let o = brute_force_optimum(
                network,
                demands,
                measures,
                ctx.variant,
                DEFAULT_MAX_ROUTINGS,
            )?;
            recheck(network, "oracle", &o.best)?;
            solution_stats(&mut stats, &o.best);
            stats.insert("routings".into(), o.routings as f64);
            o.best.log_utility
        }
        Mode::EnvelopeReport | Mode::Sweep => bail!("{mode} is not a per-k solver mode"),
    };
    let elapsed = start.elapsed().as_millis();
    Ok(ModePoint {
        value,
        stats,
        wall_ms: ctx
            .timings
            .then(|| u64::try_from(elapsed).unwrap_or(u64::MAX)),
    })
}

/// Upper bounds >= optimum >= heuristic best >= heuristic mean.
fn ordering(modes: &BTreeMap<Mode, ModePoint>) -> Option<bool> {
    let optimum = modes
        .get(&Mode::Exact)
        .or_else(|| modes.get(&Mode::Oracle))
        .map(|p| p.value);
    let upper = modes
        .iter()
        .filter(|(m, _)| m.is_upper_bound())
        .map(|(_, p)| p.value)
        .reduce(f64::min);
    let heur: Vec<&ModePoint> = modes
        .iter()
        .filter(|(m, _)| m.randomized())
        .map(|(_, p)| p)
        .collect();
    let mut checked = false;
    let mut holds = true;
    for h in &heur {
        if let Some(mean) = h.stats.get("mean") {
            holds &= *mean <= h.value + 1e-12 * h.value.abs().max(1.0);
            checked = true;
        }
    }
    if let Some(opt) = optimum {
        for h in &heur {
            holds &= h.value <= opt + ORDER_TOL * opt.abs().max(1.0);
            checked = true;
        }
        if let Some(ub) = upper {
            holds &= opt <= ub + ORDER_TOL;
            checked = true;
        }
    } else if let Some(ub) = upper {
        for h in &heur {
            holds &= h.value <= ub + ORDER_TOL;
            checked = true;
        }
    }
    checked.then_some(holds)
}

/// Runs every mode on the first `k` demands.
pub fn run_k(
    ctx: &RunContext,
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    k: usize,
    modes: &[Mode],
) -> Result<KResult> {
    let (net, dem, _) = prune(network, demands)?;
    let mut points = BTreeMap::new();
    let mut rows = Vec::new();
    for &mode in modes {
        let point = run_mode(ctx, mode, &net, &dem, measures)
            .with_context(|| format!("mode {mode} at k = {k}"))?;
        let seed = if mode.randomized() { ctx.seed } else { None };
        for (stat, &value) in &point.stats {
            rows.push(Row {
                k,
                mode: mode.name().to_string(),
                stat: stat.clone(),
                value,
                seed,
                wall_ms: point.wall_ms,
            });
        }
        points.insert(mode, point);
    }
    let ordering_holds = ordering(&points);
    if ordering_holds == Some(false) {
        log::warn!("bound ordering violated at k = {k}");
    }
    Ok(KResult {
        rows,
        summary: KPoint {
            k,
            nodes: net.num_nodes(),
            links: net.num_links(),
            modes: points,
            ordering_holds,
        },
    })
}

const ENVELOPE_GRID: usize = 400;

/// Writes `envelope.csv` and `gaps.csv`; returns the gap rows for `results.csv`.
pub fn envelope_report(out: &Path) -> Result<Vec<Row>> {
    let mut curve = csv::Writer::from_path(out.join("envelope.csv"))?;
    curve.write_record(["measure", "z", "f", "f_hat", "f_breve"])?;
    let mut gaps = csv::Writer::from_path(out.join("gaps.csv"))?;
    gaps.write_record([
        "measure",
        "hat_minus_f",
        "hat_argmax",
        "f_minus_breve",
        "breve_argmax",
    ])?;
    let mut rows = Vec::new();
    for kind in MeasureKind::ALL {
        let model = envelope(kind)?;
        let lo = model.z_min + Z_LO_OFFSET;
        for i in 0..ENVELOPE_GRID {
            let z = lo * (1.0 - i as f64 / (ENVELOPE_GRID - 1) as f64);
            let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
            curve.write_record([
                kind.name().to_string(),
                z.to_string(),
                cell(eval_f(kind, z)),
                cell(model.value(EnvelopeVariant::Hat, z)),
                cell(model.value(EnvelopeVariant::Breve, z)),
            ])?;
        }
        let g = model.gaps();
        gaps.write_record([
            kind.name().to_string(),
            g.hat_minus_f.to_string(),
            g.hat_argmax.to_string(),
            g.f_minus_breve.to_string(),
            g.breve_argmax.to_string(),
        ])?;
        for (stat, value) in [
            ("hat_minus_f", g.hat_minus_f),
            ("f_minus_breve", g.f_minus_breve),
        ] {
            rows.push(Row {
                k: 0,
                mode: Mode::EnvelopeReport.name().to_string(),
                stat: format!("{}.{stat}", kind.name()),
                value,
                seed: None,
                wall_ms: None,
            });
        }
    }
    curve.flush()?;
    gaps.flush()?;
    Ok(rows)
}
