//! Randomized-rounding heuristics and the congestion-based upper bound.
//!
//! Both heuristics turn a fractional flow into a distribution over simple
//! paths per demand, sample one path per demand, and score each sampled
//! routing with the fixed-routing allocation solver. They differ only in the
//! flow: relaxed indicators of the exact formulation (`rr`) or the optimal
//! flows of the min-congestion LP (`mc`).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use convexcore::{
    branch_and_bound, solve_relaxation, BnbConfig, BnbError, BnbResult, ConvexProgram, LinExpr,
    ProgramError, Sense, SolveOptions, SolveStatus, VarId,
};
use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::measures::{EnvelopeVariant, LogUtilityFn, MeasureError, Measures, DEFAULT_PWL_POINTS};
use crate::qnum::{optimize_allocation, QnumError};
use crate::routing_micp::{solve_relaxation_bound, MicpError, MicpOptions};
use crate::solution::RoutingSolution;
use crate::topology::{
    shortest_hop_lengths, DemandSet, NetworkModel, RoutingMatrix, TopologyError,
};

/// Flows below this are treated as zero by path stripping.
pub const FLOW_EPS: f64 = 1e-9;
/// Largest conservation defect path stripping tolerates.
pub const CONSERVATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("demand {demand}: flow conservation violated by {defect:e} at node {node}")]
    ConservationViolated {
        demand: usize,
        node: usize,
        defect: f64,
    },
    #[error("demand {demand}: source outflow is {outflow}, expected 1")]
    BadOutflow { demand: usize, outflow: f64 },
    #[error("min-congestion LP not solved: {0}")]
    CongestionLp(String),
    #[error("at least {ceil_c} demands must share a link but there are only {k}")]
    TooManyCongested { ceil_c: usize, k: usize },
    #[error("sample count must be positive")]
    NoSamples,
    #[error("measures given for {got} demands, expected {expected}")]
    MeasureCount { got: usize, expected: usize },
    #[error(transparent)]
    Micp(#[from] MicpError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Bnb(#[from] BnbError),
}

/// Highest number of routes over any single link.
pub fn max_congestion(routing: &RoutingMatrix) -> usize {
    routing.link_loads().into_iter().max().unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CongestionCertificate {
    /// Fractional optimum `c`.
    pub value: f64,
    /// Lower bound on the maximum congestion of any single-path routing.
    pub ceil_c: usize,
    /// `flows[i][a]` on directed link `a`, cleaned of interior-point noise.
    pub flows: Vec<Vec<f64>>,
}

/// Rounds the fractional congestion up, absorbing solver noise above an integer.
pub fn congestion_ceiling(value: f64) -> usize {
    ((value - 1e-6).ceil() as usize).max(1)
}

/// Min-congestion multicommodity flow: unit flow per demand, minimum over `c`
/// of the largest per-link total.
///
/// `c >= 1` is imposed: every single-path routing loads some link once, while
/// split flows alone could go lower.
pub fn min_congestion_lp(
    network: &NetworkModel,
    demands: &DemandSet,
    solve: &SolveOptions,
) -> Result<CongestionCertificate, HeuristicError> {
    shortest_hop_lengths(network, demands)?;
    let arcs = network.num_arcs();
    let mut p = ConvexProgram::new();
    let c = p.add_var("c", 1.0, f64::INFINITY);
    let mut f: Vec<Vec<VarId>> = Vec::with_capacity(demands.len());
    for (i, d) in demands.demands.iter().enumerate() {
        let fi: Vec<VarId> = (0..arcs)
            .map(|a| {
                let (tail, head) = network.arc_ends(a);
                let hi = if head == d.s || tail == d.t { 0.0 } else { 1.0 };
                p.add_var(format!("f[{i}][{a}]"), 0.0, hi)
            })
            .collect();
        for node in 0..network.num_nodes() {
            if node == d.t {
                continue;
            }
            let mut e = LinExpr::new();
            for &a in &network.outgoing[node] {
                e.add_term(fi[a], 1.0);
            }
            for &a in &network.incoming[node] {
                e.add_term(fi[a], -1.0);
            }
            let rhs = if node == d.s { 1.0 } else { 0.0 };
            p.add_constraint(e, Sense::Eq, rhs, format!("flow[{i}][{node}]"));
        }
        f.push(fi);
    }
    for j in 0..network.num_links() {
        let [a, b] = NetworkModel::arcs_of(j);
        let mut e = LinExpr::new().term(c, -1.0);
        for fi in &f {
            e.add_term(fi[a], 1.0);
            e.add_term(fi[b], 1.0);
        }
        p.add_constraint(e, Sense::Le, 0.0, format!("load[{j}]"));
    }
    p.set_objective(LinExpr::var(c));
    let res = solve_relaxation(&p, solve)?;
    if res.status != SolveStatus::Optimal {
        return Err(HeuristicError::CongestionLp(format!(
            "{:?}: {}",
            res.status, res.diagnostics
        )));
    }
    let flows: Vec<Vec<f64>> = f
        .iter()
        .map(|fi| {
            fi.iter()
                .map(|v| {
                    let x = res.values[v.0];
                    if x < FLOW_EPS {
                        0.0
                    } else {
                        x.min(1.0)
                    }
                })
                .collect()
        })
        .collect();
    let value = res.objective;
    Ok(CongestionCertificate {
        value,
        ceil_c: congestion_ceiling(value),
        flows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedPath {
    pub nodes: Vec<usize>,
    pub weight: f64,
}

/// Paths per demand with their sampling weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDistribution {
    pub per_demand: Vec<Vec<WeightedPath>>,
}

impl PathDistribution {
    pub fn from_flows(
        network: &NetworkModel,
        demands: &DemandSet,
        flows: &[Vec<f64>],
    ) -> Result<Self, HeuristicError> {
        let per_demand = demands
            .demands
            .iter()
            .enumerate()
            .map(|(i, d)| path_strip(network, i, d.s, d.t, &flows[i]))
            .collect::<Result<_, _>>()?;
        Ok(Self { per_demand })
    }

    /// Index of the path whose cumulative weight first exceeds `u` in `[0, 1)`.
    pub fn pick(&self, demand: usize, u: f64) -> usize {
        let paths = &self.per_demand[demand];
        let mut acc = 0.0;
        for (idx, p) in paths.iter().enumerate() {
            acc += p.weight;
            if u < acc {
                return idx;
            }
        }
        paths.len() - 1
    }

    /// Path choice of sample `sample`, one uniform draw per demand.
    ///
    /// Every `(seed, sample, demand)` triple owns a disjoint ChaCha8 block:
    /// the stream id is the sample index and the word position is
    /// `256 * demand`, so samples can be drawn in any order or in parallel.
    pub fn sample(&self, seed: u64, sample: u64) -> Vec<usize> {
        (0..self.per_demand.len())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(sample);
                rng.set_word_pos(256 * i as u128);
                let u: f64 = rng.random();
                self.pick(i, u)
            })
            .collect()
    }

    pub fn paths(&self, choice: &[usize]) -> Vec<Vec<usize>> {
        choice
            .iter()
            .enumerate()
            .map(|(i, &c)| self.per_demand[i][c].nodes.clone())
            .collect()
    }
}

/// Decomposes one demand's unit flow into weighted simple `s`-`t` paths.
///
/// Always follows the largest positive out-flow, ties to the lowest arc id.
/// Cycles met on the way and any residual circulation are dropped.
pub fn path_strip(
    network: &NetworkModel,
    demand: usize,
    s: usize,
    t: usize,
    flows: &[f64],
) -> Result<Vec<WeightedPath>, HeuristicError> {
    let mut f: Vec<f64> = flows
        .iter()
        .map(|&x| if x < FLOW_EPS { 0.0 } else { x })
        .collect();
    let net_out = |f: &[f64], v: usize| -> f64 {
        network.outgoing[v].iter().map(|&a| f[a]).sum::<f64>()
            - network.incoming[v].iter().map(|&a| f[a]).sum::<f64>()
    };
    for v in 0..network.num_nodes() {
        if v == s || v == t {
            continue;
        }
        let defect = net_out(&f, v).abs();
        if defect > CONSERVATION_TOL {
            return Err(HeuristicError::ConservationViolated {
                demand,
                node: v,
                defect,
            });
        }
    }
    let outflow = net_out(&f, s);
    if (outflow - 1.0).abs() > CONSERVATION_TOL {
        return Err(HeuristicError::BadOutflow { demand, outflow });
    }

    let mut found: Vec<WeightedPath> = Vec::new();
    let mut discarded = 0.0;
    let subtract = |f: &mut [f64], arcs: &[usize], amount: f64| {
        for &a in arcs {
            f[a] -= amount;
            if f[a] < FLOW_EPS {
                f[a] = 0.0;
            }
        }
    };
    while net_out(&f, s) >= FLOW_EPS {
        let mut arcs: Vec<usize> = Vec::new();
        let mut nodes = vec![s];
        let mut at = s;
        let mut stuck = false;
        while at != t {
            let mut best: Option<usize> = None;
            for &a in &network.outgoing[at] {
                if f[a] > 0.0 && best.is_none_or(|b| f[a] > f[b] || (f[a] == f[b] && a < b)) {
                    best = Some(a);
                }
            }
            let Some(a) = best else {
                stuck = true;
                break;
            };
            let next = network.arc_ends(a).1;
            if let Some(pos) = nodes.iter().position(|&v| v == next) {
                let cycle = &arcs[pos..];
                let amount = cycle
                    .iter()
                    .chain(std::iter::once(&a))
                    .map(|&c| f[c])
                    .fold(f64::INFINITY, f64::min);
                let mut cyc = cycle.to_vec();
                cyc.push(a);
                subtract(&mut f, &cyc, amount);
                discarded += amount;
                arcs.truncate(pos);
                nodes.truncate(pos + 1);
                at = next;
                continue;
            }
            arcs.push(a);
            nodes.push(next);
            at = next;
        }
        if arcs.is_empty() && stuck {
            // nothing positive leaves the source any more
            break;
        }
        let amount = arcs.iter().map(|&a| f[a]).fold(f64::INFINITY, f64::min);
        subtract(&mut f, &arcs, amount);
        if stuck {
            if amount > CONSERVATION_TOL {
                return Err(HeuristicError::ConservationViolated {
                    demand,
                    node: at,
                    defect: amount,
                });
            }
            discarded += amount;
            continue;
        }
        match found.iter_mut().find(|p| p.nodes == nodes) {
            Some(p) => p.weight += amount,
            None => found.push(WeightedPath {
                nodes,
                weight: amount,
            }),
        }
    }
    let residual: f64 = f.iter().sum();
    if residual + discarded > FLOW_EPS {
        debug!("demand {demand}: discarded circulation {discarded:e}, residual {residual:e}");
    }
    let total: f64 = found.iter().map(|p| p.weight).sum();
    if found.is_empty() || !(total > 0.0) {
        return Err(HeuristicError::BadOutflow {
            demand,
            outflow: total,
        });
    }
    for p in &mut found {
        p.weight /= total;
    }
    Ok(found)
}

#[derive(Debug, Clone)]
pub struct HeuristicConfig {
    pub samples: usize,
    pub seed: u64,
    pub variant: EnvelopeVariant,
    pub micp: MicpOptions,
    pub solve: SolveOptions,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            variant: EnvelopeVariant::Hat,
            micp: MicpOptions::default(),
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    pub index: usize,
    /// Index into the demand's path list, per demand.
    pub choice: Vec<usize>,
    /// `None` when no allocation with positive utility exists.
    pub log_utility: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HeuristicResult {
    pub distribution: PathDistribution,
    pub samples: Vec<SampleOutcome>,
    /// Best sample, ties to the lowest sample index.
    pub best: Option<RoutingSolution>,
    pub best_index: Option<usize>,
    pub best_log_utility: f64,
    /// Mean over feasible samples.
    pub mean_log_utility: Option<f64>,
    pub failures: usize,
    /// Time spent on the fractional flow (relaxation or LP).
    pub flow_time: Duration,
    pub total_time: Duration,
}

fn run_sampling(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    config: &HeuristicConfig,
    distribution: PathDistribution,
    flow_time: Duration,
    start: Instant,
) -> Result<HeuristicResult, HeuristicError> {
    if config.samples == 0 {
        return Err(HeuristicError::NoSamples);
    }
    let choices: Vec<Vec<usize>> = (0..config.samples)
        .into_par_iter()
        .map(|n| distribution.sample(config.seed, n as u64))
        .collect();
    // identical routings are scored once
    let unique: Vec<Vec<usize>> = choices
        .iter()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let scored: BTreeMap<Vec<usize>, Option<RoutingSolution>> = unique
        .into_par_iter()
        .map(|choice| {
            let routing = RoutingMatrix::from_paths(network, demands, distribution.paths(&choice))?;
            let sol = match optimize_allocation(network, &routing, measures, config.variant) {
                Ok(a) => Some(RoutingSolution::from_allocation(
                    routing,
                    a,
                    measures,
                    config.variant,
                )),
                Err(QnumError::InfeasiblePositiveUtility) => None,
                Err(e) => {
                    debug!("sample allocation failed: {e}");
                    None
                }
            };
            Ok((choice, sol))
        })
        .collect::<Result<_, TopologyError>>()?;

    let mut samples = Vec::with_capacity(config.samples);
    let mut best: Option<(usize, f64)> = None;
    let mut sum = 0.0;
    let mut feasible = 0usize;
    for (index, choice) in choices.into_iter().enumerate() {
        let log_utility = scored[&choice].as_ref().map(|s| s.log_utility);
        if let Some(u) = log_utility {
            sum += u;
            feasible += 1;
            if best.is_none_or(|b| u > b.1) {
                best = Some((index, u));
            }
        }
        samples.push(SampleOutcome {
            index,
            choice,
            log_utility,
        });
    }
    let best_solution = best.map(|(idx, _)| {
        scored[&samples[idx].choice]
            .clone()
            .expect("feasible sample")
    });
    Ok(HeuristicResult {
        distribution,
        best_index: best.map(|b| b.0),
        best_log_utility: best.map_or(f64::NEG_INFINITY, |b| b.1),
        mean_log_utility: (feasible > 0).then(|| sum / feasible as f64),
        failures: config.samples - feasible,
        samples,
        best: best_solution,
        flow_time,
        total_time: start.elapsed(),
    })
}

fn check_measures(demands: &DemandSet, measures: &Measures) -> Result<(), HeuristicError> {
    if measures.kinds.len() != demands.len() {
        return Err(HeuristicError::MeasureCount {
            got: measures.kinds.len(),
            expected: demands.len(),
        });
    }
    Ok(())
}

/// Samples routings from the relaxed indicators of the exact formulation.
pub fn rr_heuristic(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    config: &HeuristicConfig,
) -> Result<HeuristicResult, HeuristicError> {
    check_measures(demands, measures)?;
    let start = Instant::now();
    let relax = solve_relaxation_bound(
        network,
        demands,
        measures,
        config.variant,
        &config.micp,
        &config.solve,
    )?;
    let flow_time = start.elapsed();
    let distribution = PathDistribution::from_flows(network, demands, &relax.y)?;
    let out = run_sampling(
        network,
        demands,
        measures,
        config,
        distribution,
        flow_time,
        start,
    )?;
    info!(
        "rr heuristic: best {} mean {:?} failures {}",
        out.best_log_utility, out.mean_log_utility, out.failures
    );
    Ok(out)
}

/// Samples routings from the min-congestion LP flows.
pub fn mc_heuristic(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    config: &HeuristicConfig,
) -> Result<HeuristicResult, HeuristicError> {
    check_measures(demands, measures)?;
    let start = Instant::now();
    let cert = min_congestion_lp(network, demands, &config.solve)?;
    let flow_time = start.elapsed();
    let distribution = PathDistribution::from_flows(network, demands, &cert.flows)?;
    let out = run_sampling(
        network,
        demands,
        measures,
        config,
        distribution,
        flow_time,
        start,
    )?;
    info!(
        "mc heuristic: best {} mean {:?} failures {}",
        out.best_log_utility, out.mean_log_utility, out.failures
    );
    Ok(out)
}

/// Which product the bound uses for the links past the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum McUbVariant {
    /// `v_ij <= ln(1 - x_i / d_(j-1))` for `j >= 2`: a certified upper bound.
    #[default]
    Verbatim,
    /// Drops `d_(1)` from the product of congested demands. Not a valid bound
    /// in general: the congested link need not be the one with `d_(1)`.
    Tighter,
}

#[derive(Debug, Clone)]
pub struct McUbOptions {
    pub variant: McUbVariant,
    pub pwl_points: usize,
    pub bnb: BnbConfig,
}

impl Default for McUbOptions {
    fn default() -> Self {
        Self {
            variant: McUbVariant::Verbatim,
            pwl_points: DEFAULT_PWL_POINTS,
            bnb: BnbConfig::default(),
        }
    }
}

/// The `k`-binary program behind the congestion-based bound.
#[derive(Debug, Clone)]
pub struct McUbModel {
    pub program: ConvexProgram,
    pub x: Vec<VarId>,
    pub alpha: Vec<VarId>,
    pub eta: Vec<VarId>,
    pub s: VarId,
    pub delta: Vec<VarId>,
    pub zeta: Vec<VarId>,
    pub gamma: Vec<VarId>,
    pub v1: Vec<VarId>,
    pub z: Vec<VarId>,
    /// Rates are in units of the largest link constant.
    pub rate_unit: f64,
    pub hop_lengths: Vec<usize>,
}

/// Builds the bound's program; `ceil_c` demands are forced onto one link of capacity `d_(1)`.
pub fn build_mc_upper_bound(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    variant: EnvelopeVariant,
    ceil_c: usize,
    options: &McUbOptions,
) -> Result<McUbModel, HeuristicError> {
    check_measures(demands, measures)?;
    let k = demands.len();
    if ceil_c > k {
        return Err(HeuristicError::TooManyCongested { ceil_c, k });
    }
    let hops = shortest_hop_lengths(network, demands)?;
    let mut order: Vec<f64> = (0..network.num_links()).map(|j| network.d(j)).collect();
    order.sort_by(|a, b| b.total_cmp(a));
    let unit = order[0];
    // d_(j) for j = 1..l, scaled so that d_(1) = 1
    let d = |j: usize| order[j - 1] / unit;

    let mut p = ConvexProgram::new();
    let x: Vec<VarId> = (0..k)
        .map(|i| p.add_var(format!("x[{i}]"), 0.0, d(hops[i])))
        .collect();
    let alpha: Vec<VarId> = (0..k)
        .map(|i| p.add_binary(format!("alpha[{i}]")))
        .collect();
    let eta: Vec<VarId> = (0..k)
        .map(|i| p.add_var(format!("eta[{i}]"), 0.0, d(hops[i])))
        .collect();
    let s = p.add_var("S", 0.0, f64::INFINITY);
    let delta: Vec<VarId> = (0..k)
        .map(|i| p.add_var(format!("delta[{i}]"), 0.0, 1.0))
        .collect();
    let zeta: Vec<VarId> = (0..k)
        .map(|i| p.add_var(format!("zeta[{i}]"), 0.0, 1.0))
        .collect();
    let gamma: Vec<VarId> = (0..k)
        .map(|i| p.add_var(format!("gamma[{i}]"), 0.0, 1.0))
        .collect();
    let v1: Vec<VarId> = (0..k)
        .map(|i| p.add_var(format!("v[{i}][1]"), f64::NEG_INFINITY, 0.0))
        .collect();
    let mut funcs = Vec::with_capacity(k);
    for i in 0..k {
        funcs.push(LogUtilityFn::shared(
            *measures.model(i)?,
            variant,
            options.pwl_points,
        )?);
    }
    let z: Vec<VarId> = (0..k)
        .map(|i| {
            let (lo, hi) = funcs[i].domain();
            p.add_var(format!("z[{i}]"), lo, hi)
        })
        .collect();

    p.add_constraint(
        LinExpr::sum(alpha.iter().copied()),
        Sense::Eq,
        ceil_c as f64,
        "select",
    );
    let mut sdef = LinExpr::var(s);
    for i in 0..k {
        let cap = d(hops[i]);
        p.add_constraint(
            LinExpr::var(eta[i]).term(alpha[i], -cap),
            Sense::Le,
            0.0,
            format!("eta1[{i}]"),
        );
        p.add_constraint(
            LinExpr::var(eta[i]).term(x[i], -1.0),
            Sense::Le,
            0.0,
            format!("eta2[{i}]"),
        );
        // eta >= x - cap (1 - alpha)
        p.add_constraint(
            LinExpr::var(eta[i]).term(x[i], -1.0).term(alpha[i], -cap),
            Sense::Ge,
            -cap,
            format!("eta3[{i}]"),
        );
        sdef.add_term(eta[i], -1.0);
        p.add_constraint(
            LinExpr::var(delta[i]).term(s, -1.0).term(eta[i], 1.0),
            Sense::Eq,
            0.0,
            format!("delta_def[{i}]"),
        );
        p.add_constraint(
            LinExpr::var(zeta[i]).term(alpha[i], -1.0),
            Sense::Le,
            0.0,
            format!("zeta1[{i}]"),
        );
        p.add_constraint(
            LinExpr::var(zeta[i]).term(delta[i], -1.0),
            Sense::Le,
            0.0,
            format!("zeta2[{i}]"),
        );
        p.add_constraint(
            LinExpr::var(zeta[i])
                .term(delta[i], -1.0)
                .term(alpha[i], -1.0),
            Sense::Ge,
            -1.0,
            format!("zeta3[{i}]"),
        );
        p.add_constraint(
            LinExpr::var(gamma[i]).term(x[i], -1.0).term(zeta[i], -1.0),
            Sense::Eq,
            0.0,
            format!("gamma_def[{i}]"),
        );
        p.add_log_hypograph(v1[i], LinExpr::constant(1.0).term(gamma[i], -1.0));
        let mut zdef = LinExpr::var(z[i]).term(v1[i], -1.0);
        for j in 2..=hops[i] {
            let vij = p.add_aux_var(format!("v[{i}][{j}]"), f64::NEG_INFINITY, 0.0);
            let arg = match options.variant {
                McUbVariant::Verbatim => LinExpr::constant(1.0).term(x[i], -1.0 / d(j - 1)),
                // x - eta is the rate of an unselected demand, eta of a selected one
                McUbVariant::Tighter => LinExpr::constant(1.0)
                    .term(x[i], -1.0 / d(j - 1))
                    .term(eta[i], 1.0 / d(j - 1) - 1.0 / d(j)),
            };
            p.add_log_hypograph(vij, arg);
            zdef.add_term(vij, -1.0);
        }
        p.add_constraint(zdef, Sense::Eq, 0.0, format!("z_def[{i}]"));
    }
    p.add_constraint(sdef, Sense::Eq, 0.0, "S_def");

    let mut objective = LinExpr::constant(-(k as f64) * unit.ln());
    for i in 0..k {
        let w = p.add_aux_var(format!("lnx[{i}]"), f64::NEG_INFINITY, f64::INFINITY);
        p.add_log_hypograph(w, LinExpr::var(x[i]));
        let u = p.add_aux_var(format!("u[{i}]"), f64::NEG_INFINITY, f64::INFINITY);
        p.add_concave_hypograph(u, z[i], funcs[i].clone());
        objective.add_term(w, -1.0);
        objective.add_term(u, -1.0);
    }
    p.set_objective(objective);
    Ok(McUbModel {
        program: p,
        x,
        alpha,
        eta,
        s,
        delta,
        zeta,
        gamma,
        v1,
        z,
        rate_unit: unit,
        hop_lengths: hops,
    })
}

#[derive(Debug, Clone)]
pub struct McUpperBound {
    /// Upper bound on the log-utility of every single-path routing.
    pub bound: f64,
    pub ceil_c: usize,
    /// Per-demand rates at the bound's optimum.
    pub rates: Vec<f64>,
    pub selected: Vec<bool>,
    pub bnb: BnbResult,
}

/// Solves the congestion-based bound with `ceil_c` from [`min_congestion_lp`].
pub fn mc_upper_bound(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    variant: EnvelopeVariant,
    ceil_c: usize,
    options: &McUbOptions,
) -> Result<McUpperBound, HeuristicError> {
    let model = build_mc_upper_bound(network, demands, measures, variant, ceil_c, options)?;
    let bnb = branch_and_bound(&model.program, &options.bnb)?;
    // the certified value is the branch-and-bound's best bound, not the incumbent
    let bound = -bnb.best_bound;
    Ok(McUpperBound {
        bound,
        ceil_c,
        rates: model
            .x
            .iter()
            .map(|v| bnb.incumbent[v.0] * model.rate_unit)
            .collect(),
        selected: model
            .alpha
            .iter()
            .map(|v| bnb.incumbent[v.0] > 0.5)
            .collect(),
        bnb,
    })
}
