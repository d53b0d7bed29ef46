//! Link-based mixed-integer convex formulation of single-path routing.
//!
//! Per demand `i` and directed link `a` (undirected link `j = a / 2`):
//!
//! * `x[i][a]` rate and `y[i][a]` binary indicator, `eps y <= x <= d_j y`;
//! * rate conservation at intermediate nodes and degree rows on `y` that
//!   leave exactly one path leaving the source and one entering the sink;
//! * `sigma_j = sum x / d_j`, `gamma[i][j] = y+ sigma_j` through its exact
//!   McCormick rows with `y+ = y[i][2j] + y[i][2j+1]`;
//! * `v[i][j] <= ln(1 - gamma[i][j])`, `z_i = sum_j v[i][j]`;
//! * objective `min sum_i lambda_i - sum_i u_i` with
//!   `lambda_i = sum_{a out of s_i} t[i][a]`, `t >= -y ln(x / y)` and
//!   `u_i <= G_i(z_i)`.
//!
//! Rates are expressed in units of the largest link constant so that the
//! conic solves see `O(1)` coefficients whatever the physical rate scale.

use std::sync::Arc;

use convexcore::{
    branch_and_bound, solve_relaxation, BnbConfig, BnbError, BnbResult, BnbStatus, ConcaveFn,
    ConvexProgram, LinExpr, ProgramError, Sense, SolveOptions, SolveStatus, VarId,
};
use log::{info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::measures::{
    eval_f, EnvelopeVariant, LogUtilityFn, MeasureError, Measures, DEFAULT_PWL_POINTS,
};
use crate::qnum::evaluate_allocation;
use crate::solution::RoutingSolution;
use crate::topology::{validate_routing, DemandSet, NetworkModel, RoutingMatrix, TopologyError};

#[derive(Debug, Error)]
pub enum MicpError {
    #[error("demand {0} has no link leaving its source or entering its destination")]
    StructurallyInfeasible(usize),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("measures given for {got} demands, expected {expected}")]
    MeasureCount { got: usize, expected: usize },
    #[error("demand {demand}: {reason}")]
    Extraction { demand: usize, reason: String },
    #[error("relaxation not solved: {0}")]
    Relaxation(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Bnb(#[from] BnbError),
}

/// Degree family kept in the continuous relaxation besides the flow rows on `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegreeFamily {
    Incoming,
    Outgoing,
}

#[derive(Debug, Clone)]
pub struct MicpOptions {
    /// Minimum rate on a used link; `None` means `1e-6 * min_j d_j`.
    pub epsilon: Option<f64>,
    /// Breakpoints of the chord model that seeds the hypograph cuts.
    pub pwl_points: usize,
    pub relaxation_degree: DegreeFamily,
}

impl Default for MicpOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            pwl_points: DEFAULT_PWL_POINTS,
            relaxation_degree: DegreeFamily::Incoming,
        }
    }
}

/// The program and the ids of its variables.
#[derive(Debug, Clone)]
pub struct MicpModel {
    pub program: ConvexProgram,
    /// `x[i][a]`, in units of `rate_unit`.
    pub x: Vec<Vec<VarId>>,
    pub y: Vec<Vec<VarId>>,
    pub sigma: Vec<VarId>,
    pub gamma: Vec<Vec<VarId>>,
    pub v: Vec<Vec<VarId>>,
    pub z: Vec<VarId>,
    pub lambda: Vec<VarId>,
    /// Perspective terms on the arcs leaving each source.
    pub t: Vec<Vec<(usize, VarId)>>,
    pub u: Vec<VarId>,
    pub rate_unit: f64,
    pub epsilon: f64,
    pub variant: EnvelopeVariant,
}

fn check_inputs(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
) -> Result<(), MicpError> {
    if measures.kinds.len() != demands.len() {
        return Err(MicpError::MeasureCount {
            got: measures.kinds.len(),
            expected: demands.len(),
        });
    }
    for (i, d) in demands.demands.iter().enumerate() {
        if network.outgoing[d.s].is_empty() || network.incoming[d.t].is_empty() {
            return Err(MicpError::StructurallyInfeasible(i));
        }
    }
    Ok(())
}

/// Builds the exact formulation with the chosen concave stand-in.
pub fn build_micp(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    variant: EnvelopeVariant,
    options: &MicpOptions,
) -> Result<MicpModel, MicpError> {
    check_inputs(network, demands, measures)?;
    let l = network.num_links();
    let k = demands.len();
    let d_min = (0..l).map(|j| network.d(j)).fold(f64::INFINITY, f64::min);
    let unit = (0..l).map(|j| network.d(j)).fold(0.0, f64::max);
    let epsilon = options.epsilon.unwrap_or(1e-6 * d_min);
    if !(epsilon > 0.0) {
        return Err(MicpError::BadEpsilon(epsilon));
    }
    let eps = epsilon / unit;
    let cap: Vec<f64> = (0..l).map(|j| network.d(j) / unit).collect();

    let mut p = ConvexProgram::new();
    let mut x = Vec::with_capacity(k);
    let mut y = Vec::with_capacity(k);
    for i in 0..k {
        let d = demands.demands[i];
        let mut xi = Vec::with_capacity(2 * l);
        let mut yi = Vec::with_capacity(2 * l);
        for a in 0..2 * l {
            let (tail, head) = network.arc_ends(a);
            // nothing enters the source or leaves the sink
            let closed = head == d.s || tail == d.t;
            let xv = p.add_var(
                format!("x[{i}][{a}]"),
                0.0,
                if closed { 0.0 } else { cap[a / 2] },
            );
            let yv = p.add_binary(format!("y[{i}][{a}]"));
            if closed {
                p.set_bounds(yv, 0.0, 0.0);
            }
            xi.push(xv);
            yi.push(yv);
        }
        x.push(xi);
        y.push(yi);
    }
    let sigma: Vec<VarId> = (0..l)
        .map(|j| p.add_var(format!("sigma[{j}]"), 0.0, 1.0))
        .collect();
    let mut gamma = Vec::with_capacity(k);
    let mut v = Vec::with_capacity(k);
    for i in 0..k {
        gamma.push(
            (0..l)
                .map(|j| p.add_var(format!("gamma[{i}][{j}]"), 0.0, 1.0))
                .collect::<Vec<_>>(),
        );
        v.push(
            (0..l)
                .map(|j| p.add_var(format!("v[{i}][{j}]"), f64::NEG_INFINITY, 0.0))
                .collect::<Vec<_>>(),
        );
    }
    let mut funcs: Vec<Arc<dyn ConcaveFn>> = Vec::with_capacity(k);
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

    for i in 0..k {
        let d = demands.demands[i];
        for a in 0..2 * l {
            let j = a / 2;
            p.add_constraint(
                LinExpr::var(x[i][a]).term(y[i][a], -cap[j]),
                Sense::Le,
                0.0,
                format!("gate_hi[{i}][{a}]"),
            );
            p.add_constraint(
                LinExpr::var(x[i][a]).term(y[i][a], -eps),
                Sense::Ge,
                0.0,
                format!("gate_lo[{i}][{a}]"),
            );
        }
        for node in 0..network.num_nodes() {
            let inc = &network.incoming[node];
            let out = &network.outgoing[node];
            if node != d.s && node != d.t {
                let mut e = LinExpr::new();
                for &a in inc {
                    e.add_term(x[i][a], 1.0);
                }
                for &a in out {
                    e.add_term(x[i][a], -1.0);
                }
                p.add_constraint(e, Sense::Eq, 0.0, format!("rate_flow[{i}][{node}]"));
            }
            if node != d.s && !inc.is_empty() {
                p.add_constraint(
                    LinExpr::sum(inc.iter().map(|&a| y[i][a])),
                    Sense::Le,
                    1.0,
                    format!("in_deg[{i}][{node}]"),
                );
            }
            if node != d.t && !out.is_empty() {
                p.add_constraint(
                    LinExpr::sum(out.iter().map(|&a| y[i][a])),
                    Sense::Le,
                    1.0,
                    format!("out_deg[{i}][{node}]"),
                );
            }
        }
        p.add_constraint(
            LinExpr::sum(network.outgoing[d.s].iter().map(|&a| y[i][a])),
            Sense::Eq,
            1.0,
            format!("leave_source[{i}]"),
        );
        p.add_constraint(
            LinExpr::sum(network.incoming[d.t].iter().map(|&a| y[i][a])),
            Sense::Eq,
            1.0,
            format!("enter_sink[{i}]"),
        );
        for j in 0..l {
            let [a, b] = NetworkModel::arcs_of(j);
            p.add_constraint(
                LinExpr::sum([y[i][a], y[i][b]]),
                Sense::Le,
                1.0,
                format!("one_way[{i}][{j}]"),
            );
        }
    }
    for j in 0..l {
        let [a, b] = NetworkModel::arcs_of(j);
        let mut e = LinExpr::new().term(sigma[j], -cap[j]);
        for xi in &x {
            e.add_term(xi[a], 1.0);
            e.add_term(xi[b], 1.0);
        }
        p.add_constraint(e, Sense::Eq, 0.0, format!("sigma_def[{j}]"));
    }
    for i in 0..k {
        let mut zsum = LinExpr::var(z[i]);
        for j in 0..l {
            let [a, b] = NetworkModel::arcs_of(j);
            let g = gamma[i][j];
            let y_plus = |e: LinExpr, c: f64| e.term(y[i][a], c).term(y[i][b], c);
            p.add_constraint(
                y_plus(LinExpr::var(g), -1.0),
                Sense::Le,
                0.0,
                format!("mc1[{i}][{j}]"),
            );
            p.add_constraint(
                LinExpr::var(g).term(sigma[j], -1.0),
                Sense::Le,
                0.0,
                format!("mc2[{i}][{j}]"),
            );
            // gamma >= sigma - (1 - y+)
            p.add_constraint(
                y_plus(LinExpr::var(g).term(sigma[j], -1.0), -1.0),
                Sense::Ge,
                -1.0,
                format!("mc3[{i}][{j}]"),
            );
            p.add_log_hypograph(v[i][j], LinExpr::constant(1.0).term(g, -1.0));
            zsum.add_term(v[i][j], -1.0);
        }
        p.add_constraint(zsum, Sense::Eq, 0.0, format!("z_def[{i}]"));
    }

    let mut lambda = Vec::with_capacity(k);
    let mut t = Vec::with_capacity(k);
    let mut u = Vec::with_capacity(k);
    let mut objective = LinExpr::constant(-(k as f64) * unit.ln());
    for i in 0..k {
        let s = demands.demands[i].s;
        let li = p.add_aux_var(format!("lambda[{i}]"), f64::NEG_INFINITY, f64::INFINITY);
        let mut def = LinExpr::var(li);
        let mut ti = Vec::new();
        for &a in &network.outgoing[s] {
            let tv = p.add_aux_var(format!("t[{i}][{a}]"), f64::NEG_INFINITY, f64::INFINITY);
            p.add_perspective_log(tv, x[i][a], y[i][a]);
            def.add_term(tv, -1.0);
            ti.push((a, tv));
        }
        p.add_constraint(def, Sense::Eq, 0.0, format!("lambda_def[{i}]"));
        let ui = p.add_aux_var(format!("u[{i}]"), f64::NEG_INFINITY, f64::INFINITY);
        p.add_concave_hypograph(ui, z[i], funcs[i].clone());
        objective.add_term(li, 1.0);
        objective.add_term(ui, -1.0);
        lambda.push(li);
        t.push(ti);
        u.push(ui);
    }
    p.set_objective(objective);

    Ok(MicpModel {
        program: p,
        x,
        y,
        sigma,
        gamma,
        v,
        z,
        lambda,
        t,
        u,
        rate_unit: unit,
        epsilon,
        variant,
    })
}

/// Continuous relaxation: binaries in `[0, 1]`, flow conservation on `y` at
/// intermediate nodes, and only one of the two degree families.
pub fn build_relaxation(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    variant: EnvelopeVariant,
    options: &MicpOptions,
) -> Result<MicpModel, MicpError> {
    let mut model = build_micp(network, demands, measures, variant, options)?;
    let dropped = match options.relaxation_degree {
        DegreeFamily::Incoming => "out_deg[",
        DegreeFamily::Outgoing => "in_deg[",
    };
    model
        .program
        .constraints
        .retain(|c| !c.label.starts_with(dropped));
    for i in 0..demands.len() {
        let d = demands.demands[i];
        for node in 0..network.num_nodes() {
            if node == d.s || node == d.t {
                continue;
            }
            let mut e = LinExpr::new();
            for &a in &network.incoming[node] {
                e.add_term(model.y[i][a], 1.0);
            }
            for &a in &network.outgoing[node] {
                e.add_term(model.y[i][a], -1.0);
            }
            model
                .program
                .add_constraint(e, Sense::Eq, 0.0, format!("indicator_flow[{i}][{node}]"));
        }
    }
    for yi in &model.y {
        for &yv in yi {
            model.program.relax_binary(yv);
        }
    }
    Ok(model)
}

impl MicpModel {
    /// Pins every indicator to the given routing.
    pub fn fix_routing(&mut self, network: &NetworkModel, routing: &RoutingMatrix) {
        for (i, path) in routing.paths.iter().enumerate() {
            let mut on = vec![false; self.y[i].len()];
            for w in path.windows(2) {
                let j = network.link_between(w[0], w[1]).expect("validated path");
                let a = if network.links[j].u == w[0] {
                    2 * j
                } else {
                    2 * j + 1
                };
                on[a] = true;
            }
            for (a, &yv) in self.y[i].iter().enumerate() {
                let val = if on[a] { 1.0 } else { 0.0 };
                self.program.set_bounds(yv, val, val);
            }
        }
    }

    /// Physical rate of demand `i`: the rate on the arc it takes out of the source.
    pub fn demand_rate(
        &self,
        network: &NetworkModel,
        demands: &DemandSet,
        values: &[f64],
        i: usize,
    ) -> f64 {
        let s = demands.demands[i].s;
        network.outgoing[s]
            .iter()
            .map(|&a| values[self.x[i][a].0])
            .fold(0.0, f64::max)
            * self.rate_unit
    }
}

/// Walks the unique active path of every demand in a binary-feasible point.
pub fn extract_routing(
    network: &NetworkModel,
    demands: &DemandSet,
    model: &MicpModel,
    values: &[f64],
) -> Result<RoutingMatrix, MicpError> {
    let k = demands.len();
    let mut entries = vec![vec![0u8; k]; network.num_links()];
    for (i, d) in demands.demands.iter().enumerate() {
        let fail = |reason: String| MicpError::Extraction { demand: i, reason };
        let active = |a: usize| values[model.y[i][a].0] > 0.5 && values[model.x[i][a].0] > 0.0;
        let mut at = d.s;
        let mut visited = vec![false; network.num_nodes()];
        visited[at] = true;
        while at != d.t {
            let next: Vec<usize> = network.outgoing[at]
                .iter()
                .copied()
                .filter(|&a| active(a))
                .collect();
            match next.as_slice() {
                [] => {
                    return Err(fail(format!(
                        "no allocation leaves node {}",
                        network.nodes[at]
                    )))
                }
                [a] => {
                    entries[a / 2][i] = 1;
                    at = network.arc_ends(*a).1;
                    if visited[at] {
                        return Err(fail(format!("path revisits node {}", network.nodes[at])));
                    }
                    visited[at] = true;
                }
                _ => return Err(fail(format!("flow splits at node {}", network.nodes[at]))),
            }
        }
    }
    Ok(validate_routing(network, demands, &entries)?)
}

#[derive(Debug, Clone)]
pub struct ExactConfig {
    pub variant: EnvelopeVariant,
    pub micp: MicpOptions,
    pub bnb: BnbConfig,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            variant: EnvelopeVariant::Hat,
            micp: MicpOptions::default(),
            bnb: BnbConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub solution: RoutingSolution,
    pub bnb: BnbResult,
    /// Upper bound on the log-utility from the branch-and-bound.
    pub bound: f64,
}

fn decode(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    model: &MicpModel,
    values: &[f64],
    log_utility: f64,
) -> Result<RoutingSolution, MicpError> {
    let routing = extract_routing(network, demands, model, values)?;
    let rates: Vec<f64> = (0..demands.len())
        .map(|i| model.demand_rate(network, demands, values, i))
        .collect();
    let models = (0..demands.len())
        .map(|i| measures.model(i))
        .collect::<Result<Vec<_>, _>>()?;
    // z is re-derived from the rates: the program only bounds it from above
    let (z, terms, exact) =
        match evaluate_allocation(network, &routing, &models, Some(model.variant), &rates) {
            Some((z, terms)) => {
                let exact = z
                    .iter()
                    .zip(&rates)
                    .zip(&models)
                    .map(|((&zi, &xi), m)| {
                        xi.ln() + eval_f(m.kind, zi).unwrap_or(f64::NEG_INFINITY)
                    })
                    .sum();
                (z, terms, exact)
            }
            None => {
                let z = model.z.iter().map(|v| values[v.0]).collect();
                (z, vec![f64::NEG_INFINITY; demands.len()], f64::NEG_INFINITY)
            }
        };
    Ok(RoutingSolution {
        paths: routing.paths.clone(),
        routing,
        rates,
        z,
        terms,
        log_utility,
        exact_log_utility: exact,
        kinds: measures.kinds.clone(),
        variant: model.variant,
    })
}

/// Solves the exact formulation by branch-and-bound.
pub fn solve_exact(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    config: &ExactConfig,
) -> Result<ExactSolution, MicpError> {
    let model = build_micp(network, demands, measures, config.variant, &config.micp)?;
    let bnb = branch_and_bound(&model.program, &config.bnb)?;
    if bnb.status != BnbStatus::Optimal {
        warn!(
            "exact ({}) finished {:?}: {} unsolved leaves, gap {:e}",
            config.variant, bnb.status, bnb.unsolved_leaves, bnb.rel_gap
        );
    }
    let solution = decode(
        network,
        demands,
        measures,
        &model,
        &bnb.incumbent,
        -bnb.incumbent_objective,
    )?;
    info!(
        "exact ({}) log-utility {} after {} nodes",
        config.variant, solution.log_utility, bnb.nodes
    );
    Ok(ExactSolution {
        solution,
        bound: -bnb.best_bound,
        bnb,
    })
}

/// Optimal value and point of the continuous relaxation.
#[derive(Debug, Clone)]
pub struct RelaxationResult {
    /// Upper bound on the log-utility of any single-path routing.
    pub bound: f64,
    /// Relaxed indicators `y[i][a]`.
    pub y: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub integral: bool,
}

pub fn solve_relaxation_bound(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    variant: EnvelopeVariant,
    options: &MicpOptions,
    solve: &SolveOptions,
) -> Result<RelaxationResult, MicpError> {
    let model = build_relaxation(network, demands, measures, variant, options)?;
    let res = solve_relaxation(&model.program, solve)?;
    if res.status != SolveStatus::Optimal {
        return Err(MicpError::Relaxation(format!(
            "{:?}: {}",
            res.status, res.diagnostics
        )));
    }
    let y: Vec<Vec<f64>> = model
        .y
        .iter()
        .map(|yi| yi.iter().map(|v| res.values[v.0]).collect())
        .collect();
    let integral = y.iter().flatten().all(|&v| v.min(1.0 - v) <= 1e-6);
    Ok(RelaxationResult {
        bound: -res.objective,
        y,
        values: res.values,
        integral,
    })
}

/// Over- and underestimator optima around the true single-path optimum.
#[derive(Debug, Clone, Serialize)]
pub struct Bracket {
    pub utility_hat: f64,
    pub utility_breve: f64,
    /// `utility_hat - utility_breve`, or 0 when the certificate fires.
    pub gap: f64,
    pub relative_gap: f64,
    /// Every demand's end-to-end `z` in the overestimator optimum lies where
    /// the envelope coincides with the exact log-measure.
    pub certificate: bool,
    #[serde(skip)]
    pub hat: Option<ExactSolution>,
    #[serde(skip)]
    pub breve: Option<ExactSolution>,
}

/// Whether every `z_i` of `solution` sits where the envelope equals `F`.
pub fn exactness_certificate(
    solution: &RoutingSolution,
    measures: &Measures,
    tol: f64,
) -> Result<bool, MicpError> {
    for (i, &zi) in solution.z.iter().enumerate() {
        if let Some(zh) = measures.model(i)?.z_hat() {
            if zi > zh + tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Runs the exact formulation with both stand-ins.
pub fn bracket_approximation_error(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    config: &ExactConfig,
) -> Result<Bracket, MicpError> {
    let hat = solve_exact(
        network,
        demands,
        measures,
        &ExactConfig {
            variant: EnvelopeVariant::Hat,
            ..config.clone()
        },
    )?;
    let breve = solve_exact(
        network,
        demands,
        measures,
        &ExactConfig {
            variant: EnvelopeVariant::Breve,
            ..config.clone()
        },
    )?;
    let certificate = exactness_certificate(&hat.solution, measures, 1e-9)?;
    let (uh, ub) = (hat.solution.log_utility, breve.solution.log_utility);
    let gap = if certificate { 0.0 } else { (uh - ub).max(0.0) };
    Ok(Bracket {
        utility_hat: uh,
        utility_breve: ub,
        gap,
        relative_gap: gap / uh.abs().max(f64::MIN_POSITIVE),
        certificate,
        hat: Some(hat),
        breve: Some(breve),
    })
}
