//! Best-bound branch-and-bound over the binary variables of a [`ConvexProgram`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::concave::CutPool;
use crate::error::BnbError;
use crate::program::{ConvexProgram, VarId};
use crate::solve::{solve_with_bounds, SolveOptions, SolveResult, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// Binary closest to 1/2, ties to the lowest variable id.
    MostFractional,
    /// Lowest-id fractional binary.
    FirstFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    /// Smallest relaxation bound first, ties by creation order.
    BestBound,
    /// Most recently created node first.
    DepthFirst,
}

#[derive(Debug, Clone)]
pub struct BnbConfig {
    pub rel_gap: f64,
    pub node_limit: usize,
    pub branching: Branching,
    pub node_selection: NodeSelection,
    /// Distance from 0/1 under which a relaxed binary counts as integral.
    pub int_tol: f64,
    /// Largest violation accepted for an incumbent by the independent checker.
    pub feas_tol: f64,
    pub solve: SolveOptions,
    /// Optional feasible starting point; ignored unless it passes the checker.
    pub incumbent_hint: Option<Vec<f64>>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            rel_gap: 1e-6,
            node_limit: 1_000_000,
            branching: Branching::MostFractional,
            node_selection: NodeSelection::BestBound,
            int_tol: 1e-6,
            feas_tol: 1e-7,
            solve: SolveOptions::default(),
            incumbent_hint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    Optimal,
    NodeLimit,
    /// The tree was exhausted, but some fully fixed leaves could not be
    /// solved by the backend; `best_bound` includes their parents' bounds.
    Uncertified,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: BnbStatus,
    pub incumbent: Vec<f64>,
    pub incumbent_objective: f64,
    pub best_bound: f64,
    pub rel_gap: f64,
    pub nodes: usize,
    pub wall_time: Duration,
    /// Global lower bound after each processed node.
    pub bound_trace: Vec<f64>,
    pub root_objective: f64,
    /// Leaves whose relaxation the backend could not solve; zero for a clean run.
    pub unsolved_leaves: usize,
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    values: Vec<f64>,
    depth_first: bool,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest element.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.depth_first {
            self.seq.cmp(&other.seq)
        } else {
            other
                .bound
                .total_cmp(&self.bound)
                .then_with(|| other.seq.cmp(&self.seq))
        }
    }
}

struct Search<'a> {
    program: &'a ConvexProgram,
    config: &'a BnbConfig,
    pool: CutPool,
    binaries: Vec<VarId>,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: usize,
    seq: usize,
    unsolved: usize,
    /// Lowest parent bound among unsolved leaves.
    unsolved_bound: f64,
}

enum Evaluated {
    Pruned,
    Integral,
    Open(Node),
}

impl Search<'_> {
    fn solve(&mut self, lower: &[f64], upper: &[f64]) -> SolveResult {
        self.nodes += 1;
        solve_with_bounds(
            self.program,
            lower,
            upper,
            &mut self.pool,
            &self.config.solve,
        )
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.0)
    }

    fn prunable(&self, bound: f64) -> bool {
        let inc = self.incumbent_value();
        inc.is_finite() && relative_gap(inc, bound) <= self.config.rel_gap
    }

    fn offer(&mut self, values: Vec<f64>) -> bool {
        if self.program.max_violation(&values) > self.config.feas_tol {
            debug!(
                "rejected candidate with violation {:e}",
                self.program.max_violation(&values)
            );
            return false;
        }
        let obj = self.program.objective_value(&values);
        if obj < self.incumbent_value() {
            debug!("new incumbent {obj} at node {}", self.nodes);
            self.incumbent = Some((obj, values));
            return true;
        }
        false
    }

    fn most_fractional(
        &self,
        values: &[f64],
        lower: &[f64],
        upper: &[f64],
        min_frac: f64,
    ) -> Option<VarId> {
        let mut best: Option<(f64, VarId)> = None;
        for &b in &self.binaries {
            if lower[b.0] == upper[b.0] {
                continue;
            }
            let v = values[b.0];
            let frac = v.min(1.0 - v).max(0.0);
            if frac <= min_frac {
                continue;
            }
            match self.config.branching {
                Branching::FirstFractional => return Some(b),
                Branching::MostFractional => {
                    // strict comparison keeps the lowest id on ties
                    if best.is_none_or(|(f, _)| frac > f) {
                        best = Some((frac, b));
                    }
                }
            }
        }
        best.map(|b| b.1)
    }

    /// Rounds an integral relaxation point, fixes the binaries and re-solves.
    /// Polishing is part of the node that produced the point and is not counted separately.
    fn polish(&mut self, values: &[f64], lower: &[f64], upper: &[f64]) -> bool {
        if self.binaries.iter().all(|b| lower[b.0] == upper[b.0]) {
            return self.offer(values.to_vec()) || self.resolve_fresh(lower, upper);
        }
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        for &b in &self.binaries {
            let r = values[b.0].round();
            lo[b.0] = r;
            hi[b.0] = r;
        }
        let res = solve_with_bounds(self.program, &lo, &hi, &mut self.pool, &self.config.solve);
        res.status == SolveStatus::Optimal
            && (self.offer(res.values) || self.resolve_fresh(&lo, &hi))
    }

    /// Second attempt at a fully fixed point the checker rejected: the shared
    /// pool can leave the backend at reduced accuracy, a fresh one usually not.
    fn resolve_fresh(&mut self, lower: &[f64], upper: &[f64]) -> bool {
        let mut local = CutPool::new();
        let res = solve_with_bounds(self.program, lower, upper, &mut local, &self.config.solve);
        res.status == SolveStatus::Optimal && self.offer(res.values)
    }

    fn evaluate(
        &mut self,
        res: SolveResult,
        parent_bound: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Evaluated {
        if res.status == SolveStatus::NumericalFailure {
            // an unsolved node may still hold the optimum: keep it with the
            // parent's bound and split it further
            if self.binaries.iter().all(|b| lower[b.0] == upper[b.0]) {
                warn!("fully fixed node left unsolved: {}", res.diagnostics);
                self.unsolved += 1;
                self.unsolved_bound = self.unsolved_bound.min(parent_bound);
                return Evaluated::Pruned;
            }
            debug!("numerical failure, branching blind: {}", res.diagnostics);
            let mut values = lower.clone();
            for b in &self.binaries {
                if lower[b.0] != upper[b.0] {
                    values[b.0] = 0.5;
                }
            }
            self.seq += 1;
            return Evaluated::Open(Node {
                bound: parent_bound,
                seq: self.seq,
                lower,
                upper,
                values,
                depth_first: self.config.node_selection == NodeSelection::DepthFirst,
            });
        }
        if res.status != SolveStatus::Optimal {
            return Evaluated::Pruned;
        }
        let bound = res.objective.max(parent_bound);
        if self.prunable(bound) {
            return Evaluated::Pruned;
        }
        let tol = self.config.int_tol;
        if self
            .most_fractional(&res.values, &lower, &upper, tol)
            .is_none()
        {
            if self.polish(&res.values, &lower, &upper) {
                return Evaluated::Integral;
            }
            // rounding failed the checker: keep branching on whatever is left
            if self
                .most_fractional(&res.values, &lower, &upper, 0.0)
                .is_none()
                && self.binaries.iter().all(|b| lower[b.0] == upper[b.0])
            {
                // nothing left to branch on, but the leaf may still hold the
                // optimum: its bound stays in the certificate
                warn!("fully fixed node rejected by the checker");
                self.unsolved += 1;
                self.unsolved_bound = self.unsolved_bound.min(bound);
                return Evaluated::Pruned;
            }
        }
        self.seq += 1;
        Evaluated::Open(Node {
            bound,
            seq: self.seq,
            lower,
            upper,
            values: res.values,
            depth_first: self.config.node_selection == NodeSelection::DepthFirst,
        })
    }
}

/// Minimises `program` over its binary variables.
pub fn branch_and_bound(
    program: &ConvexProgram,
    config: &BnbConfig,
) -> Result<BnbResult, BnbError> {
    program.validate()?;
    let start = Instant::now();
    let mut search = Search {
        program,
        config,
        pool: CutPool::new(),
        binaries: program.binaries().collect(),
        incumbent: None,
        nodes: 0,
        seq: 0,
        unsolved: 0,
        unsolved_bound: f64::INFINITY,
    };
    if let Some(hint) = &config.incumbent_hint {
        if hint.len() == program.num_vars() {
            search.offer(hint.clone());
        }
    }

    let lower: Vec<f64> = program.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = program.vars.iter().map(|v| v.upper).collect();
    let root = search.solve(&lower, &upper);
    match root.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(BnbError::RootInfeasible),
        SolveStatus::Unbounded => return Err(BnbError::RootUnbounded),
        SolveStatus::NumericalFailure => return Err(BnbError::Numerical(root.diagnostics)),
    }
    let root_objective = root.objective;

    let mut queue = BinaryHeap::new();
    if let Evaluated::Open(node) = search.evaluate(root, f64::NEG_INFINITY, lower, upper) {
        queue.push(node);
    }

    let mut bound_trace = Vec::new();
    let mut last_bound = f64::NEG_INFINITY;
    let global_bound =
        |queue: &BinaryHeap<Node>, inc: f64| queue.iter().map(|n| n.bound).fold(inc, f64::min);
    let mut status = BnbStatus::Optimal;
    loop {
        let lb = global_bound(&queue, search.incumbent_value()).max(last_bound);
        last_bound = lb;
        bound_trace.push(lb);
        let inc = search.incumbent_value();
        if queue.is_empty() || (inc.is_finite() && relative_gap(inc, lb) <= config.rel_gap) {
            break;
        }
        if search.nodes >= config.node_limit {
            status = BnbStatus::NodeLimit;
            break;
        }
        let node = queue.pop().expect("queue checked non-empty");
        if search.prunable(node.bound) {
            continue;
        }
        let Some(var) = search
            .most_fractional(&node.values, &node.lower, &node.upper, config.int_tol)
            .or_else(|| search.most_fractional(&node.values, &node.lower, &node.upper, 0.0))
            .or_else(|| {
                search
                    .binaries
                    .iter()
                    .copied()
                    .find(|b| node.lower[b.0] != node.upper[b.0])
            })
        else {
            continue;
        };
        for value in [0.0, 1.0] {
            let mut lo = node.lower.clone();
            let mut hi = node.upper.clone();
            lo[var.0] = value;
            hi[var.0] = value;
            let res = search.solve(&lo, &hi);
            if let Evaluated::Open(child) = search.evaluate(res, node.bound, lo, hi) {
                queue.push(child);
            }
        }
    }

    let Some((incumbent_objective, incumbent)) = search.incumbent.take() else {
        return Err(BnbError::NodeLimitWithoutIncumbent {
            nodes: search.nodes,
        });
    };
    let best_bound = if queue.is_empty() {
        incumbent_objective
    } else {
        global_bound(&queue, incumbent_objective)
            .max(last_bound)
            .min(incumbent_objective)
    }
    .min(search.unsolved_bound);
    if search.unsolved > 0 && status == BnbStatus::Optimal {
        status = BnbStatus::Uncertified;
    }
    let result = BnbResult {
        status,
        rel_gap: relative_gap(incumbent_objective, best_bound),
        incumbent,
        incumbent_objective,
        best_bound,
        nodes: search.nodes,
        wall_time: start.elapsed(),
        bound_trace,
        root_objective,
        unsolved_leaves: search.unsolved,
    };
    info!(
        "branch-and-bound {:?}: objective {} bound {} after {} nodes ({} cuts)",
        result.status,
        result.incumbent_objective,
        result.best_bound,
        result.nodes,
        search.pool.total()
    );
    Ok(result)
}
