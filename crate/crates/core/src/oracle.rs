//! Brute-force ground truth: every simple path, every single-path routing.
//!
//! Deliberately naive. Each routing is scored by the fixed-routing allocation
//! solver and the best one wins; no pruning of any kind.

use rayon::prelude::*;
use thiserror::Error;

use crate::measures::{EnvelopeVariant, Measures};
use crate::qnum::{optimize_allocation, QnumError};
use crate::solution::RoutingSolution;
use crate::topology::{DemandSet, NetworkModel, RoutingMatrix, TopologyError};

pub const DEFAULT_MAX_ROUTINGS: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{product} routings exceed the limit of {limit}")]
    TooManyRoutings { product: u128, limit: u128 },
    #[error("demand {0} has no simple path")]
    NoPath(usize),
    #[error("path enumeration for demand {0} was truncated")]
    Truncated(usize),
    #[error("no routing admits an allocation with positive utility")]
    InfeasiblePositiveUtility,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Qnum(#[from] QnumError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEnumeration {
    /// Node sequences in lexicographic order.
    pub paths: Vec<Vec<usize>>,
    /// False when `max_paths` cut the enumeration short.
    pub complete: bool,
}

/// All simple `s`-`t` paths by depth-first search over neighbours in
/// increasing node order, which yields lexicographic order.
pub fn enumerate_simple_paths(
    network: &NetworkModel,
    s: usize,
    t: usize,
    max_paths: Option<usize>,
) -> PathEnumeration {
    let limit = max_paths.unwrap_or(usize::MAX);
    let mut out = PathEnumeration {
        paths: Vec::new(),
        complete: true,
    };
    if s == t {
        return out;
    }
    let neighbors: Vec<Vec<usize>> = (0..network.num_nodes())
        .map(|v| network.neighbors(v))
        .collect();
    let mut on_path = vec![false; network.num_nodes()];
    let mut path = vec![s];
    on_path[s] = true;
    fn dfs(
        at: usize,
        t: usize,
        neighbors: &[Vec<usize>],
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut PathEnumeration,
        limit: usize,
    ) {
        for &w in &neighbors[at] {
            if !out.complete {
                return;
            }
            if on_path[w] {
                continue;
            }
            if w == t {
                if out.paths.len() == limit {
                    out.complete = false;
                    return;
                }
                let mut p = path.clone();
                p.push(t);
                out.paths.push(p);
                continue;
            }
            on_path[w] = true;
            path.push(w);
            dfs(w, t, neighbors, on_path, path, out, limit);
            path.pop();
            on_path[w] = false;
        }
    }
    dfs(s, t, &neighbors, &mut on_path, &mut path, &mut out, limit);
    out
}

/// Simple paths of every demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteCatalog {
    pub per_demand: Vec<Vec<Vec<usize>>>,
}

impl RouteCatalog {
    pub fn build(
        network: &NetworkModel,
        demands: &DemandSet,
        max_paths: Option<usize>,
    ) -> Result<Self, OracleError> {
        let mut per_demand = Vec::with_capacity(demands.len());
        for (i, d) in demands.demands.iter().enumerate() {
            let e = enumerate_simple_paths(network, d.s, d.t, max_paths);
            if !e.complete {
                return Err(OracleError::Truncated(i));
            }
            if e.paths.is_empty() {
                return Err(OracleError::NoPath(i));
            }
            per_demand.push(e.paths);
        }
        Ok(Self { per_demand })
    }

    /// Total number of routes over all demands.
    pub fn num_routes(&self) -> usize {
        self.per_demand.iter().map(Vec::len).sum()
    }

    /// Number of single-path routings (product of per-demand path counts).
    pub fn routing_count(&self) -> u128 {
        self.per_demand.iter().map(|p| p.len() as u128).product()
    }

    /// Paths of routing number `index`; demand 0 is the most significant digit,
    /// so increasing indices follow lexicographic order of path indices.
    pub fn routing(&self, mut index: u128) -> Vec<Vec<usize>> {
        let mut choice = vec![0usize; self.per_demand.len()];
        for i in (0..self.per_demand.len()).rev() {
            let p = self.per_demand[i].len() as u128;
            choice[i] = (index % p) as usize;
            index /= p;
        }
        choice
            .iter()
            .enumerate()
            .map(|(i, &c)| self.per_demand[i][c].clone())
            .collect()
    }

    /// Link-by-route incidence matrix (`l x r`), routes ordered by demand.
    pub fn incidence(&self, network: &NetworkModel) -> Vec<Vec<u8>> {
        let mut a = vec![Vec::with_capacity(self.num_routes()); network.num_links()];
        for path in self.per_demand.iter().flatten() {
            let used: Vec<usize> = path
                .windows(2)
                .filter_map(|w| network.link_between(w[0], w[1]))
                .collect();
            for (j, row) in a.iter_mut().enumerate() {
                row.push(u8::from(used.contains(&j)));
            }
        }
        a
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best: RoutingSolution,
    pub routing_index: u128,
    pub routings: u128,
    /// Routings without an allocation of positive utility.
    pub infeasible: u128,
}

/// Exact maximiser over all single-path routings.
pub fn brute_force_optimum(
    network: &NetworkModel,
    demands: &DemandSet,
    measures: &Measures,
    variant: EnvelopeVariant,
    max_routings: u128,
) -> Result<OracleResult, OracleError> {
    let catalog = RouteCatalog::build(network, demands, None)?;
    let product = catalog.routing_count();
    if product > max_routings {
        return Err(OracleError::TooManyRoutings {
            product,
            limit: max_routings,
        });
    }
    let count = u64::try_from(product).expect("bounded by max_routings");
    let evaluate = |index: u128| -> Result<Option<f64>, OracleError> {
        let routing = RoutingMatrix::from_paths(network, demands, catalog.routing(index))?;
        match optimize_allocation(network, &routing, measures, variant) {
            Ok(a) => Ok(Some(a.log_utility)),
            Err(QnumError::InfeasiblePositiveUtility) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let scored: Vec<(u128, Option<f64>)> = (0..count)
        .into_par_iter()
        .map(|i| evaluate(u128::from(i)).map(|u| (u128::from(i), u)))
        .collect::<Result<_, _>>()?;
    let infeasible = scored.iter().filter(|s| s.1.is_none()).count() as u128;
    // strict comparison in index order keeps the lowest index among ties
    let mut best: Option<(u128, f64)> = None;
    for (i, u) in scored {
        if let Some(u) = u {
            if best.is_none_or(|b| u > b.1) {
                best = Some((i, u));
            }
        }
    }
    let (routing_index, _) = best.ok_or(OracleError::InfeasiblePositiveUtility)?;
    let routing = RoutingMatrix::from_paths(network, demands, catalog.routing(routing_index))?;
    let alloc = optimize_allocation(network, &routing, measures, variant)?;
    Ok(OracleResult {
        best: RoutingSolution::from_allocation(routing, alloc, measures, variant),
        routing_index,
        routings: product,
        infeasible,
    })
}
