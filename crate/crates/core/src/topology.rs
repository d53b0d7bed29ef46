//! Fiber networks, demands, link constants and routing matrices.
//!
//! Undirected link `j` expands to directed ids `2j` (u -> v) and `2j + 1`
//! (v -> u). Nodes and links are numbered densely in file order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_KAPPA: f64 = 0.1;
pub const DEFAULT_PERIOD_T: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("duplicate link id {0}")]
    DuplicateLink(String),
    #[error("link {link} references unknown node {node}")]
    UnknownNode { link: String, node: String },
    #[error("link {0} is a self loop")]
    SelfLoop(String),
    #[error("links {0} and {1} join the same pair of nodes")]
    ParallelLinks(String, String),
    #[error("link {link}: {reason}")]
    BadPhysics { link: String, reason: String },
    #[error("demand {index}: {reason}")]
    BadDemand { index: usize, reason: String },
    #[error("infeasible demand {index}: {source_node} and {target} are disconnected")]
    InfeasibleDemand {
        index: usize,
        source_node: String,
        target: String,
    },
    #[error("routing for demand {demand}: {reason}")]
    InvalidRouting { demand: usize, reason: String },
}

/// Transmissivity `10^(-0.02 L)` of a fiber of length `L` km.
pub fn transmissivity(length_km: f64) -> f64 {
    10f64.powf(-0.02 * length_km)
}

/// Rate-fidelity trade-off constant `d = 3 kappa eta / (2 T)` in pairs per second.
pub fn compute_link_constant(length_km: f64, kappa: f64, period_t: f64) -> f64 {
    // kappa / T first: for the usual decimal inputs this is exact, so round
    // lengths give round constants (15.0 at 50 km rather than 15.000000000000002)
    1.5 * (kappa / period_t) * transmissivity(length_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPhysics {
    pub length_km: f64,
    pub kappa: f64,
    pub period_t: f64,
    pub eta: f64,
    pub d: f64,
}

impl LinkPhysics {
    pub fn new(length_km: f64, kappa: f64, period_t: f64) -> Result<Self, String> {
        if !(length_km >= 0.0 && length_km.is_finite()) {
            return Err(format!(
                "length {length_km} km must be finite and nonnegative"
            ));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(format!("kappa {kappa} outside (0, 1)"));
        }
        if !(period_t > 0.0 && period_t.is_finite()) {
            return Err(format!("period {period_t} s must be positive"));
        }
        Ok(Self {
            length_km,
            kappa,
            period_t,
            eta: transmissivity(length_km),
            d: compute_link_constant(length_km, kappa, period_t),
        })
    }

    /// Physics with default constants whose length reproduces the constant `d`
    /// (up to rounding). `d` must not exceed the zero-length value.
    pub fn with_rate(d: f64) -> Result<Self, String> {
        let d0 = compute_link_constant(0.0, DEFAULT_KAPPA, DEFAULT_PERIOD_T);
        if !(d > 0.0 && d <= d0) {
            return Err(format!("rate constant {d} outside (0, {d0}]"));
        }
        Self::new(50.0 * (d0 / d).log10(), DEFAULT_KAPPA, DEFAULT_PERIOD_T)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub u: usize,
    pub v: usize,
    pub physics: LinkPhysics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    /// Directed ids entering each node.
    pub incoming: Vec<Vec<usize>>,
    /// Directed ids leaving each node.
    pub outgoing: Vec<Vec<usize>>,
    adjacency: HashMap<(usize, usize), usize>,
}

#[derive(Debug, Deserialize)]
struct TopologyFile {
    nodes: Vec<NodeEntry>,
    links: Vec<LinkEntry>,
    #[serde(default)]
    defaults: Option<Defaults>,
}

#[derive(Debug, Deserialize)]
struct NodeEntry {
    id: String,
}

#[derive(Debug, Deserialize)]
struct LinkEntry {
    id: String,
    u: String,
    v: String,
    length_km: f64,
    kappa: Option<f64>,
    #[serde(rename = "period_T")]
    period_t: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct Defaults {
    kappa: Option<f64>,
    #[serde(rename = "period_T")]
    period_t: Option<f64>,
}

/// Values that replace the per-file defaults when set.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhysicsOverrides {
    pub kappa: Option<f64>,
    pub period_t: Option<f64>,
}

fn read(path: &Path) -> Result<String, TopologyError> {
    fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_topology(
    path: impl AsRef<Path>,
    overrides: PhysicsOverrides,
) -> Result<NetworkModel, TopologyError> {
    parse_topology(&read(path.as_ref())?, overrides)
}

pub fn parse_topology(
    text: &str,
    overrides: PhysicsOverrides,
) -> Result<NetworkModel, TopologyError> {
    let file: TopologyFile = serde_json::from_str(text)?;
    let defaults = file.defaults.as_ref();
    let default_kappa = overrides
        .kappa
        .or(defaults.and_then(|d| d.kappa))
        .unwrap_or(DEFAULT_KAPPA);
    let default_t = overrides
        .period_t
        .or(defaults.and_then(|d| d.period_t))
        .unwrap_or(DEFAULT_PERIOD_T);

    let mut index = HashMap::new();
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for n in &file.nodes {
        if index.insert(n.id.clone(), nodes.len()).is_some() {
            return Err(TopologyError::DuplicateNode(n.id.clone()));
        }
        nodes.push(n.id.clone());
    }
    let mut seen = HashSet::new();
    let mut links = Vec::with_capacity(file.links.len());
    for l in &file.links {
        if !seen.insert(l.id.clone()) {
            return Err(TopologyError::DuplicateLink(l.id.clone()));
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| TopologyError::UnknownNode {
                    link: l.id.clone(),
                    node: name.to_string(),
                })
        };
        let (u, v) = (lookup(&l.u)?, lookup(&l.v)?);
        let physics = LinkPhysics::new(
            l.length_km,
            l.kappa.unwrap_or(default_kappa),
            l.period_t.unwrap_or(default_t),
        )
        .map_err(|reason| TopologyError::BadPhysics {
            link: l.id.clone(),
            reason,
        })?;
        links.push(Link {
            id: l.id.clone(),
            u,
            v,
            physics,
        });
    }
    NetworkModel::new(nodes, links)
}

impl NetworkModel {
    pub fn new(nodes: Vec<String>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let n = nodes.len();
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        let mut adjacency = HashMap::new();
        for (j, link) in links.iter().enumerate() {
            for end in [link.u, link.v] {
                if end >= n {
                    return Err(TopologyError::UnknownNode {
                        link: link.id.clone(),
                        node: end.to_string(),
                    });
                }
            }
            if link.u == link.v {
                return Err(TopologyError::SelfLoop(link.id.clone()));
            }
            let key = (link.u.min(link.v), link.u.max(link.v));
            if let Some(&other) = adjacency.get(&key) {
                let other: usize = other;
                return Err(TopologyError::ParallelLinks(
                    links[other].id.clone(),
                    link.id.clone(),
                ));
            }
            adjacency.insert(key, j);
            outgoing[link.u].push(2 * j);
            incoming[link.v].push(2 * j);
            outgoing[link.v].push(2 * j + 1);
            incoming[link.u].push(2 * j + 1);
        }
        Ok(Self {
            nodes,
            links,
            incoming,
            outgoing,
            adjacency,
        })
    }

    /// Network with generated names and the given rate constants per edge.
    pub fn from_rates(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, TopologyError> {
        let nodes = (0..n).map(|i| format!("n{i}")).collect();
        let links = edges
            .iter()
            .enumerate()
            .map(|(j, &(u, v, d))| {
                let id = format!("e{j}");
                let physics =
                    LinkPhysics::with_rate(d).map_err(|reason| TopologyError::BadPhysics {
                        link: id.clone(),
                        reason,
                    })?;
                Ok(Link { id, u, v, physics })
            })
            .collect::<Result<Vec<_>, TopologyError>>()?;
        Self::new(nodes, links)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_arcs(&self) -> usize {
        2 * self.links.len()
    }

    pub fn d(&self, j: usize) -> f64 {
        self.links[j].physics.d
    }

    /// Both directed ids of undirected link `j`.
    pub fn arcs_of(j: usize) -> [usize; 2] {
        [2 * j, 2 * j + 1]
    }

    pub fn link_of_arc(arc: usize) -> usize {
        arc / 2
    }

    /// `(tail, head)` of a directed id.
    pub fn arc_ends(&self, arc: usize) -> (usize, usize) {
        let link = &self.links[arc / 2];
        if arc % 2 == 0 {
            (link.u, link.v)
        } else {
            (link.v, link.u)
        }
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.outgoing[v]
            .iter()
            .map(|&a| self.arc_ends(a).1)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// Copy with every rate constant multiplied by `factor`, realised by
    /// shortening the generation period so the physics stays consistent.
    pub fn scale_rates(&self, factor: f64) -> Result<Self, TopologyError> {
        let links =
            self.links
                .iter()
                .map(|l| {
                    let p = &l.physics;
                    let physics = LinkPhysics::new(p.length_km, p.kappa, p.period_t / factor)
                        .map_err(|reason| TopologyError::BadPhysics {
                            link: l.id.clone(),
                            reason,
                        })?;
                    Ok(Link {
                        physics,
                        ..l.clone()
                    })
                })
                .collect::<Result<Vec<_>, TopologyError>>()?;
        Self::new(self.nodes.clone(), links)
    }

    fn components(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Breadth-first hop distances from `s`.
    pub fn hop_distances(&self, s: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes()];
        dist[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap_or(0);
            for w in self.neighbors(v) {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub s: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandSet {
    pub demands: Vec<Demand>,
}

#[derive(Debug, Deserialize)]
struct DemandFile {
    demands: Vec<DemandEntry>,
}

#[derive(Debug, Deserialize)]
struct DemandEntry {
    s: String,
    t: String,
}

pub fn load_demands(
    path: impl AsRef<Path>,
    network: &NetworkModel,
) -> Result<DemandSet, TopologyError> {
    parse_demands(&read(path.as_ref())?, network)
}

pub fn parse_demands(text: &str, network: &NetworkModel) -> Result<DemandSet, TopologyError> {
    let file: DemandFile = serde_json::from_str(text)?;
    let mut demands = Vec::with_capacity(file.demands.len());
    for (index, e) in file.demands.iter().enumerate() {
        let find = |name: &str| {
            network
                .node_index(name)
                .ok_or_else(|| TopologyError::BadDemand {
                    index,
                    reason: format!("unknown node {name}"),
                })
        };
        demands.push(Demand {
            s: find(&e.s)?,
            t: find(&e.t)?,
        });
    }
    DemandSet::new(network, demands)
}

impl DemandSet {
    pub fn new(network: &NetworkModel, demands: Vec<Demand>) -> Result<Self, TopologyError> {
        if demands.is_empty() {
            return Err(TopologyError::BadDemand {
                index: 0,
                reason: "at least one demand is required".into(),
            });
        }
        for (index, d) in demands.iter().enumerate() {
            if d.s >= network.num_nodes() || d.t >= network.num_nodes() {
                return Err(TopologyError::BadDemand {
                    index,
                    reason: "endpoint outside the network".into(),
                });
            }
            if d.s == d.t {
                return Err(TopologyError::BadDemand {
                    index,
                    reason: "source equals destination".into(),
                });
            }
        }
        Ok(Self { demands })
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    /// The first `k` demands.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            demands: self.demands[..k.min(self.len())].to_vec(),
        }
    }
}

/// Old-to-new index maps produced by [`prune`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMap {
    pub nodes: Vec<Option<usize>>,
    pub links: Vec<Option<usize>>,
}

/// Drops nodes and links that cannot carry any demand.
///
/// Conservative: keeps the components that contain some demand's endpoints,
/// then repeatedly removes degree-one nodes that are not demand endpoints.
/// Never removes a link that lies on a simple path between demand endpoints.
pub fn prune(
    network: &NetworkModel,
    demands: &DemandSet,
) -> Result<(NetworkModel, DemandSet, PruneMap), TopologyError> {
    let comp = network.components();
    let mut keep = vec![false; network.num_nodes()];
    let mut endpoint = vec![false; network.num_nodes()];
    for (index, d) in demands.demands.iter().enumerate() {
        if comp[d.s] != comp[d.t] {
            return Err(TopologyError::InfeasibleDemand {
                index,
                source_node: network.nodes[d.s].clone(),
                target: network.nodes[d.t].clone(),
            });
        }
        endpoint[d.s] = true;
        endpoint[d.t] = true;
    }
    let live: HashSet<usize> = demands.demands.iter().map(|d| comp[d.s]).collect();
    for v in 0..network.num_nodes() {
        keep[v] = live.contains(&comp[v]);
    }
    let mut degree: Vec<usize> = (0..network.num_nodes())
        .map(|v| {
            if keep[v] {
                network.neighbors(v).len()
            } else {
                0
            }
        })
        .collect();
    let mut queue: VecDeque<usize> = (0..network.num_nodes())
        .filter(|&v| keep[v] && !endpoint[v] && degree[v] <= 1)
        .collect();
    while let Some(v) = queue.pop_front() {
        if !keep[v] {
            continue;
        }
        keep[v] = false;
        for w in network.neighbors(v) {
            if keep[w] {
                degree[w] -= 1;
                if !endpoint[w] && degree[w] <= 1 {
                    queue.push_back(w);
                }
            }
        }
    }

    let mut node_map = vec![None; network.num_nodes()];
    let mut nodes = Vec::new();
    for v in 0..network.num_nodes() {
        if keep[v] {
            node_map[v] = Some(nodes.len());
            nodes.push(network.nodes[v].clone());
        }
    }
    let mut link_map = vec![None; network.num_links()];
    let mut links = Vec::new();
    for (j, link) in network.links.iter().enumerate() {
        if let (Some(u), Some(v)) = (node_map[link.u], node_map[link.v]) {
            link_map[j] = Some(links.len());
            links.push(Link {
                u,
                v,
                ..link.clone()
            });
        }
    }
    let pruned = NetworkModel::new(nodes, links)?;
    let remapped = demands
        .demands
        .iter()
        .map(|d| Demand {
            s: node_map[d.s].expect("endpoints are kept"),
            t: node_map[d.t].expect("endpoints are kept"),
        })
        .collect();
    let demands = DemandSet::new(&pruned, remapped)?;
    Ok((
        pruned,
        demands,
        PruneMap {
            nodes: node_map,
            links: link_map,
        },
    ))
}

/// Minimum hop count of each demand.
pub fn shortest_hop_lengths(
    network: &NetworkModel,
    demands: &DemandSet,
) -> Result<Vec<usize>, TopologyError> {
    demands
        .demands
        .iter()
        .enumerate()
        .map(|(index, d)| {
            network.hop_distances(d.s)[d.t].ok_or_else(|| TopologyError::InfeasibleDemand {
                index,
                source_node: network.nodes[d.s].clone(),
                target: network.nodes[d.t].clone(),
            })
        })
        .collect()
}

/// A valid single-path routing: one simple path per demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMatrix {
    /// `entries[j][i]` is 1 when demand `i` uses link `j`.
    pub entries: Vec<Vec<u8>>,
    /// Node sequence of each demand's path, source first.
    pub paths: Vec<Vec<usize>>,
    /// Link sequence of each demand's path, in travel order.
    pub path_links: Vec<Vec<usize>>,
}

impl RoutingMatrix {
    pub fn num_demands(&self) -> usize {
        self.paths.len()
    }

    /// Builds the matrix from node sequences, checking every path.
    pub fn from_paths(
        network: &NetworkModel,
        demands: &DemandSet,
        paths: Vec<Vec<usize>>,
    ) -> Result<Self, TopologyError> {
        let l = network.num_links();
        let k = demands.len();
        if paths.len() != k {
            return Err(TopologyError::InvalidRouting {
                demand: paths.len().min(k),
                reason: format!("expected {k} paths, got {}", paths.len()),
            });
        }
        let mut entries = vec![vec![0u8; k]; l];
        let mut path_links = Vec::with_capacity(k);
        for (i, (path, d)) in paths.iter().zip(&demands.demands).enumerate() {
            let bad = |reason: &str| TopologyError::InvalidRouting {
                demand: i,
                reason: reason.to_string(),
            };
            if path.first() != Some(&d.s) || path.last() != Some(&d.t) {
                return Err(bad("wrong endpoints"));
            }
            let distinct: HashSet<_> = path.iter().collect();
            if distinct.len() != path.len() {
                return Err(bad("non-simple"));
            }
            let mut links = Vec::with_capacity(path.len() - 1);
            for w in path.windows(2) {
                let j = network
                    .link_between(w[0], w[1])
                    .ok_or_else(|| bad("consecutive nodes are not adjacent"))?;
                entries[j][i] = 1;
                links.push(j);
            }
            path_links.push(links);
        }
        Ok(Self {
            entries,
            paths,
            path_links,
        })
    }

    /// Number of routes on each link.
    pub fn link_loads(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|&a| usize::from(a)).sum())
            .collect()
    }
}

/// Accepts an `l x k` 0/1 matrix iff every column is the incidence vector of
/// a simple path between the demand's endpoints.
pub fn validate_routing(
    network: &NetworkModel,
    demands: &DemandSet,
    candidate: &[Vec<u8>],
) -> Result<RoutingMatrix, TopologyError> {
    let l = network.num_links();
    let k = demands.len();
    if candidate.len() != l || candidate.iter().any(|row| row.len() != k) {
        return Err(TopologyError::InvalidRouting {
            demand: 0,
            reason: format!("matrix must be {l} x {k}"),
        });
    }
    let mut paths = Vec::with_capacity(k);
    for (i, d) in demands.demands.iter().enumerate() {
        let bad = |reason: &str| TopologyError::InvalidRouting {
            demand: i,
            reason: reason.to_string(),
        };
        if (0..l).any(|j| candidate[j][i] > 1) {
            return Err(bad("entries must be 0 or 1"));
        }
        let chosen: Vec<usize> = (0..l).filter(|&j| candidate[j][i] == 1).collect();
        let mut degree = vec![0usize; network.num_nodes()];
        for &j in &chosen {
            degree[network.links[j].u] += 1;
            degree[network.links[j].v] += 1;
        }
        if degree[d.s] != 1 || degree[d.t] != 1 {
            if chosen.is_empty() || degree[d.s] == 0 || degree[d.t] == 0 {
                return Err(bad("endpoints not connected"));
            }
            return Err(bad("non-simple"));
        }
        if degree
            .iter()
            .enumerate()
            .any(|(v, &dv)| v != d.s && v != d.t && dv != 0 && dv != 2)
        {
            return Err(bad("non-simple"));
        }
        // walk from the source along unused chosen links
        let mut used = HashSet::new();
        let mut path = vec![d.s];
        let mut at = d.s;
        while at != d.t {
            let next = chosen.iter().find(|&&j| {
                !used.contains(&j) && (network.links[j].u == at || network.links[j].v == at)
            });
            let Some(&j) = next else {
                return Err(bad("endpoints not connected"));
            };
            used.insert(j);
            let link = &network.links[j];
            at = if link.u == at { link.v } else { link.u };
            path.push(at);
        }
        if used.len() != chosen.len() {
            return Err(bad("non-simple"));
        }
        paths.push(path);
    }
    RoutingMatrix::from_paths(network, demands, paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_constant_examples() {
        assert_eq!(compute_link_constant(50.0, 0.1, 1e-3), 15.0);
        assert_eq!(compute_link_constant(0.0, 0.1, 1e-3), 150.0);
        assert_eq!(compute_link_constant(100.0, 0.1, 1e-3), 1.5);
    }

    #[test]
    fn rate_roundtrip() {
        let p = LinkPhysics::with_rate(37.5).unwrap();
        assert!((p.d - 37.5).abs() < 1e-10);
        assert!(LinkPhysics::with_rate(151.0).is_err());
    }

    #[test]
    fn parallel_links_rejected() {
        let err = NetworkModel::from_rates(2, &[(0, 1, 10.0), (1, 0, 10.0)]).unwrap_err();
        assert!(matches!(err, TopologyError::ParallelLinks(..)));
    }

    #[test]
    fn directed_expansion_partitions_arcs() {
        let net = NetworkModel::from_rates(3, &[(0, 1, 10.0), (1, 2, 10.0), (0, 2, 10.0)]).unwrap();
        let mut inc: Vec<usize> = net.incoming.concat();
        let mut out: Vec<usize> = net.outgoing.concat();
        inc.sort_unstable();
        out.sort_unstable();
        assert_eq!(inc, (0..6).collect::<Vec<_>>());
        assert_eq!(out, (0..6).collect::<Vec<_>>());
        for a in 0..6 {
            let (t, h) = net.arc_ends(a);
            assert!(net.outgoing[t].contains(&a) && net.incoming[h].contains(&a));
        }
    }
}
