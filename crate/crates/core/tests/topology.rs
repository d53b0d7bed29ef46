use std::collections::HashSet;

use entroute::oracle::{enumerate_simple_paths, RouteCatalog};
use entroute::topology::{
    compute_link_constant, load_demands, load_topology, parse_topology, prune,
    shortest_hop_lengths, validate_routing, Demand, DemandSet, LinkPhysics, NetworkModel,
    PhysicsOverrides, TopologyError,
};
use proptest::prelude::*;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

fn demands(net: &NetworkModel, pairs: &[(usize, usize)]) -> DemandSet {
    DemandSet::new(net, pairs.iter().map(|&(s, t)| Demand { s, t }).collect()).unwrap()
}

#[test]
fn link_constant_examples() {
    assert!((compute_link_constant(50.0, 0.1, 1e-3) - 15.0).abs() < 1e-12);
    assert!((compute_link_constant(0.0, 0.1, 1e-3) - 150.0).abs() < 1e-12);
    assert!((compute_link_constant(100.0, 0.1, 1e-3) - 1.5).abs() < 1e-12);
    let p = LinkPhysics::new(0.0, 0.1, 1e-3).unwrap();
    assert_eq!(p.eta, 1.0);
    assert!(LinkPhysics::new(-1.0, 0.1, 1e-3).is_err());
    assert!(LinkPhysics::new(10.0, 1.0, 1e-3).is_err());
    assert!(LinkPhysics::new(10.0, 0.1, 0.0).is_err());
}

#[test]
fn triangle_file_loads() {
    let text = r#"{"nodes":[{"id":"A"},{"id":"B"},{"id":"C"}],
        "links":[{"id":"ab","u":"A","v":"B","length_km":50},
                 {"id":"bc","u":"B","v":"C","length_km":50},
                 {"id":"ca","u":"C","v":"A","length_km":50,"kappa":0.2}],
        "defaults":{"kappa":0.1,"period_T":0.001}}"#;
    let net = parse_topology(text, PhysicsOverrides::default()).unwrap();
    assert_eq!(
        (net.num_nodes(), net.num_links(), net.num_arcs()),
        (3, 3, 6)
    );
    assert!((net.d(0) - 15.0).abs() < 1e-12);
    assert!((net.d(2) - 30.0).abs() < 1e-12);
    let over = parse_topology(
        text,
        PhysicsOverrides {
            kappa: Some(0.05),
            period_t: None,
        },
    )
    .unwrap();
    // the override replaces the file default, not per-link values
    assert!((over.d(0) - 7.5).abs() < 1e-12);
    assert!((over.d(2) - 30.0).abs() < 1e-12);
    for l in &net.links {
        let p = &l.physics;
        assert_eq!(compute_link_constant(p.length_km, p.kappa, p.period_t), p.d);
    }
}

#[test]
fn malformed_files_are_rejected() {
    let dup = r#"{"nodes":[{"id":"A"},{"id":"B"}],
        "links":[{"id":"x","u":"A","v":"B","length_km":5},{"id":"x","u":"B","v":"A","length_km":5}]}"#;
    assert!(matches!(
        parse_topology(dup, PhysicsOverrides::default()),
        Err(TopologyError::DuplicateLink(_))
    ));
    let unknown = r#"{"nodes":[{"id":"A"}],"links":[{"id":"x","u":"A","v":"Z","length_km":5}]}"#;
    assert!(matches!(
        parse_topology(unknown, PhysicsOverrides::default()),
        Err(TopologyError::UnknownNode { .. })
    ));
    let kappa = r#"{"nodes":[{"id":"A"},{"id":"B"}],"links":[{"id":"x","u":"A","v":"B","length_km":5,"kappa":1.5}]}"#;
    assert!(matches!(
        parse_topology(kappa, PhysicsOverrides::default()),
        Err(TopologyError::BadPhysics { .. })
    ));
    assert!(parse_topology("{not json", PhysicsOverrides::default()).is_err());
}

#[test]
fn sample_topologies_load() {
    for (name, n, l) in [("bren", 10, 11), ("unic", 15, 17), ("arnes", 17, 20)] {
        let net =
            load_topology(format!("{DATA}/{name}.json"), PhysicsOverrides::default()).unwrap();
        assert_eq!(
            (net.num_nodes(), net.num_links(), net.num_arcs()),
            (n, l, 2 * l),
            "{name}"
        );
        let dem = load_demands(format!("{DATA}/{name}_demands.json"), &net).unwrap();
        assert!(shortest_hop_lengths(&net, &dem).is_ok());
    }
}

#[test]
fn directed_expansion_round_trip() {
    let net =
        NetworkModel::from_rates(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 1, 4.0)]).unwrap();
    let mut undirected = HashSet::new();
    for j in 0..net.num_links() {
        let [a, b] = NetworkModel::arcs_of(j);
        let (u, v) = net.arc_ends(a);
        assert_eq!(net.arc_ends(b), (v, u));
        undirected.insert((u.min(v), u.max(v)));
    }
    let expected: HashSet<_> = net
        .links
        .iter()
        .map(|l| (l.u.min(l.v), l.u.max(l.v)))
        .collect();
    assert_eq!(undirected, expected);
}

#[test]
fn prune_examples() {
    // isolated node 3
    let net = NetworkModel::from_rates(4, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let (p, _, map) = prune(&net, &demands(&net, &[(0, 2)])).unwrap();
    assert_eq!(p.num_nodes(), 3);
    assert_eq!(map.nodes[3], None);

    // path A-B-C unchanged
    let path = NetworkModel::from_rates(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let (p, d, _) = prune(&path, &demands(&path, &[(0, 2)])).unwrap();
    assert_eq!((p.num_nodes(), p.num_links()), (3, 2));
    assert_eq!(d.demands[0], Demand { s: 0, t: 2 });

    // pendant P (3) off B
    let pend = NetworkModel::from_rates(4, &[(0, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0)]).unwrap();
    let (p, _, map) = prune(&pend, &demands(&pend, &[(0, 2)])).unwrap();
    assert_eq!((p.num_nodes(), p.num_links()), (3, 2));
    assert_eq!(map.links[2], None);

    let split = NetworkModel::from_rates(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    assert!(matches!(
        prune(&split, &demands(&split, &[(0, 3)])),
        Err(TopologyError::InfeasibleDemand { index: 0, .. })
    ));
}

#[test]
fn hop_length_examples() {
    let tri = NetworkModel::from_rates(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    assert_eq!(
        shortest_hop_lengths(&tri, &demands(&tri, &[(0, 1)])).unwrap(),
        vec![1]
    );
    let path = NetworkModel::from_rates(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
    assert_eq!(
        shortest_hop_lengths(&path, &demands(&path, &[(0, 3)])).unwrap(),
        vec![3]
    );
    let chord = NetworkModel::from_rates(
        4,
        &[
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 0, 1.0),
            (1, 3, 1.0),
        ],
    )
    .unwrap();
    let dem = demands(&chord, &[(0, 2)]);
    let min = enumerate_simple_paths(&chord, 0, 2, None)
        .paths
        .iter()
        .map(|p| p.len() - 1)
        .min();
    assert_eq!(
        shortest_hop_lengths(&chord, &dem).unwrap(),
        vec![min.unwrap()]
    );
}

#[test]
fn validate_routing_examples() {
    // A-B-C-D-E with a triangle C-F-G hanging off C
    let net = NetworkModel::from_rates(
        7,
        &[
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 4, 1.0),
            (2, 5, 1.0),
            (5, 6, 1.0),
            (6, 2, 1.0),
        ],
    )
    .unwrap();
    let dem = demands(&net, &[(0, 2)]);
    let col = |on: &[usize]| {
        (0..net.num_links())
            .map(|j| vec![u8::from(on.contains(&j))])
            .collect::<Vec<_>>()
    };
    let ok = validate_routing(&net, &dem, &col(&[0, 1])).unwrap();
    assert_eq!(ok.paths[0], vec![0, 1, 2]);
    let reason = |on: &[usize]| match validate_routing(&net, &dem, &col(on)) {
        Err(TopologyError::InvalidRouting { reason, .. }) => reason,
        other => panic!("{other:?}"),
    };
    assert_eq!(reason(&[0, 1, 4, 5, 6]), "non-simple");
    assert_eq!(reason(&[]), "endpoints not connected");
}

/// Connected graph on `n` nodes from a parent list plus extra links.
fn random_graph(n: usize, parents: &[usize], extra: &[(usize, usize)]) -> NetworkModel {
    let mut edges: Vec<(usize, usize, f64)> = (1..n)
        .map(|v| (parents[v - 1] % v, v, 1.0 + v as f64))
        .collect();
    for &(a, b) in extra {
        let (a, b) = (a % n, b % n);
        if a != b
            && !edges
                .iter()
                .any(|e| (e.0 == a && e.1 == b) || (e.0 == b && e.1 == a))
        {
            edges.push((a, b, 3.0));
        }
    }
    NetworkModel::from_rates(n, &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Every 0/1 column is accepted exactly when it is the incidence vector of an enumerated path.
    #[test]
    fn validate_accepts_exactly_enumerated_paths(
        n in 2usize..8,
        parents in proptest::collection::vec(0usize..100, 7),
        extra in proptest::collection::vec((0usize..8, 0usize..8), 0..4),
        s in 0usize..8,
        t in 0usize..8,
    ) {
        let net = random_graph(n, &parents, &extra);
        let (s, t) = (s % n, t % n);
        prop_assume!(s != t);
        let dem = demands(&net, &[(s, t)]);
        let l = net.num_links();
        prop_assume!(l <= 12);
        let valid: HashSet<Vec<u8>> = enumerate_simple_paths(&net, s, t, None)
            .paths
            .iter()
            .map(|p| {
                let mut c = vec![0u8; l];
                for w in p.windows(2) {
                    c[net.link_between(w[0], w[1]).unwrap()] = 1;
                }
                c
            })
            .collect();
        for mask in 0u32..(1 << l) {
            let c: Vec<u8> = (0..l).map(|j| ((mask >> j) & 1) as u8).collect();
            let m: Vec<Vec<u8>> = c.iter().map(|&b| vec![b]).collect();
            prop_assert_eq!(validate_routing(&net, &dem, &m).is_ok(), valid.contains(&c));
        }
        // any single flip of a valid column is rejected
        for c in &valid {
            for j in 0..l {
                let m: Vec<Vec<u8>> = c.iter().enumerate().map(|(x, &b)| vec![if x == j { 1 - b } else { b }]).collect();
                prop_assert!(validate_routing(&net, &dem, &m).is_err());
            }
        }
    }

    #[test]
    fn prune_keeps_every_enumerated_link(
        n in 3usize..8,
        parents in proptest::collection::vec(0usize..100, 7),
        extra in proptest::collection::vec((0usize..8, 0usize..8), 0..4),
        pairs in proptest::collection::vec((0usize..8, 0usize..8), 1..3),
    ) {
        let net = random_graph(n, &parents, &extra);
        let pairs: Vec<_> = pairs.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
        prop_assume!(!pairs.is_empty());
        let dem = demands(&net, &pairs);
        let (_, _, map) = prune(&net, &dem).unwrap();
        let catalog = RouteCatalog::build(&net, &dem, None).unwrap();
        for p in catalog.per_demand.iter().flatten() {
            for w in p.windows(2) {
                prop_assert!(map.links[net.link_between(w[0], w[1]).unwrap()].is_some());
            }
        }
    }
}
