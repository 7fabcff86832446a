mod support;

use proptest::prelude::*;
use support::{brute_betweenness, random_connected, relative_close, rng, scaled};
use wdnsense_core::centrality::{betweenness, tailored_centrality, Betweenness};
use wdnsense_core::network::{EdgeSpec, Network, Node};

fn assert_matches_oracle(net: &Network) {
    let fast = betweenness(net);
    let (node, edge) = brute_betweenness(net);
    for (i, (a, b)) in fast.node.iter().zip(&node).enumerate() {
        assert!(relative_close(*a, *b, 1e-9), "node {i}: {a} vs {b}");
    }
    for (e, (a, b)) in fast.edge.iter().zip(&edge).enumerate() {
        assert!(relative_close(*a, *b, 1e-9), "edge {e}: {a} vs {b}");
    }
}

#[test]
fn matches_all_paths_enumeration() {
    let mut r = rng(2024);
    for k in 0..60 {
        let net = random_connected(&mut r, 8, k % 2 == 0);
        assert_matches_oracle(&net);
    }
}

#[test]
fn handshake_total_equals_mean_path_edges() {
    // Each unordered pair spreads exactly one unit over every edge position
    // of its shortest paths, so the edge total equals the sum over pairs of
    // the mean hop count of their shortest paths; the oracle gives both.
    let mut r = rng(11);
    for _ in 0..20 {
        let net = random_connected(&mut r, 7, true);
        let total: f64 = betweenness(&net).edge.iter().sum();
        let (_, edge) = brute_betweenness(&net);
        let oracle: f64 = edge.iter().sum();
        assert!(relative_close(total, oracle, 1e-9));
    }
}

#[test]
fn parallel_style_reduction_is_bit_identical() {
    let mut r = rng(5);
    let net = random_connected(&mut r, 8, true);
    let mut total = Betweenness::zeros(&net);
    let parts: Vec<Betweenness> = (0..net.node_count())
        .rev()
        .map(|s| Betweenness::single_source(&net, s))
        .collect();
    for part in parts.iter().rev() {
        total.accumulate(part);
    }
    assert_eq!(total.halve(), betweenness(&net));
}

#[test]
fn mirror_symmetric_sources() {
    // s1 - a - b - c - s2 with a chord b - d: mirror swaps s1<->s2, a<->c
    let nodes = vec![
        Node::source("s1"),
        Node::junction("a", 1.0),
        Node::junction("b", 1.0),
        Node::junction("c", 1.0),
        Node::source("s2"),
        Node::junction("d", 1.0),
    ];
    let edges = vec![
        EdgeSpec::new("s1a", "s1", "a", 2.0),
        EdgeSpec::new("ab", "a", "b", 1.0),
        EdgeSpec::new("bc", "b", "c", 1.0),
        EdgeSpec::new("cs2", "c", "s2", 2.0),
        EdgeSpec::new("bd", "b", "d", 3.0),
    ];
    let map = tailored_centrality(&Network::new(nodes, edges).unwrap()).unwrap();
    assert_eq!(map.get("s1a"), map.get("cs2"));
    assert_eq!(map.get("ab"), map.get("bc"));
    assert_eq!(map.values.values().copied().fold(0.0, f64::max), 1.0);
    assert_eq!(map.len(), 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescaling_lengths_is_invariant(seed in any::<u64>(), factor in prop::sample::select(vec![0.5, 2.0, 4.0, 1024.0])) {
        let mut r = rng(seed);
        let net = random_connected(&mut r, 8, seed % 2 == 0);
        let big = scaled(&net, factor);
        prop_assert_eq!(betweenness(&net), betweenness(&big));
        prop_assert_eq!(tailored_centrality(&net).unwrap(), tailored_centrality(&big).unwrap());
    }

    #[test]
    fn tailored_values_in_unit_range(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_connected(&mut r, 8, false);
        let map = tailored_centrality(&net).unwrap();
        prop_assert_eq!(map.len(), net.edge_count());
        prop_assert!(map.values.values().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(map.values.values().any(|&v| v == 1.0));
        prop_assert!(map.values.keys().all(|id| !id.starts_with(wdnsense_core::network::FICTITIOUS_PREFIX)));
    }

    #[test]
    fn augmentation_counts_and_reversal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_connected(&mut r, 8, false);
        let aug = net.augment_with_fictitious().unwrap();
        let extra = net.source_count() * net.fictitious_per_source();
        prop_assert_eq!(aug.node_count(), net.node_count() + extra);
        prop_assert_eq!(aug.edge_count(), net.edge_count() + extra);
        let nodes: Vec<Node> = aug.nodes().iter().filter(|n| !n.is_fictitious()).cloned().collect();
        let edges: Vec<EdgeSpec> = aug
            .edge_specs()
            .into_iter()
            .zip(aug.edges())
            .filter(|(_, e)| !e.is_fictitious())
            .map(|(s, _)| s)
            .collect();
        prop_assert_eq!(Network::new(nodes, edges).unwrap(), net);
    }
}
