//! Cross-module invariants checked over generated graphs and inputs.

use std::collections::{BTreeSet, HashSet};

use glossgraph::coreset::{exact_core, sampled_core, ExactCoreParams, SampledCoreParams};
use glossgraph::decompose::filter_by_girth;
use glossgraph::etymology::{median_pairwise_distance, sign_test_below};
use glossgraph::graph::{graph_from_edges, DictGraph, NodeId};
use glossgraph::loops::{
    edge_girth, loop_histogram, randomize_degree_preserving, Girth, RandomizeParams,
};
use proptest::prelude::*;

fn graph_strategy(max_n: u32, max_edges: usize) -> impl Strategy<Value = DictGraph> {
    proptest::collection::vec((0..max_n, 0..max_n), 0..max_edges).prop_map(move |raw| {
        let edges: Vec<(u32, u32)> = raw.into_iter().filter(|(u, v)| u != v).collect();
        graph_from_edges(max_n as usize, &edges).unwrap().graph
    })
}

fn edge_set(g: &DictGraph) -> BTreeSet<(NodeId, NodeId)> {
    g.edges().collect()
}

proptest! {
    #[test]
    fn every_girth_is_at_least_two(g in graph_strategy(14, 80)) {
        let map = edge_girth(&g, None, None).unwrap();
        for &girth in map.girths.values() {
            if let Girth::Finite(l) = girth {
                prop_assert!(l >= 2);
            }
        }
    }

    /// A probe cap never invents loops: capped output equals the uncapped
    /// girth when that girth fits the cap, and Unbounded otherwise.
    #[test]
    fn probe_cap_truncates_but_never_distorts(g in graph_strategy(12, 70), cap in 2u32..8) {
        let full = edge_girth(&g, None, None).unwrap();
        let capped = edge_girth(&g, None, Some(cap)).unwrap();
        prop_assert_eq!(full.girths.len(), capped.girths.len());
        for (edge, &girth) in &capped.girths {
            match (girth, full.girths[edge]) {
                (Girth::Finite(a), Girth::Finite(b)) => {
                    prop_assert_eq!(a, b);
                    prop_assert!(a <= cap);
                }
                (Girth::Unbounded, Girth::Finite(b)) => prop_assert!(b > cap),
                (Girth::Unbounded, Girth::Unbounded) => {}
                (Girth::Finite(_), Girth::Unbounded) => {
                    prop_assert!(false, "cap found a loop the full search missed");
                }
            }
        }
    }

    #[test]
    fn histogram_accounts_for_every_edge(g in graph_strategy(12, 70)) {
        let map = edge_girth(&g, None, None).unwrap();
        let hist = loop_histogram(&map);
        let counted: usize = hist.counts.values().sum();
        prop_assert_eq!(counted + hist.unbounded_edges, map.girths.len());
    }

    #[test]
    fn girth_filtering_is_idempotent(g in graph_strategy(13, 70), max_len in 2u32..7) {
        let once = filter_by_girth(&g, None, max_len).unwrap();
        let twice = filter_by_girth(&once.graph, None, max_len).unwrap();
        prop_assert_eq!(edge_set(&once.graph), edge_set(&twice.graph));
    }

    #[test]
    fn girth_filtering_is_monotone_in_length(g in graph_strategy(13, 70), max_len in 2u32..6) {
        let tight = filter_by_girth(&g, None, max_len).unwrap();
        let loose = filter_by_girth(&g, None, max_len + 1).unwrap();
        prop_assert!(edge_set(&tight.graph).is_subset(&edge_set(&loose.graph)));
    }

    #[test]
    fn shuffling_preserves_degrees_and_simplicity(
        g in graph_strategy(16, 90),
        seed in 0u64..1000,
    ) {
        let shuffled = randomize_degree_preserving(
            &g,
            &RandomizeParams { swap_factor: 10, seed, max_attempts_factor: 100 },
        )
        .unwrap();
        let n = g.node_count();
        let degree = |g: &DictGraph| {
            let mut out_deg = vec![0usize; n];
            let mut in_deg = vec![0usize; n];
            for (u, v) in g.edges() {
                out_deg[u.index()] += 1;
                in_deg[v.index()] += 1;
            }
            (out_deg, in_deg)
        };
        prop_assert_eq!(degree(&g), degree(&shuffled.graph));
        let edges: Vec<(NodeId, NodeId)> = shuffled.graph.edges().collect();
        let distinct: HashSet<_> = edges.iter().copied().collect();
        prop_assert_eq!(distinct.len(), edges.len());
        prop_assert!(edges.iter().all(|&(u, v)| u != v));
    }

    /// Raising the sampled membership threshold can only shrink the core.
    #[test]
    fn sampled_core_is_monotone_in_threshold(g in graph_strategy(15, 90), seed in 0u64..50) {
        let params = |t| SampledCoreParams {
            sample_size: 10,
            seed,
            membership_threshold: t,
            degeneracy_fraction: 0.0,
        };
        let loose = sampled_core(&g, &params(0.6)).unwrap();
        let strict = sampled_core(&g, &params(1.0)).unwrap();
        let loose_members: BTreeSet<NodeId> = loose.members.iter().copied().collect();
        for m in &strict.members {
            prop_assert!(loose_members.contains(m));
        }
    }

    #[test]
    fn exact_core_is_monotone_in_coverage(g in graph_strategy(15, 90)) {
        let core = |coverage| {
            exact_core(&g, &ExactCoreParams { coverage_fraction: coverage, memory_cap_bytes: 1 << 20 })
                .unwrap()
                .members
        };
        let strict: BTreeSet<NodeId> = core(0.99).into_iter().collect();
        for m in core(1.0) {
            prop_assert!(strict.contains(&m));
        }
    }

    #[test]
    fn median_distance_ignores_translation(
        years in proptest::collection::vec(600i32..2000, 2..40),
        shift in -500i32..500,
    ) {
        let moved: Vec<i32> = years.iter().map(|y| y + shift).collect();
        prop_assert_eq!(
            median_pairwise_distance(&years),
            median_pairwise_distance(&moved)
        );
    }

    #[test]
    fn sign_test_counts_partition_the_pairs(
        pairs in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 0..60),
    ) {
        let t = sign_test_below(&pairs);
        prop_assert_eq!(t.below + t.above + t.ties, pairs.len());
        prop_assert!(t.p_value > 0.0 && t.p_value <= 1.0);
    }
}
