//! Directed graph over word senses with sorted adjacency in both directions.
//!
//! Node ids are dense indices into the node table, so algorithms use plain
//! vectors instead of hash maps. Edges are deduplicated and self-loops are
//! dropped at construction; both counts are reported so ingestion noise stays
//! visible.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense index of a node in a [`DictGraph`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

impl PartOfSpeech {
    /// Accepts both WordNet-style single letters and full names.
    pub fn parse(s: &str) -> PartOfSpeech {
        match s {
            "n" | "noun" => PartOfSpeech::Noun,
            "v" | "verb" => PartOfSpeech::Verb,
            "a" | "adj" | "adjective" | "s" => PartOfSpeech::Adj,
            "r" | "adv" | "adverb" => PartOfSpeech::Adv,
            _ => PartOfSpeech::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PartOfSpeech::Noun => "noun",
            PartOfSpeech::Verb => "verb",
            PartOfSpeech::Adj => "adj",
            PartOfSpeech::Adv => "adv",
            PartOfSpeech::Other => "other",
        }
    }
}

impl fmt::Display for PartOfSpeech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One word sense. `key` is the stable external identifier: the synset id for
/// sense-level graphs, the surface word itself for word-level graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseNode {
    pub key: String,
    /// Case-folded lemmas; the first one is the canonical surface word.
    pub lemmas: Vec<String>,
    pub pos: PartOfSpeech,
    /// 1 = first sense of the first lemma.
    pub sense_rank: u32,
    pub gloss: String,
}

impl SenseNode {
    pub fn word(&self) -> &str {
        &self.lemmas[0]
    }
}

/// Immutable directed graph. `out_adj` and `in_adj` are sorted, mutually
/// consistent, and free of duplicates and self-loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DictGraph {
    nodes: Vec<SenseNode>,
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    edge_count: usize,
}

/// A constructed graph together with how much input noise was dropped.
#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: DictGraph,
    pub duplicate_edges_dropped: usize,
    pub self_loops_dropped: usize,
}

/// Builds a graph from a node table and raw edge list. Self-loops and
/// duplicate edges are dropped and counted; an endpoint outside the node
/// table is an error naming the offending edge.
pub fn build_graph(nodes: Vec<SenseNode>, edges: &[(NodeId, NodeId)]) -> Result<BuiltGraph> {
    let n = nodes.len();
    for (i, node) in nodes.iter().enumerate() {
        if node.lemmas.is_empty() {
            return Err(Error::EmptyLemmas { node: i as u32 });
        }
        if node.sense_rank == 0 {
            return Err(Error::InvalidParameter(format!(
                "node {i}: sense_rank must be at least 1"
            )));
        }
    }

    let mut out_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut self_loops = 0usize;
    for (i, &(src, dst)) in edges.iter().enumerate() {
        if src.index() >= n || dst.index() >= n {
            return Err(Error::EdgeOutOfRange {
                index: i,
                src: src.0,
                dst: dst.0,
                node_count: n,
            });
        }
        if src == dst {
            self_loops += 1;
            continue;
        }
        out_adj[src.index()].push(dst);
    }

    let mut duplicates = 0usize;
    for list in &mut out_adj {
        list.sort_unstable();
        let before = list.len();
        list.dedup();
        duplicates += before - list.len();
    }

    let mut in_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut edge_count = 0usize;
    for (u, list) in out_adj.iter().enumerate() {
        edge_count += list.len();
        for &v in list {
            in_adj[v.index()].push(NodeId(u as u32));
        }
    }
    for list in &mut in_adj {
        list.sort_unstable();
    }

    Ok(BuiltGraph {
        graph: DictGraph {
            nodes,
            out_adj,
            in_adj,
            edge_count,
        },
        duplicate_edges_dropped: duplicates,
        self_loops_dropped: self_loops,
    })
}

impl DictGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> &[SenseNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &SenseNode {
        &self.nodes[id.index()]
    }

    pub fn check_node(&self, id: NodeId) -> Result<()> {
        if id.index() >= self.nodes.len() {
            return Err(Error::NodeOutOfRange {
                node: id.0,
                node_count: self.nodes.len(),
            });
        }
        Ok(())
    }

    /// Successors of `id`, sorted ascending.
    pub fn succs(&self, id: NodeId) -> &[NodeId] {
        &self.out_adj[id.index()]
    }

    /// Predecessors of `id`, sorted ascending.
    pub fn preds(&self, id: NodeId) -> &[NodeId] {
        &self.in_adj[id.index()]
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.out_adj[src.index()].binary_search(&dst).is_ok()
    }

    /// All edges in (src, dst) order, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&v| (NodeId(u as u32), v)))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Same node table, different edge set. Used by girth filtering and the
    /// null model, which replace edges wholesale.
    pub fn with_edges(&self, edges: &[(NodeId, NodeId)]) -> Result<BuiltGraph> {
        build_graph(self.nodes.clone(), edges)
    }
}

/// Whether [`descendants_with`] should count the start node itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartInclusion {
    /// Include the start exactly when it can reach itself through a cycle.
    #[default]
    OnCycle,
    Always,
    Never,
}

/// Forward BFS closure of `start`. The start node is included exactly when it
/// lies on a cycle that returns to it.
pub fn descendants(g: &DictGraph, start: NodeId) -> Result<Vec<NodeId>> {
    descendants_with(g, start, StartInclusion::OnCycle)
}

pub fn descendants_with(
    g: &DictGraph,
    start: NodeId,
    mode: StartInclusion,
) -> Result<Vec<NodeId>> {
    g.check_node(start)?;
    let mut seen = descendant_mask(g, start);
    match mode {
        StartInclusion::OnCycle => {}
        StartInclusion::Always => seen[start.index()] = true,
        StartInclusion::Never => seen[start.index()] = false,
    }
    Ok(seen
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s)
        .map(|(i, _)| NodeId(i as u32))
        .collect())
}

/// Membership mask of the descendant set under the on-cycle start rule: the
/// start bit is set only when some successor path returns to it.
pub(crate) fn descendant_mask(g: &DictGraph, start: NodeId) -> Vec<bool> {
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::new();
    for &w in g.succs(start) {
        if !seen[w.index()] {
            seen[w.index()] = true;
            queue.push_back(w);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in g.succs(u) {
            if !seen[w.index()] {
                seen[w.index()] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Strongly connected components and the condensation DAG.
///
/// `components` are emitted in Tarjan completion order, which is the reverse
/// of a topological order of the condensation: every condensation edge goes
/// from a higher component index to a lower one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SccPartition {
    /// Component index per node.
    pub component_of: Vec<u32>,
    /// Member lists, each sorted ascending.
    pub components: Vec<Vec<NodeId>>,
    /// Deduplicated inter-component edges, sorted.
    pub condensation_edges: Vec<(u32, u32)>,
}

impl SccPartition {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Component indices in topological order of the condensation
    /// (sources first).
    pub fn topological_components(&self) -> impl Iterator<Item = u32> {
        (0..self.components.len() as u32).rev()
    }
}

/// Tarjan's algorithm, iterative so recursion depth never depends on the
/// graph. Single pass over the nodes.
pub fn scc(g: &DictGraph) -> SccPartition {
    const UNSET: u32 = u32::MAX;
    let n = g.node_count();
    let mut index = vec![UNSET; n];
    let mut lowlink = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut component_of = vec![UNSET; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut components: Vec<Vec<NodeId>> = Vec::new();
    let mut next_index = 0u32;

    // (node, position in its successor list)
    let mut call: Vec<(u32, usize)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != UNSET {
            continue;
        }
        index[root as usize] = next_index;
        lowlink[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        call.push((root, 0));

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let succs = g.succs(NodeId(v));
            if *pos < succs.len() {
                let w = succs[*pos].0;
                *pos += 1;
                if index[w as usize] == UNSET {
                    index[w as usize] = next_index;
                    lowlink[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, 0));
                } else if on_stack[w as usize] {
                    lowlink[v as usize] = lowlink[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    lowlink[parent as usize] = lowlink[parent as usize].min(lowlink[v as usize]);
                }
                if lowlink[v as usize] == index[v as usize] {
                    // Root of a component: pop the stack down to v.
                    let comp_id = components.len() as u32;
                    let mut members = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w as usize] = false;
                        component_of[w as usize] = comp_id;
                        members.push(NodeId(w));
                        if w == v {
                            break;
                        }
                    }
                    members.sort_unstable();
                    components.push(members);
                }
            }
        }
    }

    let mut condensation_edges: Vec<(u32, u32)> = g
        .edges()
        .map(|(u, v)| (component_of[u.index()], component_of[v.index()]))
        .filter(|&(cu, cv)| cu != cv)
        .collect();
    condensation_edges.sort_unstable();
    condensation_edges.dedup();

    SccPartition {
        component_of,
        components,
        condensation_edges,
    }
}

/// In-degree and out-degree histograms: degree value -> node count.
pub fn degree_histograms(g: &DictGraph) -> (BTreeMap<usize, usize>, BTreeMap<usize, usize>) {
    let mut in_hist = BTreeMap::new();
    let mut out_hist = BTreeMap::new();
    for id in g.node_ids() {
        *in_hist.entry(g.preds(id).len()).or_insert(0) += 1;
        *out_hist.entry(g.succs(id).len()).or_insert(0) += 1;
    }
    (in_hist, out_hist)
}

/// Builds a node table of bare single-lemma nouns, for tests and synthetic
/// graphs where only the topology matters.
pub fn plain_nodes(n: usize) -> Vec<SenseNode> {
    (0..n)
        .map(|i| SenseNode {
            key: format!("n{i}"),
            lemmas: vec![format!("n{i}")],
            pos: PartOfSpeech::Noun,
            sense_rank: 1,
            gloss: String::new(),
        })
        .collect()
}

/// Convenience for tests and fixtures: graph on `n` plain nodes.
pub fn graph_from_edges(n: usize, edges: &[(u32, u32)]) -> Result<BuiltGraph> {
    let edges: Vec<(NodeId, NodeId)> = edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))).collect();
    build_graph(plain_nodes(n), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(n: usize, edges: &[(u32, u32)]) -> DictGraph {
        graph_from_edges(n, edges).unwrap().graph
    }

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&x| NodeId(x)).collect()
    }

    /// Oracle: reachability by at least one edge, via boolean matrix powering
    /// to a fixed point. reach[u][v] is true iff a path of length >= 1 runs
    /// from u to v.
    fn closure_oracle(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; n]; n];
        for &(u, v) in edges {
            if u != v {
                adj[u as usize][v as usize] = true;
            }
        }
        let mut reach = adj.clone();
        loop {
            let mut changed = false;
            let prev = reach.clone();
            for u in 0..n {
                for mid in 0..n {
                    if prev[u][mid] {
                        for v in 0..n {
                            if adj[mid][v] && !reach[u][v] {
                                reach[u][v] = true;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                return reach;
            }
        }
    }

    fn random_edges(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(u32, u32)> {
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for v in 0..n as u32 {
                if u != v && rng.random_bool(density) {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    #[test]
    fn three_cycle_has_three_edges() {
        let g = g(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn duplicate_and_self_loop_are_dropped_and_counted() {
        let built = graph_from_edges(2, &[(0, 1), (0, 1), (0, 0)]).unwrap();
        assert_eq!(built.graph.edge_count(), 1);
        assert_eq!(built.duplicate_edges_dropped, 1);
        assert_eq!(built.self_loops_dropped, 1);
    }

    #[test]
    fn out_of_range_edge_is_an_error_naming_the_edge() {
        let err = graph_from_edges(2, &[(0, 1), (0, 5)]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("edge 1"), "got: {msg}");
        assert!(msg.contains("5"), "got: {msg}");
    }

    #[test]
    fn empty_lemma_list_is_rejected() {
        let mut nodes = plain_nodes(1);
        nodes[0].lemmas.clear();
        assert!(build_graph(nodes, &[]).is_err());
    }

    #[test]
    fn adjacency_is_sorted_and_consistent() {
        let g = g(4, &[(0, 3), (0, 1), (0, 2), (3, 0), (2, 0)]);
        assert_eq!(g.succs(NodeId(0)), &ids(&[1, 2, 3])[..]);
        assert_eq!(g.preds(NodeId(0)), &ids(&[2, 3])[..]);
        assert!(g.has_edge(NodeId(0), NodeId(3)));
        assert!(!g.has_edge(NodeId(1), NodeId(0)));
    }

    #[test]
    fn descendants_of_chain_exclude_start() {
        let g = g(3, &[(0, 1), (1, 2)]);
        assert_eq!(descendants(&g, NodeId(0)).unwrap(), ids(&[1, 2]));
    }

    #[test]
    fn descendants_on_cycle_include_start() {
        let g = g(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(descendants(&g, NodeId(0)).unwrap(), ids(&[0, 1, 2]));
    }

    #[test]
    fn descendants_inclusion_modes() {
        let g = g(3, &[(0, 1), (1, 2)]);
        assert_eq!(
            descendants_with(&g, NodeId(0), StartInclusion::Always).unwrap(),
            ids(&[0, 1, 2])
        );
        let cyc = super::graph_from_edges(2, &[(0, 1), (1, 0)]).unwrap().graph;
        assert_eq!(
            descendants_with(&cyc, NodeId(0), StartInclusion::Never).unwrap(),
            ids(&[1])
        );
    }

    #[test]
    fn descendants_match_closure_oracle_on_random_graphs() {
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 50;
            let edges = random_edges(&mut rng, n, 0.06);
            let g = g(n, &edges);
            let reach = closure_oracle(n, &edges);
            for u in 0..n {
                let want: Vec<NodeId> = (0..n)
                    .filter(|&v| reach[u][v])
                    .map(|v| NodeId(v as u32))
                    .collect();
                let got = descendants(&g, NodeId(u as u32)).unwrap();
                assert_eq!(got, want, "seed {seed} node {u}");
            }
        }
    }

    #[test]
    fn descendants_monotone_under_edge_insertion() {
        for seed in 100..110u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 20;
            let mut edges = random_edges(&mut rng, n, 0.05);
            let mut prev: Vec<Vec<NodeId>> = {
                let g = g(n, &edges);
                (0..n as u32)
                    .map(|u| descendants(&g, NodeId(u)).unwrap())
                    .collect()
            };
            for _ in 0..15 {
                let u = rng.random_range(0..n as u32);
                let v = rng.random_range(0..n as u32);
                if u == v {
                    continue;
                }
                edges.push((u, v));
                let g = g(n, &edges);
                let next: Vec<Vec<NodeId>> = (0..n as u32)
                    .map(|u| descendants(&g, NodeId(u)).unwrap())
                    .collect();
                for node in 0..n {
                    for d in &prev[node] {
                        assert!(
                            next[node].contains(d),
                            "seed {seed}: descendant set of {node} shrank"
                        );
                    }
                }
                prev = next;
            }
        }
    }

    #[test]
    fn scc_of_cycle_with_pendant() {
        let g = g(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]);
        let p = scc(&g);
        assert_eq!(p.component_count(), 2);
        let cycle_comp = p.component_of[0];
        assert_eq!(p.component_of[1], cycle_comp);
        assert_eq!(p.component_of[2], cycle_comp);
        assert_ne!(p.component_of[3], cycle_comp);
        assert_eq!(p.components[cycle_comp as usize], ids(&[0, 1, 2]));
    }

    #[test]
    fn scc_of_dag_is_all_singletons() {
        let g = g(5, &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]);
        let p = scc(&g);
        assert_eq!(p.component_count(), 5);
        assert!(p.components.iter().all(|c| c.len() == 1));
    }

    /// Oracle: u and v share a component iff each reaches the other.
    #[test]
    fn scc_matches_mutual_reachability_on_random_graphs() {
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=12);
            let density = rng.random_range(0.1..0.5);
            let edges = random_edges(&mut rng, n, density);
            let g = g(n, &edges);
            let reach = closure_oracle(n, &edges);
            let p = scc(&g);
            for u in 0..n {
                for v in 0..n {
                    let same = p.component_of[u] == p.component_of[v];
                    let mutual = u == v || (reach[u][v] && reach[v][u]);
                    assert_eq!(same, mutual, "seed {seed}, nodes {u},{v}");
                }
            }
        }
    }

    /// Kahn's algorithm must consume every condensation node; emission order
    /// must be reverse topological.
    #[test]
    fn condensation_is_acyclic_and_reverse_topological() {
        for seed in 200..260u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=40);
            let edges = random_edges(&mut rng, n, 0.08);
            let g = g(n, &edges);
            let p = scc(&g);
            for &(cu, cv) in &p.condensation_edges {
                assert!(cu > cv, "seed {seed}: edge {cu}->{cv} not reverse-topo");
            }
            let k = p.component_count();
            let mut indeg = vec![0usize; k];
            let mut out: Vec<Vec<u32>> = vec![Vec::new(); k];
            for &(cu, cv) in &p.condensation_edges {
                indeg[cv as usize] += 1;
                out[cu as usize].push(cv);
            }
            let mut queue: VecDeque<u32> = (0..k as u32).filter(|&c| indeg[c as usize] == 0).collect();
            let mut seen = 0;
            while let Some(c) = queue.pop_front() {
                seen += 1;
                for &d in &out[c as usize] {
                    indeg[d as usize] -= 1;
                    if indeg[d as usize] == 0 {
                        queue.push_back(d);
                    }
                }
            }
            assert_eq!(seen, k, "seed {seed}: condensation has a cycle");
        }
    }

    #[test]
    fn degree_histograms_of_star() {
        // Center 0 points at 4 leaves.
        let g = g(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let (in_hist, out_hist) = degree_histograms(&g);
        assert_eq!(out_hist.get(&4), Some(&1));
        assert_eq!(out_hist.get(&0), Some(&4));
        assert_eq!(in_hist.get(&1), Some(&4));
        assert_eq!(in_hist.get(&0), Some(&1));
    }

    proptest! {
        #[test]
        fn degree_sums_equal_edge_count(raw in proptest::collection::vec((0u32..30, 0u32..30), 0..200)) {
            let built = graph_from_edges(30, &raw).unwrap();
            let g = built.graph;
            let (in_hist, out_hist) = degree_histograms(&g);
            let in_sum: usize = in_hist.iter().map(|(d, c)| d * c).sum();
            let out_sum: usize = out_hist.iter().map(|(d, c)| d * c).sum();
            prop_assert_eq!(in_sum, g.edge_count());
            prop_assert_eq!(out_sum, g.edge_count());
            let in_nodes: usize = in_hist.values().sum();
            prop_assert_eq!(in_nodes, g.node_count());
        }

        #[test]
        fn in_adjacency_mirrors_out_adjacency(raw in proptest::collection::vec((0u32..20, 0u32..20), 0..120)) {
            let g = graph_from_edges(20, &raw).unwrap().graph;
            for u in g.node_ids() {
                for &v in g.succs(u) {
                    prop_assert!(g.preds(v).binary_search(&u).is_ok());
                }
                for &p in g.preds(u) {
                    prop_assert!(g.succs(p).binary_search(&u).is_ok());
                }
            }
        }
    }
}
