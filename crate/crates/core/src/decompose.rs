//! Splitting the core into semantic clusters: keep only edges that sit on
//! short definitional loops, then take strongly connected components of what
//! remains. Oversized components get one extra pass at a tighter loop length.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::graph::{scc, DictGraph, NodeId};
use crate::loops::{edge_girth, EdgeGirthMap, Girth};
use crate::{Error, Result};

/// Girth filter output: the surviving subgraph plus the exact girth of every
/// surviving edge.
#[derive(Debug, Clone)]
pub struct GirthFiltered {
    pub graph: DictGraph,
    pub girths: EdgeGirthMap,
}

/// Keeps exactly the edges of the induced subgraph on `scope` whose girth is
/// at most `max_len`. The node table is unchanged, so node ids stay valid;
/// out-of-scope nodes are simply left bare.
pub fn filter_by_girth(
    g: &DictGraph,
    scope: Option<&[NodeId]>,
    max_len: u32,
) -> Result<GirthFiltered> {
    let map = edge_girth(g, scope, Some(max_len))?;
    let mut surviving = BTreeMap::new();
    let mut edges = Vec::new();
    for (&edge, &girth) in &map.girths {
        if let Girth::Finite(l) = girth {
            surviving.insert(edge, girth);
            edges.push(edge);
            debug_assert!(l <= max_len);
        }
    }
    let built = g.with_edges(&edges)?;
    Ok(GirthFiltered {
        graph: built.graph,
        girths: EdgeGirthMap {
            girths: surviving,
            max_probe_depth: Some(max_len),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lineage {
    /// Survived the main pass unsplit.
    Root,
    /// Produced by re-filtering the oversized component with this id.
    RefinedFrom(usize),
}

impl std::fmt::Display for Lineage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lineage::Root => write!(f, "root"),
            Lineage::RefinedFrom(id) => write!(f, "refined-from:{id}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub id: usize,
    /// Sorted ascending.
    pub members: Vec<NodeId>,
    /// Edges internal to the component, sorted.
    pub edges: Vec<(NodeId, NodeId)>,
    pub lineage: Lineage,
}

impl Component {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.binary_search(&id).is_ok()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSet {
    pub components: Vec<Component>,
    pub filter_length: u32,
    pub refine_threshold: usize,
    pub refine_length: u32,
}

impl ComponentSet {
    pub fn component_of(&self, id: NodeId) -> Option<usize> {
        self.components
            .iter()
            .find(|c| c.contains(id))
            .map(|c| c.id)
    }

    /// Every node assigned to some component, sorted.
    pub fn covered_nodes(&self) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self
            .components
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecomposeParams {
    /// Main pass keeps edges with girth up to this length.
    pub filter_length: u32,
    /// Components larger than this get one refinement pass.
    pub refine_threshold: usize,
    /// Loop length used by the refinement pass.
    pub refine_length: u32,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            filter_length: 5,
            refine_threshold: 20,
            refine_length: 4,
        }
    }
}

/// Non-trivial SCCs of a girth-filtered subgraph, sorted by smallest member,
/// with internal edges attached.
fn girth_components(filtered: &GirthFiltered) -> Vec<(Vec<NodeId>, Vec<(NodeId, NodeId)>)> {
    let partition = scc(&filtered.graph);
    let mut comps: Vec<Vec<NodeId>> = partition
        .components
        .iter()
        .filter(|c| c.len() >= 2)
        .cloned()
        .collect();
    comps.sort_by_key(|c| c[0]);

    let mut result = Vec::with_capacity(comps.len());
    for members in comps {
        let edges: Vec<(NodeId, NodeId)> = filtered
            .girths
            .girths
            .keys()
            .filter(|(u, v)| {
                partition.component_of[u.index()] == partition.component_of[v.index()]
                    && members.binary_search(u).is_ok()
            })
            .copied()
            .collect();
        result.push((members, edges));
    }
    result
}

/// Decomposes the core subgraph into short-loop clusters.
///
/// Edges of the core-induced subgraph with girth above `filter_length` are
/// dropped, strongly connected components of the rest become clusters, and
/// singletons are discarded. Any cluster larger than `refine_threshold` is
/// re-filtered internally at `refine_length` (girths recomputed inside the
/// cluster) and re-split, once; its pieces carry `RefinedFrom` lineage.
pub fn decompose_core(
    g: &DictGraph,
    core: &[NodeId],
    params: &DecomposeParams,
) -> Result<ComponentSet> {
    if params.filter_length < 2 || params.refine_length < 2 {
        return Err(Error::InvalidParameter(
            "filter and refine lengths must be at least 2, the shortest possible cycle".into(),
        ));
    }
    if params.refine_threshold < 2 {
        return Err(Error::InvalidParameter(
            "refine_threshold must be at least 2".into(),
        ));
    }

    let filtered = filter_by_girth(g, Some(core), params.filter_length)?;
    let roots = girth_components(&filtered);

    let mut components = Vec::new();
    let mut next_id = roots.len();
    for (root_id, (members, edges)) in roots.into_iter().enumerate() {
        if members.len() <= params.refine_threshold {
            components.push(Component {
                id: root_id,
                members,
                edges,
                lineage: Lineage::Root,
            });
            continue;
        }
        let refined = filter_by_girth(&filtered.graph, Some(&members), params.refine_length)?;
        for (sub_members, sub_edges) in girth_components(&refined) {
            components.push(Component {
                id: next_id,
                members: sub_members,
                edges: sub_edges,
                lineage: Lineage::RefinedFrom(root_id),
            });
            next_id += 1;
        }
    }

    if components.is_empty() {
        return Err(Error::NoComponents {
            filter_length: params.filter_length,
        });
    }
    components.sort_by_key(|c| c.id);

    Ok(ComponentSet {
        components,
        filter_length: params.filter_length,
        refine_threshold: params.refine_threshold,
        refine_length: params.refine_length,
    })
}

/// Per-component girth range and the longest round trip found between any
/// member pair. The round trip is a lower bound on the longest internal
/// cycle; it can exceed the filter length, showing that long loops survive
/// inside clusters glued by short ones.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentStats {
    pub id: usize,
    pub size: usize,
    pub edge_count: usize,
    pub min_girth: u32,
    pub max_girth: u32,
    pub max_round_trip: u32,
}

fn component_subgraph(g: &DictGraph, cs: &ComponentSet) -> Result<DictGraph> {
    let edges: Vec<(NodeId, NodeId)> = cs
        .components
        .iter()
        .flat_map(|c| c.edges.iter().copied())
        .collect();
    Ok(g.with_edges(&edges)?.graph)
}

pub fn component_stats(g: &DictGraph, cs: &ComponentSet) -> Result<Vec<ComponentStats>> {
    let sub = component_subgraph(g, cs)?;
    let mut stats = Vec::new();
    for comp in &cs.components {
        let map = edge_girth(&sub, Some(&comp.members), None)?;
        let mut min_girth = u32::MAX;
        let mut max_girth = 0u32;
        for girth in map.girths.values() {
            if let Girth::Finite(l) = girth {
                min_girth = min_girth.min(*l);
                max_girth = max_girth.max(*l);
            }
        }

        // Longest mutual-distance cycle through any member pair.
        let mut max_round_trip = 0u32;
        let mut mask = vec![false; sub.node_count()];
        for &x in &comp.members {
            mask[x.index()] = true;
        }
        let mut dists: BTreeMap<NodeId, Vec<u32>> = BTreeMap::new();
        for &u in &comp.members {
            dists.insert(u, crate::loops::bfs_within(&sub, u, &mask));
        }
        for &u in &comp.members {
            for &v in &comp.members {
                if u >= v {
                    continue;
                }
                let d_uv = dists[&u][v.index()];
                let d_vu = dists[&v][u.index()];
                if d_uv != u32::MAX && d_vu != u32::MAX {
                    max_round_trip = max_round_trip.max(d_uv + d_vu);
                }
            }
        }

        stats.push(ComponentStats {
            id: comp.id,
            size: comp.len(),
            edge_count: comp.edges.len(),
            min_girth,
            max_girth,
            max_round_trip,
        });
    }
    Ok(stats)
}

/// Human-readable listing: one block per component with its words and loop
/// statistics.
pub fn component_report(g: &DictGraph, cs: &ComponentSet) -> Result<String> {
    let stats = component_stats(g, cs)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} components (filter length {}, refine >{} at {})",
        cs.components.len(),
        cs.filter_length,
        cs.refine_threshold,
        cs.refine_length
    );
    for (comp, stat) in cs.components.iter().zip(&stats) {
        let words: Vec<&str> = comp
            .members
            .iter()
            .map(|&m| g.node(m).word())
            .collect();
        let _ = writeln!(
            out,
            "component {} ({}, size {}): {}",
            comp.id,
            comp.lineage,
            stat.size,
            words.join(", ")
        );
        let _ = writeln!(
            out,
            "  edges {}; girth {}..{}; longest round trip {}",
            stat.edge_count, stat.min_girth, stat.max_girth, stat.max_round_trip
        );
    }
    Ok(out)
}

fn girth_color(girth: Girth) -> &'static str {
    match girth {
        Girth::Finite(2) => "red",
        Girth::Finite(3) => "green",
        Girth::Finite(4) => "blue",
        Girth::Finite(5) => "orange",
        _ => "gray",
    }
}

/// DOT rendering of the decomposition, edges colored by their girth inside
/// their component: 2 red, 3 green, 4 blue, 5 orange.
pub fn components_dot(g: &DictGraph, cs: &ComponentSet) -> Result<String> {
    let sub = component_subgraph(g, cs)?;
    let mut out = String::from("digraph components {\n  node [shape=ellipse, fontsize=10];\n");
    for comp in &cs.components {
        let map = edge_girth(&sub, Some(&comp.members), None)?;
        let _ = writeln!(out, "  subgraph cluster_{} {{", comp.id);
        let _ = writeln!(out, "    label=\"component {} ({})\";", comp.id, comp.lineage);
        for &m in &comp.members {
            let _ = writeln!(
                out,
                "    n{} [label=\"{}\"];",
                m.0,
                g.node(m).word().replace('"', "'")
            );
        }
        for (&(u, v), &girth) in &map.girths {
            let _ = writeln!(out, "    n{} -> n{} [color={}];", u.0, v.0, girth_color(girth));
        }
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    Ok(out)
}
