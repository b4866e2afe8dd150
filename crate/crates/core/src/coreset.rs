//! The dictionary core: the set of words that following definitions from
//! (almost) anywhere eventually funnels into.
//!
//! Two routes compute it. [`sampled_core`] intersects the descendant sets of
//! randomly sampled start nodes, which is how the core is found in practice.
//! [`exact_core`] counts ancestors of every node through the condensation
//! DAG and keeps nodes reachable from a coverage fraction of the graph; it is
//! exact but needs per-component bitsets, so it refuses graphs where those
//! would not fit in memory.
//!
//! [`convergence_profile`] records how fast a single start node's reachable
//! set grows with distance; its half-height distance is the headline number
//! for how quickly definitions converge.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{descendant_mask, scc, DictGraph, NodeId};
use crate::ingest::WordList;
use crate::{Error, Result};

/// Growth of the reachable set from one start node, by BFS distance.
/// `cumulative[i]` is the number of distinct nodes reachable within distance
/// `i + 1`; the start itself counts only if a path returns to it.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceProfile {
    pub start: NodeId,
    pub cumulative: Vec<usize>,
    /// Smallest distance reaching at least half of the final count; `None`
    /// when nothing is reachable.
    pub half_height_distance: Option<u32>,
    /// True when the BFS reached a fixed point within `max_depth`.
    pub saturated: bool,
}

pub const DEFAULT_MAX_DEPTH: u32 = 60;

pub fn convergence_profile(
    g: &DictGraph,
    start: NodeId,
    max_depth: u32,
) -> Result<ConvergenceProfile> {
    g.check_node(start)?;
    if max_depth == 0 {
        return Err(Error::InvalidParameter(
            "max_depth must be at least 1".into(),
        ));
    }

    let n = g.node_count();
    let mut counted = vec![false; n];
    let mut expanded = vec![false; n];
    expanded[start.index()] = true;
    let mut frontier = vec![start];
    let mut cumulative = Vec::new();
    let mut count = 0usize;
    let mut saturated = false;

    for _ in 1..=max_depth {
        let mut next = Vec::new();
        let before = count;
        for &u in &frontier {
            for &w in g.succs(u) {
                if !counted[w.index()] {
                    counted[w.index()] = true;
                    count += 1;
                    if !expanded[w.index()] {
                        expanded[w.index()] = true;
                        next.push(w);
                    }
                }
            }
        }
        if count == before {
            // Fixed point; the previous entry already holds the total. A
            // start with no descendants still gets its single zero entry.
            if cumulative.is_empty() {
                cumulative.push(0);
            }
            saturated = true;
            break;
        }
        cumulative.push(count);
        frontier = next;
        if frontier.is_empty() {
            saturated = true;
            break;
        }
    }

    let final_count = count;
    let half_height_distance = if final_count == 0 {
        None
    } else {
        cumulative
            .iter()
            .position(|&c| 2 * c >= final_count)
            .map(|i| i as u32 + 1)
    };

    Ok(ConvergenceProfile {
        start,
        cumulative,
        half_height_distance,
        saturated,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampledCoreParams {
    pub sample_size: usize,
    pub seed: u64,
    /// Fraction of non-degenerate samples whose descendant set must contain a
    /// node for it to join the core.
    pub membership_threshold: f64,
    /// A sample is degenerate when its descendant set is smaller than this
    /// fraction of the graph; such samples sit in isolated pockets and are
    /// excluded.
    pub degeneracy_fraction: f64,
}

impl SampledCoreParams {
    pub fn new(seed: u64) -> Self {
        SampledCoreParams {
            sample_size: 100,
            seed,
            membership_threshold: 1.0,
            degeneracy_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleInfo {
    pub start: NodeId,
    pub descendant_count: usize,
    pub degenerate: bool,
}

/// Output of either core computation.
#[derive(Debug, Clone, Serialize)]
pub struct CoreSet {
    /// Core node ids, sorted ascending.
    pub members: Vec<NodeId>,
    /// Sampled starts in draw order; empty for the exact computation.
    pub samples: Vec<SampleInfo>,
    /// Per node: fraction of non-degenerate samples containing it (sampled
    /// route) or fraction of the graph that reaches it (exact route).
    pub membership_fraction: Vec<f64>,
}

impl CoreSet {
    pub fn degenerate_samples(&self) -> Vec<NodeId> {
        self.samples
            .iter()
            .filter(|s| s.degenerate)
            .map(|s| s.start)
            .collect()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.binary_search(&id).is_ok()
    }
}

/// Intersects descendant sets of `sample_size` uniformly sampled start nodes
/// (without replacement). Degenerate samples are excluded from the
/// intersection; if every sample is degenerate there is no core to speak of
/// and an error is returned.
pub fn sampled_core(g: &DictGraph, params: &SampledCoreParams) -> Result<CoreSet> {
    let n = g.node_count();
    if params.sample_size == 0 || params.sample_size > n {
        return Err(Error::InvalidParameter(format!(
            "sample_size must be in 1..={n}, got {}",
            params.sample_size
        )));
    }
    if !(0.0..=1.0).contains(&params.membership_threshold) || params.membership_threshold <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "membership_threshold must be in (0, 1], got {}",
            params.membership_threshold
        )));
    }
    if !(0.0..1.0).contains(&params.degeneracy_fraction) {
        return Err(Error::InvalidParameter(format!(
            "degeneracy_fraction must be in [0, 1), got {}",
            params.degeneracy_fraction
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let starts: Vec<NodeId> = rand::seq::index::sample(&mut rng, n, params.sample_size)
        .into_iter()
        .map(|i| NodeId(i as u32))
        .collect();

    let min_size = params.degeneracy_fraction * n as f64;
    let masks: Vec<(Vec<bool>, usize)> = starts
        .par_iter()
        .map(|&start| {
            let mask = descendant_mask(g, start);
            let count = mask.iter().filter(|&&b| b).count();
            (mask, count)
        })
        .collect();

    let samples: Vec<SampleInfo> = starts
        .iter()
        .zip(&masks)
        .map(|(&start, &(_, count))| SampleInfo {
            start,
            descendant_count: count,
            degenerate: (count as f64) < min_size,
        })
        .collect();

    let live = samples.iter().filter(|s| !s.degenerate).count();
    if live == 0 {
        return Err(Error::AllSamplesDegenerate {
            sample_size: params.sample_size,
            min_size: min_size.ceil() as usize,
        });
    }

    let mut containment = vec![0usize; n];
    for (sample, (mask, _)) in samples.iter().zip(&masks) {
        if sample.degenerate {
            continue;
        }
        for (slot, &bit) in containment.iter_mut().zip(mask) {
            if bit {
                *slot += 1;
            }
        }
    }

    let membership_fraction: Vec<f64> = containment
        .iter()
        .map(|&c| c as f64 / live as f64)
        .collect();
    let members: Vec<NodeId> = membership_fraction
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f >= params.membership_threshold)
        .map(|(i, _)| NodeId(i as u32))
        .collect();

    Ok(CoreSet {
        members,
        samples,
        membership_fraction,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactCoreParams {
    /// A node joins the core when at least this fraction of all nodes can
    /// reach it.
    pub coverage_fraction: f64,
    /// Upper bound on bitset memory for the ancestor sets.
    pub memory_cap_bytes: usize,
}

impl Default for ExactCoreParams {
    fn default() -> Self {
        ExactCoreParams {
            coverage_fraction: 0.99,
            memory_cap_bytes: 1 << 30,
        }
    }
}

/// Exact core membership from ancestor counts. For each condensation
/// component the set of ancestor components is carried as a bitset, unioned
/// in topological order; a node's ancestor count then adds the sizes of all
/// ancestor components, plus its own component when that component is a
/// cycle. The bitsets take `#SCC^2 / 8` bytes; graphs past `memory_cap_bytes`
/// are refused, and the sampled route is the fallback.
pub fn exact_core(g: &DictGraph, params: &ExactCoreParams) -> Result<CoreSet> {
    if !(0.0..=1.0).contains(&params.coverage_fraction) || params.coverage_fraction <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "coverage_fraction must be in (0, 1], got {}",
            params.coverage_fraction
        )));
    }
    let n = g.node_count();
    let partition = scc(g);
    let k = partition.component_count();
    let words = k.div_ceil(64);
    let needed = k.saturating_mul(words).saturating_mul(8);
    if needed > params.memory_cap_bytes {
        return Err(Error::MemoryCapExceeded {
            needed,
            cap: params.memory_cap_bytes,
        });
    }

    let sizes: Vec<usize> = partition.components.iter().map(|c| c.len()).collect();

    // Incoming condensation edges grouped by target component.
    let mut incoming: Vec<Vec<u32>> = vec![Vec::new(); k];
    for &(cu, cv) in &partition.condensation_edges {
        incoming[cv as usize].push(cu);
    }

    let mut bits: Vec<Vec<u64>> = vec![vec![0u64; words]; k];
    let mut ancestor_nodes = vec![0usize; k];
    // Component emission order is reverse topological, so walking indices
    // downward visits sources before their targets.
    for c in partition.topological_components() {
        let c = c as usize;
        let mut own = std::mem::take(&mut bits[c]);
        for &d in &incoming[c] {
            let d = d as usize;
            for (slot, &w) in own.iter_mut().zip(&bits[d]) {
                *slot |= w;
            }
            own[d / 64] |= 1u64 << (d % 64);
        }
        let mut total = 0usize;
        for (wi, &w) in own.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                total += sizes[wi * 64 + b];
                w &= w - 1;
            }
        }
        if sizes[c] >= 2 {
            total += sizes[c];
        }
        ancestor_nodes[c] = total;
        bits[c] = own;
    }

    let membership_fraction: Vec<f64> = (0..n)
        .map(|v| ancestor_nodes[partition.component_of[v] as usize] as f64 / n as f64)
        .collect();
    let members: Vec<NodeId> = membership_fraction
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f >= params.coverage_fraction)
        .map(|(i, _)| NodeId(i as u32))
        .collect();

    Ok(CoreSet {
        members,
        samples: Vec::new(),
        membership_fraction,
    })
}

/// One cell of the overlap table, for an unordered pair of lists shown as
/// (row, col). The percentage is relative to the column list's size, rounded
/// half-up to an integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapCell {
    pub row: usize,
    pub col: usize,
    pub intersection: usize,
    pub percent_of_col: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapTable {
    pub names: Vec<String>,
    pub sizes: Vec<usize>,
    pub cells: Vec<OverlapCell>,
}

impl OverlapTable {
    pub fn cell(&self, row: usize, col: usize) -> Option<&OverlapCell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "list sizes:");
        for (name, size) in self.names.iter().zip(&self.sizes) {
            let _ = writeln!(out, "  {name}: {size}");
        }
        let _ = writeln!(out, "overlaps (count, % of column list):");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "  {} & {}: {} ({}%)",
                self.names[c.row], self.names[c.col], c.intersection, c.percent_of_col
            );
        }
        out
    }
}

/// Pairwise overlaps between the core vocabulary and reference word lists.
/// The first table entry is the core list itself.
pub fn wordlist_overlap(core_words: &WordList, lists: &[WordList]) -> Result<OverlapTable> {
    let mut all: Vec<&WordList> = Vec::with_capacity(lists.len() + 1);
    all.push(core_words);
    all.extend(lists.iter());
    for list in &all {
        if list.is_empty() {
            return Err(Error::EmptyWordList {
                name: list.name.clone(),
            });
        }
    }

    let names = all.iter().map(|l| l.name.clone()).collect();
    let sizes: Vec<usize> = all.iter().map(|l| l.len()).collect();
    let mut cells = Vec::new();
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            let intersection = all[i].words.intersection(&all[j].words).count();
            let col_size = sizes[j];
            let percent_of_col = ((200 * intersection + col_size) / (2 * col_size)) as u32;
            cells.push(OverlapCell {
                row: i,
                col: j,
                intersection,
                percent_of_col,
            });
        }
    }

    Ok(OverlapTable {
        names,
        sizes,
        cells,
    })
}
