//! Node-to-component walk counts and their low-rank structure.
//!
//! For each component k and node n, the matrix entry counts directed walks
//! of length 1 through `max_walk_length` that start at n and end on a member
//! of k. Columns whose support covers too much of the dictionary carry no
//! discriminating signal and can be pruned before the SVD.

use rayon::prelude::*;
use serde::Serialize;

use crate::decompose::ComponentSet;
use crate::graph::{DictGraph, NodeId};
use crate::{Error, Result};

pub const DEFAULT_MAX_WALK_LENGTH: u32 = 5;

#[derive(Debug, Clone, Serialize)]
pub struct WalkMatrix {
    /// Row count, one row per graph node.
    pub rows: usize,
    /// Component id of each column.
    pub component_ids: Vec<usize>,
    /// Sparse columns, (row, count) sorted by row.
    pub columns: Vec<Vec<(u32, u64)>>,
    pub max_walk_length: u32,
    /// Columns removed by ubiquity pruning.
    pub pruned_components: Vec<usize>,
    /// Number of times a count hit the u64 ceiling and stuck there.
    pub saturation_events: u64,
}

impl WalkMatrix {
    pub fn col_count(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        let row = row as u32;
        match self.columns[col].binary_search_by_key(&row, |&(r, _)| r) {
            Ok(i) => self.columns[col][i].1,
            Err(_) => 0,
        }
    }

    pub fn nonzeros(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.col_count()]; self.rows];
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, count) in col {
                dense[r as usize][c] = count as f64;
            }
        }
        dense
    }
}

fn sat_add(acc: u64, add: u64, events: &mut u64) -> u64 {
    match acc.checked_add(add) {
        Some(v) => v,
        None => {
            *events += 1;
            u64::MAX
        }
    }
}

/// Counts walks of length 1..=`max_walk_length` from every node into every
/// component. Counts that overflow u64 stick at the ceiling and are tallied
/// in `saturation_events`.
pub fn walk_counts(
    g: &DictGraph,
    cs: &ComponentSet,
    max_walk_length: u32,
) -> Result<WalkMatrix> {
    if max_walk_length == 0 {
        return Err(Error::InvalidParameter(
            "max_walk_length must be at least 1".into(),
        ));
    }
    let n = g.node_count();

    let per_component: Vec<(Vec<(u32, u64)>, u64)> = cs
        .components
        .par_iter()
        .map(|comp| {
            let mut events = 0u64;
            // y[m] = walks of the current length from m into the component.
            let mut y = vec![0u64; n];
            for &m in &comp.members {
                y[m.index()] = 1;
            }
            let mut acc = vec![0u64; n];
            for _ in 0..max_walk_length {
                let mut next = vec![0u64; n];
                for u in 0..n {
                    let mut total = 0u64;
                    for &w in g.succs(NodeId(u as u32)) {
                        total = sat_add(total, y[w.index()], &mut events);
                    }
                    next[u] = total;
                }
                for u in 0..n {
                    acc[u] = sat_add(acc[u], next[u], &mut events);
                }
                y = next;
            }
            let col: Vec<(u32, u64)> = acc
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(r, &c)| (r as u32, c))
                .collect();
            (col, events)
        })
        .collect();

    let mut columns = Vec::with_capacity(per_component.len());
    let mut saturation_events = 0u64;
    for (col, events) in per_component {
        columns.push(col);
        saturation_events += events;
    }

    Ok(WalkMatrix {
        rows: n,
        component_ids: cs.components.iter().map(|c| c.id).collect(),
        columns,
        max_walk_length,
        pruned_components: Vec::new(),
        saturation_events,
    })
}

/// Drops columns whose support exceeds `max_fraction` of all rows. Those
/// components are reachable from almost everywhere, so they dominate every
/// node's profile without separating anything.
pub fn prune_ubiquitous(m: &WalkMatrix, max_fraction: f64) -> Result<WalkMatrix> {
    if !(max_fraction > 0.0 && max_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "prune fraction must be in (0, 1], got {max_fraction}"
        )));
    }
    let limit = max_fraction * m.rows as f64;
    let mut component_ids = Vec::new();
    let mut columns = Vec::new();
    let mut pruned = m.pruned_components.clone();
    for (id, col) in m.component_ids.iter().zip(&m.columns) {
        if col.len() as f64 > limit {
            pruned.push(*id);
        } else {
            component_ids.push(*id);
            columns.push(col.clone());
        }
    }
    Ok(WalkMatrix {
        rows: m.rows,
        component_ids,
        columns,
        max_walk_length: m.max_walk_length,
        pruned_components: pruned,
        saturation_events: m.saturation_events,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SvdResult {
    /// Descending, one per kept triplet.
    pub singular_values: Vec<f64>,
    /// Right singular vectors over columns, parallel to `component_ids`.
    pub right_vectors: Vec<Vec<f64>>,
    /// Left singular vectors over rows.
    pub left_vectors: Vec<Vec<f64>>,
    pub component_ids: Vec<usize>,
    /// Set when the matrix rank fell short of the requested count.
    pub truncated_rank: Option<usize>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (unsorted) and eigenvectors as columns of `v`.
fn jacobi_eigen(a: &mut [Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n == 0 {
        return (Vec::new(), v);
    }

    let norm: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let tol = norm.max(1.0) * 1e-14;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r][p];
                    let arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p][r];
                    let aqr = a[q][r];
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

fn sparse_dot(a: &[(u32, u64)], b: &[(u32, u64)]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    let mut j = 0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    total
}

const RANK_CUTOFF: f64 = 1e-12;

/// Top-k singular triplets of the walk matrix, computed from the column Gram
/// matrix. Singular values descend; each right vector has its largest entry
/// made positive. If the numerical rank is below k, only rank-many triplets
/// come back and `truncated_rank` records it.
pub fn svd_topk(m: &WalkMatrix, k: usize) -> Result<SvdResult> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "requested singular triplet count must be at least 1".into(),
        ));
    }
    let cols = m.col_count();

    let mut gram = vec![vec![0.0; cols]; cols];
    for i in 0..cols {
        for j in i..cols {
            let d = sparse_dot(&m.columns[i], &m.columns[j]);
            gram[i][j] = d;
            gram[j][i] = d;
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(&mut gram);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));

    let sigma_max = order
        .first()
        .map(|&i| eigenvalues[i].max(0.0).sqrt())
        .unwrap_or(0.0);
    let rank = order
        .iter()
        .take_while(|&&i| eigenvalues[i].max(0.0).sqrt() > sigma_max * RANK_CUTOFF)
        .count();
    let keep = k.min(rank);

    let mut singular_values = Vec::with_capacity(keep);
    let mut right_vectors = Vec::with_capacity(keep);
    let mut left_vectors = Vec::with_capacity(keep);
    for &idx in order.iter().take(keep) {
        let sigma = eigenvalues[idx].max(0.0).sqrt();
        let mut right: Vec<f64> = (0..cols).map(|r| vectors[r][idx]).collect();

        // Left vector from W v / sigma, scattering sparse columns.
        let mut left = vec![0.0; m.rows];
        for (c, col) in m.columns.iter().enumerate() {
            let weight = right[c];
            if weight == 0.0 {
                continue;
            }
            for &(r, count) in col {
                left[r as usize] += count as f64 * weight;
            }
        }
        for x in &mut left {
            *x /= sigma;
        }

        // Largest-magnitude right entry points positive.
        let lead = right
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        if let Some(lead) = lead {
            if right[lead] < 0.0 {
                right.iter_mut().for_each(|x| *x = -*x);
                left.iter_mut().for_each(|x| *x = -*x);
            }
        }

        singular_values.push(sigma);
        right_vectors.push(right);
        left_vectors.push(left);
    }

    Ok(SvdResult {
        singular_values,
        right_vectors,
        left_vectors,
        component_ids: m.component_ids.clone(),
        truncated_rank: (keep < k).then_some(rank),
    })
}

pub const THEME_COEFF_FLOOR: f64 = 0.1;

/// Readable summary of each singular direction: the components loading on it
/// beyond the coefficient floor, strongest first, with their words.
pub fn theme_report(
    g: &DictGraph,
    cs: &ComponentSet,
    svd: &SvdResult,
    top_n: usize,
) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (i, (sigma, right)) in svd
        .singular_values
        .iter()
        .zip(&svd.right_vectors)
        .enumerate()
    {
        let _ = writeln!(out, "theme {i} (weight {sigma:.3})");
        let mut loaded: Vec<(usize, f64)> = svd
            .component_ids
            .iter()
            .zip(right)
            .filter(|&(_, &coeff)| coeff.abs() > THEME_COEFF_FLOOR)
            .map(|(&id, &coeff)| (id, coeff))
            .collect();
        loaded.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        for (id, coeff) in loaded.into_iter().take(top_n) {
            let words = cs
                .components
                .iter()
                .find(|c| c.id == id)
                .map(|c| {
                    c.members
                        .iter()
                        .take(6)
                        .map(|&m| g.node(m).word())
                        .collect::<Vec<_>>()
                        .join(", ")
                })
                .unwrap_or_default();
            let _ = writeln!(out, "  component {id} ({coeff:+.3}): {words}");
        }
    }
    if let Some(rank) = svd.truncated_rank {
        let _ = writeln!(out, "note: matrix rank {rank} capped the theme count");
    }
    out
}
