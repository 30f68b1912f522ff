//! Labeled graph isomorphism: invariant prefilter plus exact backtracking,
//! and a permutation-invariant key for deduplication.

use crate::graph::MolecularGraph;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed ^ FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Iterated neighborhood-label refinement. Returns one color per vertex;
/// any isomorphism maps vertices onto equal colors.
fn refinement_colors(g: &MolecularGraph) -> Vec<u64> {
    let n = g.vertex_count();
    let mut colors: Vec<u64> = (0..n)
        .map(|v| fnv1a(0, &(g.vertex_type(v) as u64).to_le_bytes()))
        .collect();
    let mut distinct = partition_size(&colors);
    for _ in 0..n {
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            let mut neigh: Vec<(u64, u64)> = g
                .incident(v)
                .iter()
                .map(|&(w, e)| (g.edges()[e].label as u64, colors[w]))
                .collect();
            neigh.sort_unstable();
            let mut h = colors[v];
            for (label, c) in neigh {
                h = fnv1a(h, &label.to_le_bytes());
                h = fnv1a(h, &c.to_le_bytes());
            }
            next.push(h);
        }
        let next_distinct = partition_size(&next);
        colors = next;
        if next_distinct == distinct {
            break;
        }
        distinct = next_distinct;
    }
    colors
}

fn partition_size(colors: &[u64]) -> usize {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

/// Permutation-invariant byte key. Isomorphic graphs always key equal;
/// unequal graphs usually differ but the occasional collision must be
/// resolved by [`is_isomorphic`].
pub fn canonical_key(g: &MolecularGraph) -> Vec<u8> {
    let mut colors = refinement_colors(g);
    colors.sort_unstable();
    let mut key = Vec::with_capacity(8 + colors.len() * 8);
    key.extend_from_slice(&(g.vertex_count() as u32).to_le_bytes());
    key.extend_from_slice(&(g.edge_count() as u32).to_le_bytes());
    for c in colors {
        key.extend_from_slice(&c.to_le_bytes());
    }
    key
}

/// Exact labeled-graph isomorphism test.
///
/// Fast invariants (counts, degree sequences, label multisets, refinement
/// colors) reject most non-isomorphic pairs; survivors go through a
/// backtracking search constrained to color-compatible assignments.
pub fn is_isomorphic(g1: &MolecularGraph, g2: &MolecularGraph) -> bool {
    let n = g1.vertex_count();
    if n != g2.vertex_count() || g1.edge_count() != g2.edge_count() {
        return false;
    }
    if n == 0 {
        return true;
    }

    let mut types1 = g1.vertex_types().to_vec();
    let mut types2 = g2.vertex_types().to_vec();
    types1.sort_unstable();
    types2.sort_unstable();
    if types1 != types2 {
        return false;
    }

    let sig = |g: &MolecularGraph| {
        let mut s: Vec<(usize, usize)> = (0..n).map(|v| (g.vertex_type(v), g.degree(v))).collect();
        s.sort_unstable();
        s
    };
    if sig(g1) != sig(g2) {
        return false;
    }

    let mut elabels1: Vec<usize> = g1.edges().iter().map(|e| e.label).collect();
    let mut elabels2: Vec<usize> = g2.edges().iter().map(|e| e.label).collect();
    elabels1.sort_unstable();
    elabels2.sort_unstable();
    if elabels1 != elabels2 {
        return false;
    }

    let colors1 = refinement_colors(g1);
    let colors2 = refinement_colors(g2);
    let mut sorted1 = colors1.clone();
    let mut sorted2 = colors2.clone();
    sorted1.sort_unstable();
    sorted2.sort_unstable();
    if sorted1 != sorted2 {
        return false;
    }

    // Map rarest colors first, preferring vertices attached to already
    // mapped ones so adjacency constraints bind early.
    let mut color_freq = std::collections::HashMap::new();
    for &c in &colors1 {
        *color_freq.entry(c).or_insert(0usize) += 1;
    }
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for _ in 0..n {
        let search_key = |v: usize, placed: &[bool]| {
            let attached = g1.incident(v).iter().any(|&(w, _)| placed[w]);
            (
                usize::from(!attached),
                color_freq[&colors1[v]],
                std::cmp::Reverse(g1.degree(v)),
                v,
            )
        };
        let v = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| search_key(v, &placed))
            .expect("unplaced vertex exists");
        placed[v] = true;
        order.push(v);
    }

    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    backtrack(g1, g2, &colors1, &colors2, &order, 0, &mut mapping, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    g1: &MolecularGraph,
    g2: &MolecularGraph,
    colors1: &[u64],
    colors2: &[u64],
    order: &[usize],
    depth: usize,
    mapping: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    'candidates: for w in 0..g2.vertex_count() {
        if used[w]
            || colors2[w] != colors1[v]
            || g2.vertex_type(w) != g1.vertex_type(v)
            || g2.degree(w) != g1.degree(v)
        {
            continue;
        }
        // Mapped neighbors must agree on edge presence and label, in both
        // directions.
        for &(u, e) in g1.incident(v) {
            if mapping[u] != usize::MAX
                && g2.edge_label(mapping[u], w) != Some(g1.edges()[e].label)
            {
                continue 'candidates;
            }
        }
        for &(x, e) in g2.incident(w) {
            if let Some(u) = inverse_of(mapping, x, used) {
                if g1.edge_label(u, v) != Some(g2.edges()[e].label) {
                    continue 'candidates;
                }
            }
        }
        mapping[v] = w;
        used[w] = true;
        if backtrack(g1, g2, colors1, colors2, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[v] = usize::MAX;
        used[w] = false;
    }
    false
}

fn inverse_of(mapping: &[usize], target: usize, used: &[bool]) -> Option<usize> {
    if !used[target] {
        return None;
    }
    mapping.iter().position(|&m| m == target)
}
