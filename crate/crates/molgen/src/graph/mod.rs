//! Undirected labeled graphs and the graph algorithms the rest of the
//! pipeline is built on: neighborhoods, BFS ordering, betweenness
//! centrality, isomorphism testing and canonical keys.
//!
//! Vertices carry an atom-type index, edges a bond-type index; both index
//! into the type tables of a [`crate::ingest::DatasetSpec`]. Indices keep
//! the labels exactly one-hot by construction.

mod iso;
mod traversal;

pub use iso::{canonical_key, is_isomorphic};
pub use traversal::{betweenness, bfs_order};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One undirected edge, stored once with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Bond-type index into the dataset's edge type table.
    pub label: usize,
}

/// Undirected molecular graph with typed vertices and edges.
///
/// Invariants, enforced by the mutating methods:
/// - edges are stored once with `u < v`; neighbor queries see both directions
/// - no self-loops, no duplicate edges
/// - vertex indices are dense `0..|V|`
#[derive(Debug, Clone, Default)]
pub struct MolecularGraph {
    vertex_types: Vec<usize>,
    edges: Vec<Edge>,
    /// Per vertex: `(neighbor, edge index)` pairs, kept sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Two graphs are equal when they have the same vertex types and the same
/// edge set; the order in which edges were inserted is irrelevant.
impl PartialEq for MolecularGraph {
    fn eq(&self, other: &Self) -> bool {
        if self.vertex_types != other.vertex_types || self.edges.len() != other.edges.len() {
            return false;
        }
        let sorted = |g: &MolecularGraph| {
            let mut e: Vec<(usize, usize, usize)> =
                g.edges.iter().map(|e| (e.u, e.v, e.label)).collect();
            e.sort_unstable();
            e
        };
        sorted(self) == sorted(other)
    }
}

impl Eq for MolecularGraph {}

impl MolecularGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a graph from a vertex type list and an edge list in one go.
    pub fn from_parts(vertex_types: Vec<usize>, edges: &[(usize, usize, usize)]) -> Result<Self> {
        let mut g = Self::new();
        for t in vertex_types {
            g.add_vertex(t);
        }
        for &(u, v, label) in edges {
            g.add_edge(u, v, label)?;
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_types.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_types.is_empty()
    }

    /// Type index of vertex `v`. Panics on out-of-range (internal use).
    pub fn vertex_type(&self, v: usize) -> usize {
        self.vertex_types[v]
    }

    pub fn vertex_types(&self) -> &[usize] {
        &self.vertex_types
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Appends a vertex and returns its index.
    pub fn add_vertex(&mut self, type_index: usize) -> usize {
        self.vertex_types.push(type_index);
        self.adjacency.push(Vec::new());
        self.vertex_types.len() - 1
    }

    /// Inserts the undirected edge `(u, v)`; rejects self-loops, duplicates
    /// and out-of-range endpoints.
    pub fn add_edge(&mut self, u: usize, v: usize, label: usize) -> Result<()> {
        let n = self.vertex_count();
        for &idx in &[u, v] {
            if idx >= n {
                return Err(Error::VertexOutOfRange { index: idx, len: n });
            }
        }
        if u == v {
            return Err(Error::InvalidEdge {
                u,
                v,
                reason: "self-loop".into(),
            });
        }
        if self.edge_between(u, v).is_some() {
            return Err(Error::InvalidEdge {
                u,
                v,
                reason: "duplicate edge".into(),
            });
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let idx = self.edges.len();
        self.edges.push(Edge { u: a, v: b, label });
        let pos_a = self.adjacency[a].partition_point(|&(w, _)| w < b);
        self.adjacency[a].insert(pos_a, (b, idx));
        let pos_b = self.adjacency[b].partition_point(|&(w, _)| w < a);
        self.adjacency[b].insert(pos_b, (a, idx));
        Ok(())
    }

    /// All vertices sharing an edge with `v`, ascending.
    pub fn neighbors(&self, v: usize) -> Result<Vec<usize>> {
        if v >= self.vertex_count() {
            return Err(Error::VertexOutOfRange {
                index: v,
                len: self.vertex_count(),
            });
        }
        Ok(self.adjacency[v].iter().map(|&(w, _)| w).collect())
    }

    /// `(neighbor, edge index)` pairs of `v`, sorted by neighbor.
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Index of the edge between `u` and `v`, if present.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.vertex_count() || v >= self.vertex_count() {
            return None;
        }
        self.adjacency[u]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|pos| self.adjacency[u][pos].1)
    }

    /// Label of the edge between `u` and `v`, if present.
    pub fn edge_label(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_between(u, v).map(|idx| self.edges[idx].label)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Induced subgraph on vertices `0..k`, preserving indices and labels.
    pub fn prefix(&self, k: usize) -> MolecularGraph {
        let mut g = MolecularGraph::new();
        for &t in &self.vertex_types[..k] {
            g.add_vertex(t);
        }
        for e in &self.edges {
            if e.u < k && e.v < k {
                g.add_edge(e.u, e.v, e.label).expect("prefix edge valid");
            }
        }
        g
    }

    /// Relabels vertices so the vertex at `order[p]` becomes index `p`.
    /// `order` must be a permutation of `0..|V|`.
    pub fn renumber(&self, order: &[usize]) -> Result<MolecularGraph> {
        let n = self.vertex_count();
        if order.len() != n {
            return Err(Error::Invariant(format!(
                "permutation length {} != vertex count {}",
                order.len(),
                n
            )));
        }
        let mut new_index = vec![usize::MAX; n];
        for (pos, &old) in order.iter().enumerate() {
            if old >= n || new_index[old] != usize::MAX {
                return Err(Error::Invariant("not a permutation".into()));
            }
            new_index[old] = pos;
        }
        let mut g = MolecularGraph::new();
        for &old in order {
            g.add_vertex(self.vertex_types[old]);
        }
        for e in &self.edges {
            g.add_edge(new_index[e.u], new_index[e.v], e.label)?;
        }
        Ok(g)
    }
}

/// Expansion priority over vertex types: lower rank is expanded first.
///
/// A total order over all types of a dataset; built from per-type mean
/// centrality with ties broken by type index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePriority {
    rank: Vec<usize>,
}

impl TypePriority {
    /// Identity priority: rank equals type index.
    pub fn identity(type_count: usize) -> Self {
        Self {
            rank: (0..type_count).collect(),
        }
    }

    /// Ranks types ascending by score, ties broken by type index.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[a]
                .partial_cmp(&scores[b])
                .expect("scores must not be NaN")
                .then(a.cmp(&b))
        });
        let mut rank = vec![0usize; scores.len()];
        for (r, &t) in order.iter().enumerate() {
            rank[t] = r;
        }
        Self { rank }
    }

    pub fn rank(&self, type_index: usize) -> usize {
        self.rank[type_index]
    }

    pub fn type_count(&self) -> usize {
        self.rank.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> MolecularGraph {
        MolecularGraph::from_parts(vec![0, 1, 0], &[(0, 1, 0), (1, 2, 0)]).unwrap()
    }

    #[test]
    fn neighbors_of_path_center() {
        let g = path3();
        assert_eq!(g.neighbors(1).unwrap(), vec![0, 2]);
        assert_eq!(g.neighbors(0).unwrap(), vec![1]);
    }

    #[test]
    fn neighbors_of_isolated_vertex() {
        let mut g = MolecularGraph::new();
        g.add_vertex(0);
        assert!(g.neighbors(0).unwrap().is_empty());
    }

    #[test]
    fn neighbors_of_triangle() {
        let g =
            MolecularGraph::from_parts(vec![0, 0, 0], &[(0, 1, 0), (1, 2, 0), (0, 2, 0)]).unwrap();
        assert_eq!(g.neighbors(0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn neighbors_out_of_range_is_error() {
        let g = path3();
        assert!(g.neighbors(3).is_err());
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        let mut g = MolecularGraph::new();
        g.add_vertex(0);
        g.add_vertex(0);
        assert!(g.add_edge(0, 0, 0).is_err());
        g.add_edge(0, 1, 0).unwrap();
        assert!(g.add_edge(1, 0, 1).is_err());
    }

    #[test]
    fn edges_stored_with_low_index_first() {
        let mut g = MolecularGraph::new();
        g.add_vertex(0);
        g.add_vertex(0);
        g.add_edge(1, 0, 2).unwrap();
        assert_eq!(g.edges()[0].u, 0);
        assert_eq!(g.edges()[0].v, 1);
        assert_eq!(g.edge_label(0, 1), Some(2));
        assert_eq!(g.edge_label(1, 0), Some(2));
    }

    #[test]
    fn connectivity() {
        let mut g = path3();
        assert!(g.is_connected());
        g.add_vertex(1);
        assert!(!g.is_connected());
    }

    #[test]
    fn prefix_keeps_internal_edges_only() {
        let g =
            MolecularGraph::from_parts(vec![0, 1, 2, 3], &[(0, 1, 0), (1, 2, 1), (2, 3, 0)])
                .unwrap();
        let p = g.prefix(3);
        assert_eq!(p.vertex_count(), 3);
        assert_eq!(p.edge_count(), 2);
        assert_eq!(p.vertex_type(2), 2);
    }

    #[test]
    fn renumber_is_isomorphic_relabeling() {
        let g = path3();
        let r = g.renumber(&[2, 1, 0]).unwrap();
        assert_eq!(r.vertex_type(0), 0);
        assert_eq!(r.edge_label(0, 1), Some(0));
        assert!(is_isomorphic(&g, &r));
    }

    #[test]
    fn priority_orders_by_score_then_index() {
        let p = TypePriority::from_scores(&[0.5, 0.0, 0.5, 0.1]);
        assert_eq!(p.rank(1), 0);
        assert_eq!(p.rank(3), 1);
        assert_eq!(p.rank(0), 2);
        assert_eq!(p.rank(2), 3);
    }
}
