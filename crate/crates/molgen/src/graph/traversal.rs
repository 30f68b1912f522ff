//! BFS ordering and betweenness centrality.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{MolecularGraph, TypePriority};

/// Normalized betweenness centrality per vertex.
///
/// For each vertex the fraction of shortest paths between distinct pairs
/// `(s, t)` passing through it, divided by the `(n-1)(n-2)/2` pair count.
/// Graphs with fewer than three vertices score all zeros; on disconnected
/// graphs unreachable pairs contribute nothing.
pub fn betweenness(g: &MolecularGraph) -> Vec<f64> {
    let n = g.vertex_count();
    let mut scores = vec![0.0f64; n];
    if n < 3 {
        return scores;
    }

    // Brandes' accumulation: one BFS per source, dependencies propagated
    // back through the shortest-path DAG.
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        let mut delta = vec![0.0f64; n];

        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &(w, _) in g.incident(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }

        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                scores[w] += delta[w];
            }
        }
    }

    // Each unordered pair was visited from both endpoints; the pair-count
    // normalizer then maps onto [0, 1].
    let normalizer = ((n - 1) * (n - 2)) as f64;
    for score in &mut scores {
        *score /= normalizer;
    }
    scores
}

/// Breadth-first vertex ordering from `start`.
///
/// Vertices appear in nondecreasing BFS depth. Among the unvisited
/// neighbors of the node being expanded, types with lower priority rank
/// come first; remaining ties are broken by `rng`. Errors on disconnected
/// input.
pub fn bfs_order<R: Rng>(
    g: &MolecularGraph,
    start: usize,
    prio: &TypePriority,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = g.vertex_count();
    if start >= n {
        return Err(Error::VertexOutOfRange {
            index: start,
            len: n,
        });
    }
    for v in 0..n {
        if g.vertex_type(v) >= prio.type_count() {
            return Err(Error::Invariant(format!(
                "type priority covers {} types but vertex {} has type {}",
                prio.type_count(),
                v,
                g.vertex_type(v)
            )));
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    visited[start] = true;
    order.push(start);
    queue.push_back(start);

    while let Some(u) = queue.pop_front() {
        let mut frontier: Vec<usize> = g
            .incident(u)
            .iter()
            .map(|&(w, _)| w)
            .filter(|&w| !visited[w])
            .collect();
        // Shuffle first so the stable sort leaves equal-rank types in
        // random relative order.
        frontier.shuffle(rng);
        frontier.sort_by_key(|&w| prio.rank(g.vertex_type(w)));
        for w in frontier {
            visited[w] = true;
            order.push(w);
            queue.push_back(w);
        }
    }

    if order.len() != n {
        return Err(Error::Disconnected);
    }
    Ok(order)
}
