//! Shared test support: a synthetic molecule corpus, an SDF writer, and
//! the independent brute-force oracles the acceptance suite checks
//! against.

#![allow(dead_code)]

use molgen::chem::check_valence;
use molgen::gnn::{
    backward, edge_head, node_head, state_relax, xent_grad, xent_loss, GnnModel, Gradients,
    HeadOutput, InputGraph,
};
use molgen::graph::MolecularGraph;
use molgen::ingest::DatasetSpec;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// QM9 vertex types.
pub const H: usize = 0;
pub const C: usize = 1;
pub const N: usize = 2;
pub const O: usize = 3;
pub const F: usize = 4;

const VALENCE: [usize; 5] = [1, 4, 3, 2, 1];

/// Incremental molecule builder with per-vertex spare-valence tracking.
struct Builder {
    g: MolecularGraph,
    spare: Vec<usize>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            g: MolecularGraph::new(),
            spare: Vec::new(),
        }
    }

    fn add_atom(&mut self, t: usize) -> usize {
        self.spare.push(VALENCE[t]);
        self.g.add_vertex(t)
    }

    /// `order`: 0 single, 1 double, 2 triple.
    fn bond(&mut self, u: usize, v: usize, order: usize) {
        assert!(self.spare[u] > order && self.spare[v] > order || {
            self.spare[u] >= order + 1 && self.spare[v] >= order + 1
        });
        self.spare[u] -= order + 1;
        self.spare[v] -= order + 1;
        self.g.add_edge(u, v, order).unwrap();
    }

    /// Fills every remaining valence unit with an explicit hydrogen.
    fn fill_hydrogens(&mut self) {
        for v in 0..self.spare.len() {
            while self.spare[v] > 0 {
                let h = self.g.add_vertex(H);
                self.spare.push(0);
                self.spare[v] -= 1;
                self.g.add_edge(v, h, 0).unwrap();
            }
        }
    }

    fn finish(mut self) -> MolecularGraph {
        self.fill_hydrogens();
        self.g
    }
}

fn pick(rng: &mut ChaCha8Rng, weighted: &[(usize, f64)]) -> usize {
    let total: f64 = weighted.iter().map(|&(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for &(value, w) in weighted {
        x -= w;
        if x < 0.0 {
            return value;
        }
    }
    weighted.last().unwrap().0
}

/// Builds one ring with deterministic bond orders: walking the cycle, an
/// edge is double whenever both endpoints can spare two units beyond
/// their still-pending ring edges. Composition decides the pattern,
/// nothing else.
fn build_ring(b: &mut Builder, atoms: &[usize]) -> Vec<usize> {
    let ring: Vec<usize> = atoms.iter().map(|&t| b.add_atom(t)).collect();
    let r = ring.len();
    for i in 0..r {
        let u = ring[i];
        let v = ring[(i + 1) % r];
        let closing = i + 1 == r;
        // The first atom still owes the closing edge; the target atom
        // always owes one more ring edge unless this is the closing one.
        let reserve_u = usize::from(u == ring[0] && !closing);
        let reserve_v = usize::from(!closing);
        let order = usize::from(
            !closing && b.spare[u] >= 2 + reserve_u && b.spare[v] >= 2 + reserve_v,
        );
        b.bond(u, v, order);
    }
    ring
}

/// Spends spare valence on deterministic-bond substituents: a carbon with
/// two spare units gets a carbonyl oxygen, single spare units become
/// fluorine or are left for hydrogen fill.
fn decorate(b: &mut Builder, v: usize, rng: &mut ChaCha8Rng) {
    if b.g.vertex_type(v) == C && b.spare[v] >= 2 && rng.random_bool(0.6) {
        let o = b.add_atom(O);
        b.bond(v, o, 1);
    }
    while b.spare[v] > 0 {
        if rng.random_bool(0.45) {
            let f = b.add_atom(F);
            b.bond(v, f, 0);
        } else {
            break; // hydrogen fill takes the rest
        }
    }
}

/// A small ring-dense molecule: most supervisions are ring closures and
/// typed ring bonds rather than hydrogen filler.
fn tiny_ring_molecule(rng: &mut ChaCha8Rng) -> MolecularGraph {
    let mut b = Builder::new();
    let r = if rng.random_bool(0.7) { 3 } else { 4 };
    let atoms: Vec<usize> = (0..r)
        .map(|_| pick(rng, &[(C, 0.25), (N, 0.45), (O, 0.30)]))
        .collect();
    let ring = build_ring(&mut b, &atoms);
    // Deterministic chord across a 4-ring whenever the diagonal pair can
    // carry it.
    if r == 4 && b.spare[ring[0]] >= 1 && b.spare[ring[2]] >= 1 {
        b.bond(ring[0], ring[2], 0);
    }
    for &v in &ring {
        decorate(&mut b, v, rng);
    }
    b.finish()
}

/// A medium molecule: five-ring plus a short tail; supplies structural
/// variety for novelty at a modest candidate cost.
fn medium_molecule(rng: &mut ChaCha8Rng) -> MolecularGraph {
    let mut b = Builder::new();
    let atoms: Vec<usize> = (0..5)
        .map(|_| pick(rng, &[(C, 0.4), (N, 0.4), (O, 0.2)]))
        .collect();
    let ring = build_ring(&mut b, &atoms);
    // One optional tail on the first ring atom with spare valence.
    if let Some(&v) = ring.iter().find(|&&v| b.spare[v] >= 1) {
        if rng.random_bool(0.7) {
            let c = b.add_atom(C);
            b.bond(v, c, 0);
            if b.spare[c] >= 3 && rng.random_bool(0.3) {
                let n = b.add_atom(N);
                b.bond(c, n, 2);
            } else if rng.random_bool(0.3) {
                let c2 = b.add_atom(C);
                b.bond(c, c2, 0);
            }
        }
    }
    for &v in &ring {
        decorate(&mut b, v, rng);
    }
    b.finish()
}

/// Deterministic synthetic corpus of valid explicit-hydrogen molecules.
/// Ring-dense tiny molecules dominate so that ring closures carry weight
/// in the linking supervisions; medium molecules supply variety.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<MolecularGraph> {
    let spec = DatasetSpec::qm9();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(n);
    while corpus.len() < n {
        let g = if rng.random_bool(0.9) {
            tiny_ring_molecule(&mut rng)
        } else {
            medium_molecule(&mut rng)
        };
        if g.vertex_count() > spec.max_vertices {
            continue;
        }
        let (valid, violations) = check_valence(&g, &spec);
        assert!(valid, "toy corpus must be valid: {violations:?}");
        assert!(g.is_connected());
        corpus.push(g);
    }
    corpus
}

/// Renders molecules as a V2000 SDF document.
pub fn write_sdf(graphs: &[MolecularGraph], spec: &DatasetSpec) -> String {
    let mut out = String::new();
    for (i, g) in graphs.iter().enumerate() {
        out.push_str(&format!("toy-{i}\n  molgen\n\n"));
        out.push_str(&format!(
            "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n",
            g.vertex_count(),
            g.edge_count()
        ));
        for v in 0..g.vertex_count() {
            out.push_str(&format!(
                "{:>10.4}{:>10.4}{:>10.4} {:<3}0  0  0  0  0  0  0  0  0  0  0  0\n",
                0.0,
                0.0,
                0.0,
                spec.vertex_types[g.vertex_type(v)]
            ));
        }
        for e in g.edges() {
            out.push_str(&format!(
                "{:>3}{:>3}{:>3}  0\n",
                e.u + 1,
                e.v + 1,
                e.label + 1
            ));
        }
        out.push_str("M  END\n$$$$\n");
    }
    out
}

// ---------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------

/// Every shortest path from `s` to `t`, enumerated explicitly.
fn all_shortest_paths(g: &MolecularGraph, s: usize, t: usize) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    let mut dist = vec![usize::MAX; n];
    dist[s] = 0;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v).unwrap() {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist[t] == usize::MAX {
        return Vec::new();
    }
    let mut paths = Vec::new();
    let mut stack = vec![vec![s]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        if last == t {
            paths.push(path);
            continue;
        }
        for w in g.neighbors(last).unwrap() {
            if dist[w] == dist[last] + 1 && dist[w] <= dist[t] {
                let mut next = path.clone();
                next.push(w);
                stack.push(next);
            }
        }
    }
    paths
}

/// Normalized betweenness by explicit path enumeration; the independent
/// oracle for the production implementation.
pub fn brute_betweenness(g: &MolecularGraph) -> Vec<f64> {
    let n = g.vertex_count();
    let mut scores = vec![0.0; n];
    if n < 3 {
        return scores;
    }
    for s in 0..n {
        for t in (s + 1)..n {
            let paths = all_shortest_paths(g, s, t);
            if paths.is_empty() {
                continue;
            }
            let total = paths.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count() as f64;
                scores[v] += through / total;
            }
        }
    }
    let normalizer = ((n - 1) * (n - 2)) as f64 / 2.0;
    for s in &mut scores {
        *s /= normalizer;
    }
    scores
}

/// Exhaustive permutation isomorphism check, usable up to ~7 vertices.
pub fn brute_isomorphic(g1: &MolecularGraph, g2: &MolecularGraph) -> bool {
    let n = g1.vertex_count();
    if n != g2.vertex_count() || g1.edge_count() != g2.edge_count() {
        return false;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    fn rec(g1: &MolecularGraph, g2: &MolecularGraph, perm: &mut Vec<usize>, k: usize) -> bool {
        let n = perm.len();
        if k == n {
            for v in 0..n {
                if g1.vertex_type(v) != g2.vertex_type(perm[v]) {
                    return false;
                }
            }
            return g1
                .edges()
                .iter()
                .all(|e| g2.edge_label(perm[e.u], perm[e.v]) == Some(e.label));
        }
        for i in k..n {
            perm.swap(k, i);
            if rec(g1, g2, perm, k + 1) {
                perm.swap(k, i);
                return true;
            }
            perm.swap(k, i);
        }
        false
    }
    rec(g1, g2, &mut perm, 0)
}

// ---------------------------------------------------------------------
// Finite-difference gradient oracle
// ---------------------------------------------------------------------

pub enum Read {
    Node(usize),
    Edge { u: usize, v: usize, slot: usize },
}

fn apply_heads(model: &GnnModel, g: &InputGraph, reads: &[(Read, usize)]) -> Vec<HeadOutput> {
    let traj = state_relax(g, model);
    reads
        .iter()
        .map(|(read, _)| match *read {
            Read::Node(v) => node_head(model, &traj, v).unwrap(),
            Read::Edge { u, v, slot } => edge_head(model, g, &traj, u, v, slot).unwrap(),
        })
        .collect()
}

fn loss_of(model: &GnnModel, g: &InputGraph, reads: &[(Read, usize)]) -> f64 {
    apply_heads(model, g, reads)
        .iter()
        .zip(reads)
        .map(|(head, (_, target))| xent_loss(&head.logits, *target, None))
        .sum()
}

/// Maximum relative error between analytic gradients and central finite
/// differences over every parameter.
pub fn gradient_check(model: &GnnModel, g: &InputGraph, reads: &[(Read, usize)]) -> f64 {
    let traj = state_relax(g, model);
    let heads = apply_heads(model, g, reads);
    let pairs: Vec<(&HeadOutput, Vec<f64>)> = heads
        .iter()
        .zip(reads)
        .map(|(h, (_, target))| (h, xent_grad(&h.logits, *target, None)))
        .collect();
    let mut grads = Gradients::zeros_like(model);
    backward(model, g, &traj, &pairs, &mut grads);
    let analytic: Vec<f64> = grads.params().cloned().collect();

    let h = 1e-5;
    let mut m = model.clone();
    let mut worst = 0.0f64;
    for i in 0..m.param_count() {
        let orig = *m.params().nth(i).unwrap();
        *m.params_mut().nth(i).unwrap() = orig + h;
        let up = loss_of(&m, g, reads);
        *m.params_mut().nth(i).unwrap() = orig - h;
        let down = loss_of(&m, g, reads);
        *m.params_mut().nth(i).unwrap() = orig;
        let fd = (up - down) / (2.0 * h);
        let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(rel);
    }
    worst
}

pub fn onehot(dim: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    v
}
