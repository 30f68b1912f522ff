//! The graph neural engine: synchronous state relaxation over a labeled
//! graph, node/edge output heads, and exact gradients through the unrolled
//! relaxation.
//!
//! Per-vertex states start as the embedded input label and are updated in
//! parallel by a learned two-layer MLP consuming the previous state and the
//! aggregated neighbor messages `(state, edge encoding)`, until the largest
//! per-vertex state change falls below `epsilon` or `k_max` iterations are
//! reached. Outputs read the relaxed states: the node head at one vertex,
//! the edge head at a pair plus its input edge encoding.

mod adam;
mod mlp;
mod sampling;

pub use adam::{adam_step, OptimizerState};
pub use mlp::{Matrix, Mlp};
pub use sampling::{
    anneal_tau, gumbel_sample, log_softmax, softmax, xent_grad, xent_loss, AnnealSchedule,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which output function a model implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Node,
    Edge,
}

/// Neighbor message aggregation: element-wise sum, or arithmetic mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Avg,
}

/// Parameters and hyperparameters of one GNN module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub head_kind: HeadKind,
    pub aggregation: Aggregation,
    pub k_max: usize,
    pub epsilon: f64,
    pub state_dim: usize,
    /// Width of vertex input labels; embedded into the leading state
    /// components at iteration zero.
    pub label_dim: usize,
    /// Width of edge input encodings (bond types plus the candidate slot).
    pub edge_dim: usize,
    pub class_count: usize,
    pub state_mlp: Mlp,
    pub output_mlp: Mlp,
}

impl GnnModel {
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: rand::Rng>(
        head_kind: HeadKind,
        aggregation: Aggregation,
        k_max: usize,
        epsilon: f64,
        state_dim: usize,
        label_dim: usize,
        edge_dim: usize,
        class_count: usize,
        hidden_state: usize,
        hidden_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if state_dim < label_dim {
            return Err(Error::Shape(format!(
                "state_dim {state_dim} must be at least label_dim {label_dim}"
            )));
        }
        if k_max == 0 {
            return Err(Error::Shape("k_max must be at least 1".into()));
        }
        let head_in = match head_kind {
            HeadKind::Node => state_dim,
            HeadKind::Edge => 2 * state_dim + edge_dim,
        };
        Ok(GnnModel {
            head_kind,
            aggregation,
            k_max,
            epsilon,
            state_dim,
            label_dim,
            edge_dim,
            class_count,
            state_mlp: Mlp::init(2 * state_dim + edge_dim, hidden_state, state_dim, rng),
            output_mlp: Mlp::init(head_in, hidden_out, class_count, rng),
        })
    }

    pub fn param_count(&self) -> usize {
        self.state_mlp.param_count() + self.output_mlp.param_count()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.state_mlp.params().chain(self.output_mlp.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.state_mlp
            .params_mut()
            .chain(self.output_mlp.params_mut())
    }
}

/// Gradient accumulator mirroring a model's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub state_mlp: Mlp,
    pub output_mlp: Mlp,
}

impl Gradients {
    pub fn zeros_like(model: &GnnModel) -> Self {
        Gradients {
            state_mlp: model.state_mlp.zeros_like(),
            output_mlp: model.output_mlp.zeros_like(),
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.state_mlp.params().chain(self.output_mlp.params())
    }

    pub fn scale(&mut self, factor: f64) {
        for p in self
            .state_mlp
            .params_mut()
            .chain(self.output_mlp.params_mut())
        {
            *p *= factor;
        }
    }
}

/// The numeric view of a graph the engine consumes: per-vertex input label
/// vectors and per-edge input encodings, adjacency shared in both
/// directions.
#[derive(Debug, Clone)]
pub struct InputGraph {
    labels: Vec<Vec<f64>>,
    /// Per vertex: `(neighbor, edge slot)`.
    neighbors: Vec<Vec<(usize, usize)>>,
    edge_enc: Vec<Vec<f64>>,
}

impl InputGraph {
    pub fn new(labels: Vec<Vec<f64>>) -> Self {
        let n = labels.len();
        InputGraph {
            labels,
            neighbors: vec![Vec::new(); n],
            edge_enc: Vec::new(),
        }
    }

    /// Adds an undirected edge with a shared input encoding; returns its
    /// slot for later head reads.
    pub fn add_edge(&mut self, u: usize, v: usize, enc: Vec<f64>) -> usize {
        let slot = self.edge_enc.len();
        self.edge_enc.push(enc);
        self.neighbors[u].push((v, slot));
        self.neighbors[v].push((u, slot));
        slot
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_encoding(&self, slot: usize) -> &[f64] {
        &self.edge_enc[slot]
    }
}

/// Retained forward pass: the full state trajectory plus the hidden
/// activations of every state-MLP application, for backpropagation through
/// the unrolled iterations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `states[k]` holds iteration `k`, flattened n x state_dim.
    pub states: Vec<Vec<f64>>,
    /// `hidden[k-1]` holds the state-MLP hidden layer of iteration `k`,
    /// flattened n x hidden_dim.
    hidden: Vec<Vec<f64>>,
    pub k_star: usize,
}

impl Trajectory {
    /// Relaxed state of vertex `v`.
    pub fn state(&self, v: usize, state_dim: usize) -> &[f64] {
        &self.states[self.k_star][v * state_dim..(v + 1) * state_dim]
    }
}

/// Aggregated neighbor message for vertex `v` given the previous states.
///
/// Contributions are accumulated in an order keyed by the message values
/// themselves, not the neighbor indices, so relabeling a graph permutes
/// states bit-exactly.
fn aggregate(
    g: &InputGraph,
    prev: &[f64],
    v: usize,
    state_dim: usize,
    edge_dim: usize,
    aggregation: Aggregation,
    out: &mut [f64],
) {
    out.fill(0.0);
    let incident = &g.neighbors[v];
    if incident.is_empty() {
        // A lone vertex receives the zero message.
        return;
    }
    let mut order: Vec<usize> = (0..incident.len()).collect();
    order.sort_by(|&a, &b| {
        let (ja, ea) = incident[a];
        let (jb, eb) = incident[b];
        let sa = &prev[ja * state_dim..(ja + 1) * state_dim];
        let sb = &prev[jb * state_dim..(jb + 1) * state_dim];
        let key = |s: &[f64], enc: &[f64]| -> Vec<u64> {
            s.iter().chain(enc).map(|x| x.to_bits()).collect()
        };
        key(sa, &g.edge_enc[ea]).cmp(&key(sb, &g.edge_enc[eb]))
    });
    for idx in order {
        let (j, e) = incident[idx];
        let s = &prev[j * state_dim..(j + 1) * state_dim];
        for (o, x) in out[..state_dim].iter_mut().zip(s) {
            *o += x;
        }
        for (o, x) in out[state_dim..state_dim + edge_dim]
            .iter_mut()
            .zip(&g.edge_enc[e])
        {
            *o += x;
        }
    }
    if aggregation == Aggregation::Avg {
        let inv = 1.0 / incident.len() as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
    }
}

/// Runs the synchronous state relaxation and retains the trajectory.
///
/// States start as the embedded input labels; iteration stops at the first
/// `k` where every vertex moved less than `epsilon` (Euclidean norm), or at
/// `k_max`.
pub fn state_relax(g: &InputGraph, model: &GnnModel) -> Trajectory {
    let n = g.vertex_count();
    assert!(n > 0, "state relaxation needs a nonempty graph");
    let sd = model.state_dim;
    let hd = model.state_mlp.hidden_dim();

    let mut s0 = vec![0.0; n * sd];
    for (v, label) in g.labels.iter().enumerate() {
        debug_assert_eq!(label.len(), model.label_dim);
        s0[v * sd..v * sd + label.len()].copy_from_slice(label);
    }

    let mut states = vec![s0];
    let mut hidden = Vec::new();
    let mut x = vec![0.0; 2 * sd + model.edge_dim];
    let mut k_star = model.k_max;
    for k in 1..=model.k_max {
        let prev = &states[k - 1];
        let mut next = vec![0.0; n * sd];
        let mut h = vec![0.0; n * hd];
        let mut max_delta_sq: f64 = 0.0;
        for v in 0..n {
            let (s_prev, agg) = x.split_at_mut(sd);
            s_prev.copy_from_slice(&prev[v * sd..(v + 1) * sd]);
            aggregate(g, prev, v, sd, model.edge_dim, model.aggregation, agg);
            model
                .state_mlp
                .forward(&x, &mut h[v * hd..(v + 1) * hd], &mut next[v * sd..(v + 1) * sd]);
            let delta_sq: f64 = next[v * sd..(v + 1) * sd]
                .iter()
                .zip(&prev[v * sd..(v + 1) * sd])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            max_delta_sq = max_delta_sq.max(delta_sq);
        }
        states.push(next);
        hidden.push(h);
        if model.epsilon > 0.0 && max_delta_sq.sqrt() < model.epsilon {
            k_star = k;
            break;
        }
    }
    Trajectory {
        states,
        hidden,
        k_star,
    }
}

/// Where a head read its input, with the caches backward needs.
#[derive(Debug, Clone)]
pub enum HeadRead {
    Node(usize),
    Edge { u: usize, v: usize, slot: usize },
}

/// One output-head application: logits plus retained activations.
#[derive(Debug, Clone)]
pub struct HeadOutput {
    pub logits: Vec<f64>,
    read: HeadRead,
    x: Vec<f64>,
    hidden: Vec<f64>,
}

/// Output for vertex `v` from the relaxed states.
pub fn node_head(model: &GnnModel, traj: &Trajectory, v: usize) -> Result<HeadOutput> {
    if model.head_kind != HeadKind::Node {
        return Err(Error::Shape("node head requested from an edge model".into()));
    }
    let x = traj.state(v, model.state_dim).to_vec();
    let mut hidden = vec![0.0; model.output_mlp.hidden_dim()];
    let mut logits = vec![0.0; model.class_count];
    model.output_mlp.forward(&x, &mut hidden, &mut logits);
    Ok(HeadOutput {
        logits,
        read: HeadRead::Node(v),
        x,
        hidden,
    })
}

/// Output for the edge in `slot` between `u` (the earlier/expanded vertex)
/// and `v`, consuming both relaxed states and the edge's input encoding.
pub fn edge_head(
    model: &GnnModel,
    g: &InputGraph,
    traj: &Trajectory,
    u: usize,
    v: usize,
    slot: usize,
) -> Result<HeadOutput> {
    if model.head_kind != HeadKind::Edge {
        return Err(Error::Shape("edge head requested from a node model".into()));
    }
    let sd = model.state_dim;
    let mut x = Vec::with_capacity(2 * sd + model.edge_dim);
    x.extend_from_slice(traj.state(u, sd));
    x.extend_from_slice(traj.state(v, sd));
    x.extend_from_slice(&g.edge_enc[slot]);
    let mut hidden = vec![0.0; model.output_mlp.hidden_dim()];
    let mut logits = vec![0.0; model.class_count];
    model.output_mlp.forward(&x, &mut hidden, &mut logits);
    Ok(HeadOutput {
        logits,
        read: HeadRead::Edge { u, v, slot },
        x,
        hidden,
    })
}

/// Exact gradients of a scalar loss with respect to every parameter,
/// unrolling all `k_star` relaxation iterations.
///
/// `head_grads` pairs each head application with the loss gradient at its
/// logits. Gradients accumulate into `grads`.
pub fn backward(
    model: &GnnModel,
    g: &InputGraph,
    traj: &Trajectory,
    head_grads: &[(&HeadOutput, Vec<f64>)],
    grads: &mut Gradients,
) {
    let n = g.vertex_count();
    let sd = model.state_dim;

    // Head backward: collect loss gradient with respect to the relaxed
    // states.
    let mut ds = vec![0.0; n * sd];
    for (head, dlogits) in head_grads {
        let mut dx = vec![0.0; head.x.len()];
        model
            .output_mlp
            .backward(&head.x, &head.hidden, dlogits, &mut grads.output_mlp, Some(&mut dx));
        match head.read {
            HeadRead::Node(v) => {
                for (d, g) in ds[v * sd..(v + 1) * sd].iter_mut().zip(&dx) {
                    *d += g;
                }
            }
            HeadRead::Edge { u, v, .. } => {
                for (d, g) in ds[u * sd..(u + 1) * sd].iter_mut().zip(&dx[..sd]) {
                    *d += g;
                }
                for (d, g) in ds[v * sd..(v + 1) * sd].iter_mut().zip(&dx[sd..2 * sd]) {
                    *d += g;
                }
                // The edge-encoding block of dx is input, not parameter.
            }
        }
    }

    // Through the unrolled iterations, newest first.
    let mut x = vec![0.0; 2 * sd + model.edge_dim];
    let hd = model.state_mlp.hidden_dim();
    for k in (1..=traj.k_star).rev() {
        let prev = &traj.states[k - 1];
        let h_layer = &traj.hidden[k - 1];
        let mut ds_prev = vec![0.0; n * sd];
        for v in 0..n {
            let dy = &ds[v * sd..(v + 1) * sd];
            if dy.iter().all(|&d| d == 0.0) {
                continue;
            }
            let (s_prev, agg) = x.split_at_mut(sd);
            s_prev.copy_from_slice(&prev[v * sd..(v + 1) * sd]);
            aggregate(g, prev, v, sd, model.edge_dim, model.aggregation, agg);

            let mut dx = vec![0.0; 2 * sd + model.edge_dim];
            model.state_mlp.backward(
                &x,
                &h_layer[v * hd..(v + 1) * hd],
                dy,
                &mut grads.state_mlp,
                Some(&mut dx),
            );
            // Direct dependence on the vertex's own previous state.
            for (d, g) in ds_prev[v * sd..(v + 1) * sd].iter_mut().zip(&dx[..sd]) {
                *d += g;
            }
            // Message dependence on each neighbor's previous state.
            let coeff = match model.aggregation {
                Aggregation::Sum => 1.0,
                Aggregation::Avg => 1.0 / g.neighbors[v].len().max(1) as f64,
            };
            for &(j, _) in &g.neighbors[v] {
                for (d, gval) in ds_prev[j * sd..(j + 1) * sd]
                    .iter_mut()
                    .zip(&dx[sd..2 * sd])
                {
                    *d += coeff * gval;
                }
            }
        }
        ds = ds_prev;
    }
}
