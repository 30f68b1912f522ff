//! Sequential graph construction from trained decision modules: seed a
//! vertex, expand one focus vertex at a time until its module says stop,
//! label each fresh edge, link each new vertex to earlier ones, and cap
//! the graph at a maximum size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MolecularGraph;
use crate::ingest::DatasetSpec;
use crate::modules::{m1_decide, m2_decide, m3_decide, ModuleKind, NodeDecision, TrainedModule};
use crate::sequencer::Decomposition;

/// Categorical distribution over vertex types for the seed vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDistribution {
    probs: Vec<f64>,
}

impl SeedDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("seed probabilities outside [0, 1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "seed probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(SeedDistribution { probs })
    }

    /// Point mass on one type; used to replay a known molecule.
    pub fn point(type_index: usize, type_count: usize) -> Self {
        let mut probs = vec![0.0; type_count];
        probs[type_index] = 1.0;
        SeedDistribution { probs }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Empirical distribution of the first vertex's type over the (renumbered)
/// training molecules.
pub fn estimate_d0(train: &[MolecularGraph], type_count: usize) -> Result<SeedDistribution> {
    if train.is_empty() {
        return Err(Error::Config("cannot estimate seed labels from an empty set".into()));
    }
    let mut counts = vec![0usize; type_count];
    for g in train {
        counts[g.vertex_type(0)] += 1;
    }
    let total = train.len() as f64;
    SeedDistribution::new(counts.iter().map(|&c| c as f64 / total).collect())
}

/// One recorded decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Seed { vertex_type: usize },
    Stop,
    Grow { vertex_type: usize },
    BondType { edge_type: usize },
    Link { other: usize, edge_type: Option<usize> },
}

/// One trace entry: which module decided, a summary of its input, and the
/// decision taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub module: String,
    pub vertices: usize,
    pub edges: usize,
    pub focus: usize,
    pub target: Option<usize>,
    pub decision: Decision,
}

/// A produced graph, its completion status, and the decision trace.
///
/// `complete` is false exactly when the size cap fired while expansion was
/// still pending; such graphs never count as valid molecules.
#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub graph: MolecularGraph,
    pub complete: bool,
    pub trace: Vec<TraceStep>,
}

/// The three decisions the construction loop needs. Implemented by trained
/// modules, by forced-replay streams, and by test stubs.
pub trait GenerationPolicy {
    /// Stop expanding `focus`, or grow a typed neighbor.
    fn node_decision(
        &mut self,
        g: &MolecularGraph,
        focus: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<NodeDecision>;

    /// Bond type for the fresh parent edge `(i, j)`, not yet in `g`.
    fn first_edge(
        &mut self,
        g: &MolecularGraph,
        i: usize,
        j: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize>;

    /// For each candidate `(k, j)` in order: `Some(edge type)` to link,
    /// `None` for disconnected. All decisions must come from one view of
    /// `g` (edge independence).
    fn link_decisions(
        &mut self,
        g: &MolecularGraph,
        i: usize,
        j: usize,
        candidates: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<usize>>>;
}

/// Runs the construction loop once.
///
/// The graph always stays connected: a new vertex is born attached to the
/// focus vertex. When the policy asks to grow past `vmax` vertices the
/// procedure stops and the outcome is flagged incomplete.
pub fn generate<P: GenerationPolicy>(
    policy: &mut P,
    d0: &SeedDistribution,
    vmax: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GenerationOutcome> {
    if vmax == 0 {
        return Err(Error::Config("vmax must be at least 1".into()));
    }
    let seed_type = d0.sample(rng);
    let mut g = MolecularGraph::new();
    g.add_vertex(seed_type);
    let mut trace = vec![TraceStep {
        module: "d0".into(),
        vertices: 0,
        edges: 0,
        focus: 0,
        target: None,
        decision: Decision::Seed {
            vertex_type: seed_type,
        },
    }];

    let mut complete = true;
    let mut focus = 0;
    'expansion: while focus < g.vertex_count() {
        loop {
            let decision = policy.node_decision(&g, focus, rng)?;
            trace.push(TraceStep {
                module: "m1".into(),
                vertices: g.vertex_count(),
                edges: g.edge_count(),
                focus,
                target: None,
                decision: match decision {
                    NodeDecision::Stop => Decision::Stop,
                    NodeDecision::Grow(t) => Decision::Grow { vertex_type: t },
                },
            });
            let new_type = match decision {
                NodeDecision::Stop => break,
                NodeDecision::Grow(t) => t,
            };
            if g.vertex_count() == vmax {
                // Cap reached with expansion pending.
                complete = false;
                break 'expansion;
            }
            let j = g.add_vertex(new_type);
            let edge_type = policy.first_edge(&g, focus, j, rng)?;
            trace.push(TraceStep {
                module: "m2".into(),
                vertices: g.vertex_count(),
                edges: g.edge_count(),
                focus,
                target: Some(j),
                decision: Decision::BondType { edge_type },
            });
            g.add_edge(focus, j, edge_type)?;

            let candidates: Vec<usize> = (0..j).filter(|&k| k != focus).collect();
            if !candidates.is_empty() {
                let links = policy.link_decisions(&g, focus, j, &candidates, rng)?;
                if links.len() != candidates.len() {
                    return Err(Error::Invariant(
                        "policy returned a link decision per candidate mismatch".into(),
                    ));
                }
                for (&k, &link) in candidates.iter().zip(&links) {
                    trace.push(TraceStep {
                        module: "m3".into(),
                        vertices: g.vertex_count(),
                        edges: g.edge_count(),
                        focus,
                        target: Some(j),
                        decision: Decision::Link {
                            other: k,
                            edge_type: link,
                        },
                    });
                    if let Some(t) = link {
                        g.add_edge(k, j, t)?;
                    }
                }
            }
        }
        focus += 1;
    }

    debug_assert!(g.is_connected());
    Ok(GenerationOutcome {
        graph: g,
        complete,
        trace,
    })
}

/// `n` independent generations with seeds derived from one master stream;
/// embarrassingly parallel and deterministic given the master seed.
/// Traces are kept only when `record_traces` is set (they grow
/// quadratically with graph size).
pub fn generate_batch<P>(
    policy: &P,
    n: usize,
    d0: &SeedDistribution,
    vmax: usize,
    master_rng: &mut ChaCha8Rng,
    record_traces: bool,
) -> Result<Vec<GenerationOutcome>>
where
    P: GenerationPolicy + Clone + Send + Sync,
{
    let seeds: Vec<u64> = (0..n).map(|_| master_rng.random()).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut policy = policy.clone();
            let mut outcome = generate(&mut policy, d0, vmax, &mut rng)?;
            if !record_traces {
                outcome.trace.clear();
            }
            Ok(outcome)
        })
        .collect()
}

/// Policy backed by the three trained modules at a fixed sampling
/// temperature.
#[derive(Clone)]
pub struct ModulePolicy<'a> {
    m1: &'a TrainedModule,
    m2: &'a TrainedModule,
    m3: &'a TrainedModule,
    spec: &'a DatasetSpec,
    tau: f64,
}

impl<'a> ModulePolicy<'a> {
    pub fn new(
        m1: &'a TrainedModule,
        m2: &'a TrainedModule,
        m3: &'a TrainedModule,
        spec: &'a DatasetSpec,
        tau: f64,
    ) -> Result<Self> {
        for (module, kind) in [
            (m1, ModuleKind::M1),
            (m2, ModuleKind::M2),
            (m3, ModuleKind::M3),
        ] {
            if module.kind != kind {
                return Err(Error::Config(format!(
                    "module of kind {} supplied where {} was expected",
                    module.kind.tag(),
                    kind.tag()
                )));
            }
            if module.mode != spec.mode {
                return Err(Error::Config(format!(
                    "module trained for {} used with a {} dataset",
                    module.mode, spec.mode
                )));
            }
        }
        Ok(ModulePolicy {
            m1,
            m2,
            m3,
            spec,
            tau,
        })
    }
}

impl GenerationPolicy for ModulePolicy<'_> {
    fn node_decision(
        &mut self,
        g: &MolecularGraph,
        focus: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<NodeDecision> {
        m1_decide(g, focus, self.m1, self.spec, self.tau, rng)
    }

    fn first_edge(
        &mut self,
        g: &MolecularGraph,
        i: usize,
        j: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        m2_decide(g, i, j, self.m2, self.spec, self.tau, rng)
    }

    fn link_decisions(
        &mut self,
        g: &MolecularGraph,
        i: usize,
        j: usize,
        candidates: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<usize>>> {
        let links = m3_decide(g, i, j, self.m3, self.spec, self.tau, rng)?;
        Ok(candidates
            .iter()
            .map(|&k| links.iter().find(|&&(l, _)| l == k).map(|&(_, t)| t))
            .collect())
    }
}

/// Policy that replays a decomposition's supervisions verbatim. Feeding it
/// through [`generate`] (with a point-mass seed distribution on the source
/// molecule's first vertex type) reconstructs the source molecule.
#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    m1: std::collections::VecDeque<usize>,
    m2: std::collections::VecDeque<usize>,
    m3: std::collections::VecDeque<Vec<(usize, usize)>>,
}

impl ReplayPolicy {
    pub fn new(d: &Decomposition) -> Self {
        ReplayPolicy {
            m1: d.m1.iter().map(|e| e.supervision).collect(),
            m2: d.m2.iter().map(|e| e.supervision).collect(),
            m3: d
                .m3
                .iter()
                .map(|e| {
                    e.candidates
                        .iter()
                        .map(|c| (c.other, c.supervision))
                        .collect()
                })
                .collect(),
        }
    }

    /// All three supervision streams fully consumed.
    pub fn exhausted(&self) -> bool {
        self.m1.is_empty() && self.m2.is_empty() && self.m3.is_empty()
    }
}

impl GenerationPolicy for ReplayPolicy {
    fn node_decision(
        &mut self,
        _g: &MolecularGraph,
        _focus: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<NodeDecision> {
        let s = self
            .m1
            .pop_front()
            .ok_or_else(|| Error::Invariant("replay ran out of node decisions".into()))?;
        Ok(if s == 0 {
            NodeDecision::Stop
        } else {
            NodeDecision::Grow(s - 1)
        })
    }

    fn first_edge(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        self.m2
            .pop_front()
            .ok_or_else(|| Error::Invariant("replay ran out of edge labels".into()))
    }

    fn link_decisions(
        &mut self,
        _g: &MolecularGraph,
        _i: usize,
        _j: usize,
        candidates: &[usize],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<usize>>> {
        let step = self
            .m3
            .pop_front()
            .ok_or_else(|| Error::Invariant("replay ran out of link decisions".into()))?;
        if step.len() != candidates.len()
            || step.iter().map(|&(k, _)| k).ne(candidates.iter().cloned())
        {
            return Err(Error::Invariant(
                "replay candidate set diverged from the construction loop".into(),
            ));
        }
        Ok(step
            .iter()
            .map(|&(_, s)| if s == 0 { None } else { Some(s - 1) })
            .collect())
    }
}

#[cfg(test)]
mod tests;
