//! Decomposition of training molecules into ordered per-step supervised
//! examples for the three decision modules, after canonical BFS
//! renumbering, plus batch construction that keeps every molecule's
//! examples together.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{betweenness, bfs_order, MolecularGraph, TypePriority};
use crate::ingest::Mode;

/// One candidate edge of an additional-linking example: the earlier vertex
/// and its supervision (0 = disconnected, `1 + t` = edge type `t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEdge {
    pub other: usize,
    pub supervision: usize,
}

/// One supervised generative step.
///
/// `graph` is the decided part of the partial graph. For first-edge
/// examples the pair `(focus, target)` names the undecided candidate edge,
/// which is not part of `graph`; for linking examples every `(other,
/// target)` pair in `candidates` is a candidate edge. With those candidate
/// edges included, every snapshot is connected.
#[derive(Debug, Clone, PartialEq)]
pub struct StepExample {
    pub graph: MolecularGraph,
    pub focus: usize,
    pub target: Option<usize>,
    /// Node-generation examples: 0 = stop, `1 + t` = grow a type-`t`
    /// vertex. First-edge examples: the edge type. Unused for linking
    /// examples, whose supervision is per candidate.
    pub supervision: usize,
    pub candidates: Vec<CandidateEdge>,
}

/// The per-module example sequences of one molecule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decomposition {
    pub m1: Vec<StepExample>,
    pub m2: Vec<StepExample>,
    pub m3: Vec<StepExample>,
}

/// Renumbers a molecule by BFS from its original vertex 0.
pub fn reorder<R: Rng>(
    g: &MolecularGraph,
    prio: &TypePriority,
    rng: &mut R,
) -> Result<MolecularGraph> {
    let order = bfs_order(g, 0, prio, rng)?;
    g.renumber(&order)
}

/// Mean betweenness centrality per vertex type over a training set.
/// Types absent from the set score 0.
pub fn type_centrality_means(train: &[MolecularGraph], type_count: usize) -> Vec<f64> {
    let mut sums = vec![0.0f64; type_count];
    let mut counts = vec![0usize; type_count];
    for g in train {
        let scores = betweenness(g);
        for (v, &score) in scores.iter().enumerate() {
            let t = g.vertex_type(v);
            sums[t] += score;
            counts[t] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

/// Expansion priority from training-set centrality: lower mean betweenness
/// is expanded first.
pub fn type_priority_from_centrality(
    train: &[MolecularGraph],
    type_count: usize,
) -> TypePriority {
    TypePriority::from_scores(&type_centrality_means(train, type_count))
}

/// Construction parent of vertex `j`: its smallest-index earlier neighbor.
fn parent_of(g: &MolecularGraph, j: usize) -> Option<usize> {
    g.incident(j).iter().map(|&(w, _)| w).find(|&w| w < j)
}

/// Decomposes a BFS-renumbered molecule into the supervised step sequences
/// that replay its construction.
///
/// Node-generation examples number `2|V| - 1` (one per generated vertex
/// plus one stop per vertex), first-edge examples `|V| - 1`. Linking
/// examples exist for every generated vertex with a nonempty candidate
/// set, i.e. all but the first.
pub fn decompose(g: &MolecularGraph) -> Result<Decomposition> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::Invariant("cannot decompose an empty graph".into()));
    }
    // The vertex order must be realizable by the construction loop: every
    // vertex after the first attaches to an earlier one, and parents never
    // move backwards.
    let mut parents = Vec::with_capacity(n.saturating_sub(1));
    for j in 1..n {
        let p = parent_of(g, j).ok_or_else(|| {
            Error::Invariant(format!(
                "vertex {j} has no earlier neighbor; graph is not BFS-ordered"
            ))
        })?;
        if let Some(&prev) = parents.last() {
            if p < prev {
                return Err(Error::Invariant(format!(
                    "vertex {j} attaches to {p} after focus advanced past it; \
                     graph is not BFS-ordered"
                )));
            }
        }
        parents.push(p);
    }

    let mut out = Decomposition::default();
    let mut created = 1usize;
    for focus in 0..n {
        while created < n && parents[created - 1] == focus {
            let j = created;
            out.m1.push(StepExample {
                graph: g.prefix(j),
                focus,
                target: None,
                supervision: 1 + g.vertex_type(j),
                candidates: Vec::new(),
            });

            // First-edge snapshot: vertex j exists, its parent edge is the
            // candidate under prediction.
            out.m2.push(StepExample {
                graph: with_isolated_vertex(g, j),
                focus,
                target: Some(j),
                supervision: g
                    .edge_label(focus, j)
                    .expect("parent edge exists in the source molecule"),
                candidates: Vec::new(),
            });

            // Linking snapshot: the parent edge is decided, every other
            // earlier vertex is a candidate.
            let candidates: Vec<CandidateEdge> = (0..j)
                .filter(|&k| k != focus)
                .map(|k| CandidateEdge {
                    other: k,
                    supervision: g.edge_label(k, j).map_or(0, |t| 1 + t),
                })
                .collect();
            if !candidates.is_empty() {
                let mut snapshot = with_isolated_vertex(g, j);
                snapshot
                    .add_edge(focus, j, g.edge_label(focus, j).expect("parent edge"))
                    .expect("parent edge insertable");
                out.m3.push(StepExample {
                    graph: snapshot,
                    focus,
                    target: Some(j),
                    supervision: 0,
                    candidates,
                });
            }
            created += 1;
        }
        out.m1.push(StepExample {
            graph: g.prefix(created),
            focus,
            target: None,
            supervision: 0,
            candidates: Vec::new(),
        });
    }
    Ok(out)
}

/// Vertices `0..=j` with the decided edges among `0..j` only.
fn with_isolated_vertex(g: &MolecularGraph, j: usize) -> MolecularGraph {
    let mut snapshot = g.prefix(j);
    snapshot.add_vertex(g.vertex_type(j));
    snapshot
}

/// Per-module example sets of a whole split, with molecule bookkeeping for
/// batching.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub m1: Vec<StepExample>,
    pub m2: Vec<StepExample>,
    pub m3: Vec<StepExample>,
    pub m1_molecule: Vec<usize>,
    pub m2_molecule: Vec<usize>,
    pub m3_molecule: Vec<usize>,
    pub molecule_count: usize,
}

impl TrainingSet {
    /// Decomposes every (already renumbered) molecule.
    pub fn build(molecules: &[MolecularGraph]) -> Result<Self> {
        let mut ts = TrainingSet::default();
        for (id, g) in molecules.iter().enumerate() {
            let d = decompose(g)?;
            ts.m1_molecule.extend(std::iter::repeat_n(id, d.m1.len()));
            ts.m2_molecule.extend(std::iter::repeat_n(id, d.m2.len()));
            ts.m3_molecule.extend(std::iter::repeat_n(id, d.m3.len()));
            ts.m1.extend(d.m1);
            ts.m2.extend(d.m2);
            ts.m3.extend(d.m3);
        }
        ts.molecule_count = molecules.len();
        Ok(ts)
    }
}

/// Example indices of one training batch, per module.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub m3: Vec<usize>,
}

/// Shuffles molecules and deals them into `batch_count` groups; every
/// example follows its molecule, so no generative sequence is split
/// across batches.
pub fn make_batches<R: Rng>(
    ts: &TrainingSet,
    batch_count: usize,
    rng: &mut R,
) -> Result<Vec<Batch>> {
    if batch_count == 0 || batch_count > ts.molecule_count {
        return Err(Error::Config(format!(
            "batch count {batch_count} must be in 1..={}",
            ts.molecule_count
        )));
    }
    let mut molecules: Vec<usize> = (0..ts.molecule_count).collect();
    molecules.shuffle(rng);
    let mut batch_of = vec![0usize; ts.molecule_count];
    for (pos, &m) in molecules.iter().enumerate() {
        batch_of[m] = pos % batch_count;
    }
    let mut batches = vec![Batch::default(); batch_count];
    for (i, &m) in ts.m1_molecule.iter().enumerate() {
        batches[batch_of[m]].m1.push(i);
    }
    for (i, &m) in ts.m2_molecule.iter().enumerate() {
        batches[batch_of[m]].m2.push(i);
    }
    for (i, &m) in ts.m3_molecule.iter().enumerate() {
        batches[batch_of[m]].m3.push(i);
    }
    Ok(batches)
}

// ---------------------------------------------------------------------
// Step-example cache: same line-delimited container as the graph cache,
// extended with the step fields.
// ---------------------------------------------------------------------

pub const STEP_CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct StepCacheHeader {
    format: String,
    version: u32,
    mode: Mode,
    module: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepRecord {
    molecule: usize,
    vertex_types: Vec<usize>,
    edges: Vec<[usize; 3]>,
    focus: usize,
    target: Option<usize>,
    supervision: usize,
    candidates: Vec<[usize; 2]>,
}

/// Writes one module's examples with their molecule ids.
pub fn write_step_cache<W: Write>(
    mut w: W,
    mode: Mode,
    module: &str,
    examples: &[StepExample],
    molecule_ids: &[usize],
) -> Result<()> {
    let header = StepCacheHeader {
        format: "molgen-steps".into(),
        version: STEP_CACHE_FORMAT_VERSION,
        mode,
        module: module.into(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for (ex, &mol) in examples.iter().zip(molecule_ids) {
        let record = StepRecord {
            molecule: mol,
            vertex_types: ex.graph.vertex_types().to_vec(),
            edges: ex.graph.edges().iter().map(|e| [e.u, e.v, e.label]).collect(),
            focus: ex.focus,
            target: ex.target,
            supervision: ex.supervision,
            candidates: ex
                .candidates
                .iter()
                .map(|c| [c.other, c.supervision])
                .collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&record).expect("record serializes"))?;
    }
    Ok(())
}

/// Reads a step cache back; returns examples and molecule ids.
pub fn read_step_cache<R: BufRead>(
    r: R,
    expected_mode: Mode,
    expected_module: &str,
) -> Result<(Vec<StepExample>, Vec<usize>)> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty step cache".into()))??;
    let header: StepCacheHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Format(format!("bad step cache header: {e}")))?;
    if header.format != "molgen-steps" || header.version != STEP_CACHE_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported step cache {}/{}",
            header.format, header.version
        )));
    }
    if header.mode != expected_mode || header.module != expected_module {
        return Err(Error::Format(format!(
            "step cache is {}/{}, expected {}/{}",
            header.mode, header.module, expected_mode, expected_module
        )));
    }
    let mut examples = Vec::new();
    let mut ids = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StepRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        let mut graph = MolecularGraph::new();
        for t in record.vertex_types {
            graph.add_vertex(t);
        }
        for [u, v, label] in record.edges {
            graph.add_edge(u, v, label)?;
        }
        examples.push(StepExample {
            graph,
            focus: record.focus,
            target: record.target,
            supervision: record.supervision,
            candidates: record
                .candidates
                .into_iter()
                .map(|[other, supervision]| CandidateEdge { other, supervision })
                .collect(),
        });
        ids.push(record.molecule);
    }
    Ok((examples, ids))
}
