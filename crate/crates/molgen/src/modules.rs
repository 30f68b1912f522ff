//! The three decision modules over the GNN engine: node generation (m1),
//! first-edge classification (m2), and additional linking (m3).
//! Configuration presets, graph-to-input encoding, module invocation, and
//! independent per-module training.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{
    adam_step, anneal_tau, backward, edge_head, gumbel_sample, log_softmax, node_head,
    state_relax, xent_grad, xent_loss, Aggregation, AnnealSchedule, GnnModel, Gradients,
    HeadKind, HeadOutput, InputGraph, OptimizerState,
};
use crate::graph::MolecularGraph;
use crate::ingest::{DatasetSpec, Mode};
use crate::sequencer::{Batch, StepExample, TrainingSet};

/// Which decision module a configuration or checkpoint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleKind {
    /// Node generation: stop the focus vertex's expansion or grow a typed
    /// neighbor.
    M1,
    /// First-edge classification: bond type of the fresh parent edge.
    M2,
    /// Additional linking: classify every provisional edge to an earlier
    /// vertex as a bond type or disconnected.
    M3,
}

impl ModuleKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModuleKind::M1 => "m1",
            ModuleKind::M2 => "m2",
            ModuleKind::M3 => "m3",
        }
    }

    pub fn head_kind(&self) -> HeadKind {
        match self {
            ModuleKind::M1 => HeadKind::Node,
            ModuleKind::M2 | ModuleKind::M3 => HeadKind::Edge,
        }
    }

    pub fn class_count(&self, spec: &DatasetSpec) -> usize {
        let (m1, m2, m3) = spec.module_class_counts();
        match self {
            ModuleKind::M1 => m1,
            ModuleKind::M2 => m2,
            ModuleKind::M3 => m3,
        }
    }
}

impl std::str::FromStr for ModuleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(ModuleKind::M1),
            "m2" => Ok(ModuleKind::M2),
            "m3" => Ok(ModuleKind::M3),
            other => Err(Error::Config(format!("unknown module '{other}'"))),
        }
    }
}

/// Everything needed to build and train one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleConfig {
    pub kind: ModuleKind,
    pub aggregation: Aggregation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub k_max: usize,
    pub hidden_state: usize,
    pub hidden_out: usize,
    pub class_weighted: bool,
    pub anneal: AnnealSchedule,
    pub state_dim: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Optional extension: append a focus indicator to vertex input labels.
    /// Off by default; the focus vertex is otherwise distinguished purely
    /// by where the output is read.
    pub focus_flag: bool,
}

impl ModuleConfig {
    #[allow(clippy::too_many_arguments)]
    fn base(
        kind: ModuleKind,
        aggregation: Aggregation,
        epochs: usize,
        learning_rate: f64,
        k_max: usize,
        hidden_state: usize,
        hidden_out: usize,
        class_weighted: bool,
    ) -> Self {
        ModuleConfig {
            kind,
            aggregation,
            epochs,
            learning_rate,
            k_max,
            hidden_state,
            hidden_out,
            class_weighted,
            anneal: AnnealSchedule::linear(epochs),
            state_dim: 20,
            epsilon: 1e-3,
            seed: 0,
            focus_flag: false,
        }
    }

    /// Named hyperparameter presets.
    pub fn preset(name: &str) -> Option<ModuleConfig> {
        use Aggregation::{Avg, Sum};
        use ModuleKind::{M1, M2, M3};
        let cfg = match name.to_ascii_lowercase().as_str() {
            "m1-i" => Self::base(M1, Sum, 700, 4e-3, 5, 30, 50, false),
            "m1-ii" => Self::base(M1, Sum, 1500, 2e-3, 6, 100, 60, false),
            "m1-iii" => Self::base(M1, Sum, 2000, 1e-5, 6, 100, 60, false),
            "m2-i" => Self::base(M2, Avg, 500, 2e-3, 3, 20, 50, false),
            "m2-ii" => Self::base(M2, Avg, 1000, 1e-3, 4, 40, 60, false),
            "m3-i" => Self::base(M3, Avg, 500, 2e-3, 6, 20, 50, false),
            "m3-ii" => Self::base(M3, Sum, 500, 2e-3, 6, 20, 50, false),
            "m3-iii" => Self::base(M3, Avg, 500, 2e-3, 6, 20, 50, true),
            "m3-iv" => Self::base(M3, Sum, 500, 2e-3, 6, 20, 50, true),
            "m1-zinc" => Self::base(M1, Sum, 2000, 1e-3, 6, 150, 80, false),
            "m2-zinc" => Self::base(M2, Avg, 1000, 1e-3, 4, 50, 70, false),
            "m3-zinc" => Self::base(M3, Avg, 500, 2e-3, 6, 20, 50, false),
            _ => return None,
        };
        Some(cfg)
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "m1-i", "m1-ii", "m1-iii", "m2-i", "m2-ii", "m3-i", "m3-ii", "m3-iii", "m3-iv",
            "m1-zinc", "m2-zinc", "m3-zinc",
        ]
    }

    fn label_dim(&self, spec: &DatasetSpec) -> usize {
        spec.vertex_type_count() + usize::from(self.focus_flag)
    }

    /// Freshly initialized model for this configuration.
    pub fn init_model(&self, spec: &DatasetSpec, rng: &mut ChaCha8Rng) -> Result<GnnModel> {
        GnnModel::init(
            self.kind.head_kind(),
            self.aggregation,
            self.k_max,
            self.epsilon,
            self.state_dim,
            self.label_dim(spec),
            spec.edge_input_dim(),
            self.kind.class_count(spec),
            self.hidden_state,
            self.hidden_out,
            rng,
        )
    }
}

/// A trained module ready for generation: model parameters plus the
/// manifest the checkpoint carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModule {
    pub kind: ModuleKind,
    pub mode: Mode,
    pub preset: Option<String>,
    /// Class priors estimated from the training examples; present exactly
    /// when the module was trained with class weights, and re-multiplied
    /// onto the output probabilities at inference.
    pub priors: Option<Vec<f64>>,
    pub focus_flag: bool,
    pub model: GnnModel,
}

// ---------------------------------------------------------------------
// Graph encoding
// ---------------------------------------------------------------------

fn onehot(dim: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    v
}

/// Encoding of a decided edge label, or of the reserved candidate slot.
fn edge_encoding(spec: &DatasetSpec, label: Option<usize>) -> Vec<f64> {
    match label {
        Some(l) => onehot(spec.edge_input_dim(), l),
        None => onehot(spec.edge_input_dim(), spec.edge_type_count()),
    }
}

/// Builds the engine input for a decided graph plus candidate edges.
/// Returns the input and the slot of each candidate, in order.
pub fn build_input(
    g: &MolecularGraph,
    candidates: &[(usize, usize)],
    spec: &DatasetSpec,
    focus: usize,
    focus_flag: bool,
) -> (InputGraph, Vec<usize>) {
    let labels = (0..g.vertex_count())
        .map(|v| {
            let mut l = onehot(spec.vertex_type_count(), g.vertex_type(v));
            if focus_flag {
                l.push(if v == focus { 1.0 } else { 0.0 });
            }
            l
        })
        .collect();
    let mut input = InputGraph::new(labels);
    for e in g.edges() {
        input.add_edge(e.u, e.v, edge_encoding(spec, Some(e.label)));
    }
    let slots = candidates
        .iter()
        .map(|&(u, v)| input.add_edge(u, v, edge_encoding(spec, None)))
        .collect();
    (input, slots)
}

// ---------------------------------------------------------------------
// Module invocation
// ---------------------------------------------------------------------

/// Outcome of one node-generation decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeDecision {
    Stop,
    Grow(usize),
}

/// Logits adjusted for sampling: prior re-multiplication in log space when
/// the module was trained with class weights.
fn sampling_logits(module: &TrainedModule, logits: &[f64]) -> Vec<f64> {
    match &module.priors {
        None => logits.to_vec(),
        Some(priors) => log_softmax(logits)
            .iter()
            .zip(priors)
            .map(|(&lp, &p)| lp + p.ln())
            .collect(),
    }
}

/// Deterministic prediction (validation / inspection): argmax after prior
/// re-multiplication.
fn predict(module: &TrainedModule, logits: &[f64]) -> usize {
    let adjusted = sampling_logits(module, logits);
    adjusted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("comparable logits"))
        .map(|(i, _)| i)
        .expect("nonempty logits")
}

/// Stop the focus vertex's expansion, or grow a typed neighbor.
pub fn m1_decide(
    g: &MolecularGraph,
    focus: usize,
    module: &TrainedModule,
    spec: &DatasetSpec,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NodeDecision> {
    if module.kind != ModuleKind::M1 {
        return Err(Error::Shape("m1_decide needs an m1 module".into()));
    }
    if focus >= g.vertex_count() {
        return Err(Error::VertexOutOfRange {
            index: focus,
            len: g.vertex_count(),
        });
    }
    let (input, _) = build_input(g, &[], spec, focus, module.focus_flag);
    let traj = state_relax(&input, &module.model);
    let head = node_head(&module.model, &traj, focus)?;
    let (class, _) = gumbel_sample(&sampling_logits(module, &head.logits), tau, rng);
    Ok(if class == 0 {
        NodeDecision::Stop
    } else {
        NodeDecision::Grow(class - 1)
    })
}

/// Bond type of the undecided parent edge `(i, j)`.
pub fn m2_decide(
    g: &MolecularGraph,
    i: usize,
    j: usize,
    module: &TrainedModule,
    spec: &DatasetSpec,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if module.kind != ModuleKind::M2 {
        return Err(Error::Shape("m2_decide needs an m2 module".into()));
    }
    let n = g.vertex_count();
    if i >= n || j >= n {
        return Err(Error::VertexOutOfRange {
            index: i.max(j),
            len: n,
        });
    }
    if g.edge_between(i, j).is_some() {
        return Err(Error::InvalidEdge {
            u: i,
            v: j,
            reason: "edge already decided; no candidate to classify".into(),
        });
    }
    let (input, slots) = build_input(g, &[(i, j)], spec, i, module.focus_flag);
    let traj = state_relax(&input, &module.model);
    let head = edge_head(&module.model, &input, &traj, i, j, slots[0])?;
    let (class, _) = gumbel_sample(&sampling_logits(module, &head.logits), tau, rng);
    Ok(class)
}

/// Classifies every provisional edge from the new vertex `j` to the other
/// vertices (except the expanded vertex `i`) in one shot: a single state
/// relaxation over the graph extended with all candidates, one independent
/// sample per candidate. Returns the retained `(other, bond type)` links.
pub fn m3_decide(
    g: &MolecularGraph,
    i: usize,
    j: usize,
    module: &TrainedModule,
    spec: &DatasetSpec,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    if module.kind != ModuleKind::M3 {
        return Err(Error::Shape("m3_decide needs an m3 module".into()));
    }
    let candidates: Vec<(usize, usize)> = (0..g.vertex_count())
        .filter(|&k| k != i && k != j && g.edge_between(k, j).is_none())
        .map(|k| (k, j))
        .collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let (input, slots) = build_input(g, &candidates, spec, i, module.focus_flag);
    let traj = state_relax(&input, &module.model);
    let mut links = Vec::new();
    for (&(k, _), &slot) in candidates.iter().zip(&slots) {
        let head = edge_head(&module.model, &input, &traj, k, j, slot)?;
        let (class, _) = gumbel_sample(&sampling_logits(module, &head.logits), tau, rng);
        if class > 0 {
            links.push((k, class - 1));
        }
    }
    Ok(links)
}

// ---------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------

/// Per-epoch training statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub tau: f64,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

/// Training log: per-epoch stats and the retained best epoch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: Option<f64>,
}

fn examples_of(ts: &TrainingSet, kind: ModuleKind) -> &[StepExample] {
    match kind {
        ModuleKind::M1 => &ts.m1,
        ModuleKind::M2 => &ts.m2,
        ModuleKind::M3 => &ts.m3,
    }
}

fn batch_indices(batch: &Batch, kind: ModuleKind) -> &[usize] {
    match kind {
        ModuleKind::M1 => &batch.m1,
        ModuleKind::M2 => &batch.m2,
        ModuleKind::M3 => &batch.m3,
    }
}

/// Supervision classes of one example, in output order.
fn targets_of(ex: &StepExample, kind: ModuleKind) -> Vec<usize> {
    match kind {
        ModuleKind::M1 | ModuleKind::M2 => vec![ex.supervision],
        ModuleKind::M3 => ex.candidates.iter().map(|c| c.supervision).collect(),
    }
}

/// Empirical class frequencies over all supervised outputs.
fn estimate_priors(examples: &[StepExample], kind: ModuleKind, class_count: usize) -> Vec<f64> {
    let mut counts = vec![0usize; class_count];
    for ex in examples {
        for t in targets_of(ex, kind) {
            counts[t] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect()
}

/// Forward one example: state relaxation plus every head read.
fn forward_example(
    model: &GnnModel,
    spec: &DatasetSpec,
    focus_flag: bool,
    ex: &StepExample,
    kind: ModuleKind,
) -> Result<(InputGraph, crate::gnn::Trajectory, Vec<HeadOutput>)> {
    match kind {
        ModuleKind::M1 => {
            let (input, _) = build_input(&ex.graph, &[], spec, ex.focus, focus_flag);
            let traj = state_relax(&input, model);
            let head = node_head(model, &traj, ex.focus)?;
            Ok((input, traj, vec![head]))
        }
        ModuleKind::M2 => {
            let j = ex.target.ok_or_else(|| {
                Error::Invariant("first-edge example without target".into())
            })?;
            let (input, slots) =
                build_input(&ex.graph, &[(ex.focus, j)], spec, ex.focus, focus_flag);
            let traj = state_relax(&input, model);
            let head = edge_head(model, &input, &traj, ex.focus, j, slots[0])?;
            Ok((input, traj, vec![head]))
        }
        ModuleKind::M3 => {
            let j = ex
                .target
                .ok_or_else(|| Error::Invariant("linking example without target".into()))?;
            let candidates: Vec<(usize, usize)> =
                ex.candidates.iter().map(|c| (c.other, j)).collect();
            let (input, slots) = build_input(&ex.graph, &candidates, spec, ex.focus, focus_flag);
            let traj = state_relax(&input, model);
            let heads = ex
                .candidates
                .iter()
                .zip(&slots)
                .map(|(c, &slot)| edge_head(model, &input, &traj, c.other, j, slot))
                .collect::<Result<Vec<_>>>()?;
            Ok((input, traj, heads))
        }
    }
}

/// Trains one module on its example set: per epoch, anneal the sampling
/// temperature, iterate the fixed batches accumulating exact gradients of
/// the (optionally class-weighted) cross-entropy on Gumbel-softmax
/// outputs, and take one Adam step per batch. The checkpoint retains the
/// epoch with the best validation single-step accuracy.
pub fn train_module(
    cfg: &ModuleConfig,
    spec: &DatasetSpec,
    train: &TrainingSet,
    batches: &[Batch],
    val: &TrainingSet,
) -> Result<(TrainedModule, TrainingLog)> {
    let kind = cfg.kind;
    let examples = examples_of(train, kind);
    for ex in examples {
        for t in targets_of(ex, kind) {
            if t >= kind.class_count(spec) {
                return Err(Error::Invariant(format!(
                    "supervision {t} outside the {} output space",
                    kind.tag()
                )));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = cfg.init_model(spec, &mut rng)?;

    let class_count = kind.class_count(spec);
    let priors = cfg
        .class_weighted
        .then(|| estimate_priors(examples, kind, class_count));
    let weights: Option<Vec<f64>> = priors.as_ref().map(|p| {
        p.iter()
            .map(|&x| if x > 0.0 { 1.0 / x } else { 0.0 })
            .collect()
    });

    let mut module = TrainedModule {
        kind,
        mode: spec.mode,
        preset: None,
        priors: priors.clone(),
        focus_flag: cfg.focus_flag,
        model: model.clone(),
    };

    let mut opt = OptimizerState::new(&model, cfg.learning_rate);
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, usize, GnnModel)> = None;

    for epoch in 0..cfg.epochs {
        let tau = anneal_tau(epoch, &cfg.anneal);
        let mut epoch_loss = 0.0;
        let mut epoch_outputs = 0usize;
        for batch in batches {
            let indices = batch_indices(batch, kind);
            if indices.is_empty() {
                continue;
            }
            let mut grads = Gradients::zeros_like(&model);
            let mut outputs = 0usize;
            for &idx in indices {
                let ex = &examples[idx];
                let (input, traj, heads) =
                    forward_example(&model, spec, cfg.focus_flag, ex, kind)?;
                let targets = targets_of(ex, kind);
                let mut head_grads = Vec::with_capacity(heads.len());
                for (head, &target) in heads.iter().zip(&targets) {
                    // Gumbel-softmax output layer: the loss reads the
                    // annealed, noise-perturbed logits.
                    let z: Vec<f64> = head
                        .logits
                        .iter()
                        .map(|&l| {
                            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                            (l - (-u.ln()).ln()) / tau
                        })
                        .collect();
                    epoch_loss += xent_loss(&z, target, weights.as_deref());
                    let mut dz = xent_grad(&z, target, weights.as_deref());
                    for d in &mut dz {
                        *d /= tau;
                    }
                    head_grads.push(dz);
                    outputs += 1;
                }
                let pairs: Vec<(&HeadOutput, Vec<f64>)> =
                    heads.iter().zip(head_grads).collect();
                backward(&model, &input, &traj, &pairs, &mut grads);
            }
            if outputs > 0 {
                grads.scale(1.0 / outputs as f64);
                adam_step(&mut model, &grads, &mut opt)?;
            }
            epoch_outputs += outputs;
        }

        module.model = model.clone();
        let val_accuracy = validation_accuracy(&module, spec, val)?;
        if let Some(acc) = val_accuracy {
            if best.as_ref().map(|&(b, _, _)| acc > b).unwrap_or(true) {
                best = Some((acc, epoch, model.clone()));
            }
        }
        log.epochs.push(EpochStats {
            epoch,
            tau,
            train_loss: if epoch_outputs > 0 {
                epoch_loss / epoch_outputs as f64
            } else {
                0.0
            },
            val_accuracy,
        });
    }

    // Retain the best validation epoch when one exists, else the final
    // parameters.
    match best {
        Some((acc, epoch, best_model)) => {
            log.best_epoch = Some(epoch);
            log.best_val_accuracy = Some(acc);
            module.model = best_model;
        }
        None => module.model = model,
    }
    Ok((module, log))
}

/// Single-step validation accuracy: fraction of outputs whose
/// deterministic prediction matches the supervision. `None` when the
/// validation set has no examples for this module.
pub fn validation_accuracy(
    module: &TrainedModule,
    spec: &DatasetSpec,
    val: &TrainingSet,
) -> Result<Option<f64>> {
    let examples = examples_of(val, module.kind);
    let mut correct = 0usize;
    let mut total = 0usize;
    for ex in examples {
        let (_, _, heads) =
            forward_example(&module.model, spec, module.focus_flag, ex, module.kind)?;
        for (head, target) in heads.iter().zip(targets_of(ex, module.kind)) {
            if predict(module, &head.logits) == target {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

// ---------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------

pub const MODULE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModuleFile {
    format: String,
    version: u32,
    module: TrainedModule,
}

/// Writes a module checkpoint: manifest fields plus every layer shape and
/// flattened row-major weight array. Reload is bit-exact.
pub fn save_module<W: Write>(mut w: W, module: &TrainedModule) -> Result<()> {
    let file = ModuleFile {
        format: "molgen-module".into(),
        version: MODULE_FORMAT_VERSION,
        module: module.clone(),
    };
    let doc = serde_json::to_string_pretty(&file).expect("module serializes");
    w.write_all(doc.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn load_module<R: Read>(mut r: R) -> Result<TrainedModule> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let file: ModuleFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("bad module checkpoint: {e}")))?;
    if file.format != "molgen-module" || file.version != MODULE_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported module checkpoint {}/{}",
            file.format, file.version
        )));
    }
    Ok(file.module)
}
