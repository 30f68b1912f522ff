//! End-to-end orchestration with reproducible configuration: ingest,
//! prep, train, generate, evaluate, inspect. Every run writes its
//! artifacts plus a manifest carrying the effective config, its hash, the
//! seed, and the artifact format versions.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::generator::{
    estimate_d0, generate_batch, GenerationOutcome, ModulePolicy, SeedDistribution, TraceStep,
};
use crate::graph::{MolecularGraph, TypePriority};
use crate::ingest::{
    parse_sdf, parse_smiles_file, read_graph_cache, split_dataset, write_graph_cache,
    DatasetSpec, GraphRecord, Mode, SplitSpec, CACHE_FORMAT_VERSION,
};
use crate::modules::{
    load_module, save_module, train_module, ModuleConfig, ModuleKind, TrainedModule,
    MODULE_FORMAT_VERSION,
};
use crate::sequencer::{
    make_batches, read_step_cache, reorder, type_centrality_means,
    type_priority_from_centrality, write_step_cache, Batch, TrainingSet,
    STEP_CACHE_FORMAT_VERSION,
};

/// Per-module hyperparameter overrides on top of a named preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleOverrides {
    pub preset: Option<String>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub k_max: Option<usize>,
    pub hidden_state: Option<usize>,
    pub hidden_out: Option<usize>,
    pub state_dim: Option<usize>,
    pub epsilon: Option<f64>,
    pub class_weighted: Option<bool>,
    pub tau_max: Option<f64>,
    pub tau_min: Option<f64>,
    pub focus_flag: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    /// SDF file (qm9 mode) or one-SMILES-per-line file (zinc mode).
    pub input: Option<PathBuf>,
    /// Train/test/validation counts; defaults to the benchmark split when
    /// it matches the dataset size.
    pub split: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepSection {
    pub batches: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub count: Option<usize>,
    pub vmax: Option<usize>,
    pub tau: Option<f64>,
    pub traces: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Generated batch to score; defaults to the generate step's output.
    pub batch: Option<PathBuf>,
    /// Reference caches for novelty; defaults to all three splits.
    pub reference: Option<Vec<PathBuf>>,
}

/// The effective configuration of a run. A TOML document with the same
/// shape can provide any part; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub data_dir: PathBuf,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub prep: PrepSection,
    #[serde(default)]
    pub m1: ModuleOverrides,
    #[serde(default)]
    pub m2: ModuleOverrides,
    #[serde(default)]
    pub m3: ModuleOverrides,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

impl RunConfig {
    pub fn new(mode: Mode, seed: u64, data_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            mode,
            seed,
            data_dir: data_dir.into(),
            ingest: Default::default(),
            prep: Default::default(),
            m1: Default::default(),
            m2: Default::default(),
            m3: Default::default(),
            generate: Default::default(),
            evaluate: Default::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad config file: {e}")))
    }

    fn spec(&self) -> DatasetSpec {
        DatasetSpec::from_mode(self.mode)
    }

    /// Resolved training configuration for one module.
    pub fn module_config(&self, kind: ModuleKind) -> Result<ModuleConfig> {
        let overrides = match kind {
            ModuleKind::M1 => &self.m1,
            ModuleKind::M2 => &self.m2,
            ModuleKind::M3 => &self.m3,
        };
        let default_preset = match (self.mode, kind) {
            (Mode::Qm9, ModuleKind::M1) => "m1-i",
            (Mode::Qm9, ModuleKind::M2) => "m2-i",
            (Mode::Qm9, ModuleKind::M3) => "m3-i",
            (Mode::Zinc, ModuleKind::M1) => "m1-zinc",
            (Mode::Zinc, ModuleKind::M2) => "m2-zinc",
            (Mode::Zinc, ModuleKind::M3) => "m3-zinc",
        };
        let preset_name = overrides.preset.as_deref().unwrap_or(default_preset);
        let mut cfg = ModuleConfig::preset(preset_name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset '{preset_name}' (known: {})",
                ModuleConfig::preset_names().join(", ")
            ))
        })?;
        if cfg.kind != kind {
            return Err(Error::Config(format!(
                "preset '{preset_name}' configures {}, not {}",
                cfg.kind.tag(),
                kind.tag()
            )));
        }
        if let Some(e) = overrides.epochs {
            cfg.epochs = e;
            cfg.anneal.total_epochs = e;
        }
        if let Some(lr) = overrides.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(k) = overrides.k_max {
            cfg.k_max = k;
        }
        if let Some(h) = overrides.hidden_state {
            cfg.hidden_state = h;
        }
        if let Some(h) = overrides.hidden_out {
            cfg.hidden_out = h;
        }
        if let Some(s) = overrides.state_dim {
            cfg.state_dim = s;
        }
        if let Some(e) = overrides.epsilon {
            cfg.epsilon = e;
        }
        if let Some(w) = overrides.class_weighted {
            cfg.class_weighted = w;
        }
        if let Some(t) = overrides.tau_max {
            cfg.anneal.tau_max = t;
        }
        if let Some(t) = overrides.tau_min {
            cfg.anneal.tau_min = t;
        }
        if let Some(f) = overrides.focus_flag {
            cfg.focus_flag = f;
        }
        // Separate deterministic training streams per module.
        cfg.seed = self.seed.wrapping_add(match kind {
            ModuleKind::M1 => 1,
            ModuleKind::M2 => 2,
            ModuleKind::M3 => 3,
        });
        Ok(cfg)
    }
}

/// One pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Prep,
    Train { module: ModuleKind },
    Generate,
    Evaluate,
    Inspect { file: PathBuf, index: usize },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Ingest => "ingest".into(),
            Command::Prep => "prep".into(),
            Command::Train { module } => format!("train_{}", module.tag()),
            Command::Generate => "generate".into(),
            Command::Evaluate => "evaluate".into(),
            Command::Inspect { .. } => "inspect".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    command: String,
    seed: u64,
    mode: Mode,
    config_sha256: String,
    artifact_versions: ArtifactVersions,
    config: &'a RunConfig,
}

#[derive(Debug, Serialize)]
struct ArtifactVersions {
    graph_cache: u32,
    step_cache: u32,
    module_checkpoint: u32,
}

fn config_hash(config: &RunConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_manifest(command: &Command, config: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        format: "molgen-manifest",
        version: 1,
        command: command.name(),
        seed: config.seed,
        mode: config.mode,
        config_sha256: config_hash(config),
        artifact_versions: ArtifactVersions {
            graph_cache: CACHE_FORMAT_VERSION,
            step_cache: STEP_CACHE_FORMAT_VERSION,
            module_checkpoint: MODULE_FORMAT_VERSION,
        },
        config,
    };
    let path = config
        .data_dir
        .join(format!("manifest_{}.json", command.name()));
    let doc = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(path, doc + "\n")?;
    Ok(())
}

/// Runs one pipeline stage against the configured data directory.
pub fn run(command: &Command, config: &RunConfig) -> Result<()> {
    if let Command::Inspect { file, index } = command {
        return inspect(file, *index, config);
    }
    fs::create_dir_all(&config.data_dir)?;
    match command {
        Command::Ingest => run_ingest(config)?,
        Command::Prep => run_prep(config)?,
        Command::Train { module } => run_train(config, *module)?,
        Command::Generate => run_generate(config)?,
        Command::Evaluate => {
            run_evaluate(config)?;
        }
        Command::Inspect { .. } => unreachable!("handled above"),
    }
    write_manifest(command, config)
}

fn split_path(config: &RunConfig, name: &str) -> PathBuf {
    config.data_dir.join(format!("{name}.jsonl"))
}

fn load_split(config: &RunConfig, name: &str) -> Result<Vec<MolecularGraph>> {
    let path = split_path(config, name);
    let file = fs::File::open(&path).map_err(|e| {
        Error::Config(format!("cannot open {} (run ingest first?): {e}", path.display()))
    })?;
    let spec = config.spec();
    read_graph_cache(BufReader::new(file), config.mode)?
        .iter()
        .map(|r| r.to_graph(&spec))
        .collect()
}

fn run_ingest(config: &RunConfig) -> Result<()> {
    let spec = config.spec();
    let input = config
        .ingest
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("ingest.input is required".into()))?;
    let text = fs::read_to_string(input)?;
    let (graphs, rejects) = match config.mode {
        Mode::Qm9 => {
            let parsed = parse_sdf(&text, &spec);
            (parsed.graphs, parsed.rejects)
        }
        Mode::Zinc => {
            let parsed = parse_smiles_file(&text, &spec);
            (parsed.graphs, parsed.rejects)
        }
    };
    let raw_count = graphs.len() + rejects.len();
    println!(
        "ingest: {raw_count} records, {} accepted, {} rejected",
        graphs.len(),
        rejects.len()
    );

    let mut reject_log = String::new();
    for r in &rejects {
        reject_log.push_str(&format!("{r}\n"));
    }
    fs::write(config.data_dir.join("rejects.txt"), reject_log)?;

    let split = match config.ingest.split {
        Some([train, test, validation]) => SplitSpec {
            train,
            test,
            validation,
            seed: config.seed,
        },
        None => {
            let full = match config.mode {
                Mode::Qm9 => SplitSpec::qm9_full(config.seed),
                Mode::Zinc => SplitSpec::zinc_full(config.seed),
            };
            if full.total() != graphs.len() {
                return Err(Error::Config(format!(
                    "dataset has {} accepted molecules; pass ingest.split with counts summing to it",
                    graphs.len()
                )));
            }
            full
        }
    };
    let (train, test, validation) = split_dataset(graphs, &split)?;
    for (name, set) in [("train", &train), ("test", &test), ("validation", &validation)] {
        let file = fs::File::create(split_path(config, name))?;
        write_graph_cache(
            std::io::BufWriter::new(file),
            config.mode,
            set.iter().map(GraphRecord::from_graph),
        )?;
        println!("ingest: {name} split has {} molecules", set.len());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PriorityFile {
    means: Vec<f64>,
    priority: TypePriority,
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchesFile {
    batch_count: usize,
    /// Batch id per training molecule.
    batch_of: Vec<usize>,
}

fn run_prep(config: &RunConfig) -> Result<()> {
    let spec = config.spec();
    let train = load_split(config, "train")?;
    let validation = load_split(config, "validation")?;

    let means = type_centrality_means(&train, spec.vertex_type_count());
    let priority = type_priority_from_centrality(&train, spec.vertex_type_count());
    let priority_file = PriorityFile {
        means: means.clone(),
        priority: priority.clone(),
    };
    fs::write(
        config.data_dir.join("priority.json"),
        serde_json::to_string_pretty(&priority_file).expect("serializes") + "\n",
    )?;
    for (t, m) in means.iter().enumerate() {
        println!("prep: mean centrality of {} = {m:.4}", spec.vertex_types[t]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ordered_train = train
        .iter()
        .map(|g| reorder(g, &priority, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let ordered_validation = validation
        .iter()
        .map(|g| reorder(g, &priority, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let d0 = estimate_d0(&ordered_train, spec.vertex_type_count())?;
    fs::write(
        config.data_dir.join("d0.json"),
        serde_json::to_string_pretty(&d0).expect("serializes") + "\n",
    )?;

    let train_set = TrainingSet::build(&ordered_train)?;
    let val_set = TrainingSet::build(&ordered_validation)?;
    for (ts, suffix) in [(&train_set, "train"), (&val_set, "validation")] {
        for kind in [ModuleKind::M1, ModuleKind::M2, ModuleKind::M3] {
            let (examples, ids) = match kind {
                ModuleKind::M1 => (&ts.m1, &ts.m1_molecule),
                ModuleKind::M2 => (&ts.m2, &ts.m2_molecule),
                ModuleKind::M3 => (&ts.m3, &ts.m3_molecule),
            };
            let path = config
                .data_dir
                .join(format!("steps_{}_{suffix}.jsonl", kind.tag()));
            let file = fs::File::create(path)?;
            write_step_cache(
                std::io::BufWriter::new(file),
                config.mode,
                kind.tag(),
                examples,
                ids,
            )?;
        }
    }
    println!(
        "prep: decomposed {} train molecules into {}/{}/{} examples",
        train_set.molecule_count,
        train_set.m1.len(),
        train_set.m2.len(),
        train_set.m3.len()
    );

    let batch_count = config.prep.batches.unwrap_or(20).min(train_set.molecule_count);
    let batches = make_batches(&train_set, batch_count, &mut rng)?;
    let mut batch_of = vec![0usize; train_set.molecule_count];
    for (b, batch) in batches.iter().enumerate() {
        for &i in &batch.m1 {
            batch_of[train_set.m1_molecule[i]] = b;
        }
    }
    fs::write(
        config.data_dir.join("batches.json"),
        serde_json::to_string_pretty(&BatchesFile {
            batch_count,
            batch_of,
        })
        .expect("serializes")
            + "\n",
    )?;
    println!("prep: {batch_count} batches");
    Ok(())
}

fn load_steps(
    config: &RunConfig,
    kind: ModuleKind,
    suffix: &str,
) -> Result<(Vec<crate::sequencer::StepExample>, Vec<usize>)> {
    let path = config
        .data_dir
        .join(format!("steps_{}_{suffix}.jsonl", kind.tag()));
    let file = fs::File::open(&path).map_err(|e| {
        Error::Config(format!("cannot open {} (run prep first?): {e}", path.display()))
    })?;
    read_step_cache(BufReader::new(file), config.mode, kind.tag())
}

/// Rebuilds a full per-module training set from the step caches.
fn load_training_set(config: &RunConfig, suffix: &str) -> Result<TrainingSet> {
    let mut ts = TrainingSet::default();
    let mut max_mol = 0usize;
    for kind in [ModuleKind::M1, ModuleKind::M2, ModuleKind::M3] {
        let (examples, ids) = load_steps(config, kind, suffix)?;
        max_mol = max_mol.max(ids.iter().copied().max().map_or(0, |m| m + 1));
        match kind {
            ModuleKind::M1 => {
                ts.m1 = examples;
                ts.m1_molecule = ids;
            }
            ModuleKind::M2 => {
                ts.m2 = examples;
                ts.m2_molecule = ids;
            }
            ModuleKind::M3 => {
                ts.m3 = examples;
                ts.m3_molecule = ids;
            }
        }
    }
    ts.molecule_count = max_mol;
    Ok(ts)
}

fn run_train(config: &RunConfig, kind: ModuleKind) -> Result<()> {
    let spec = config.spec();
    let cfg = config.module_config(kind)?;
    let train_set = load_training_set(config, "train")?;
    let val_set = load_training_set(config, "validation")?;

    let batches_file: BatchesFile = serde_json::from_str(
        &fs::read_to_string(config.data_dir.join("batches.json"))
            .map_err(|e| Error::Config(format!("cannot read batches.json: {e}")))?,
    )
    .map_err(|e| Error::Format(format!("bad batches.json: {e}")))?;
    let mut batches = vec![Batch::default(); batches_file.batch_count];
    let assign = |ids: &[usize], pick: &mut dyn FnMut(usize, usize)| {
        for (i, &m) in ids.iter().enumerate() {
            pick(batches_file.batch_of[m], i);
        }
    };
    assign(&train_set.m1_molecule, &mut |b, i| batches[b].m1.push(i));
    assign(&train_set.m2_molecule, &mut |b, i| batches[b].m2.push(i));
    assign(&train_set.m3_molecule, &mut |b, i| batches[b].m3.push(i));

    println!(
        "train {}: {} examples, {} epochs, lr {}",
        kind.tag(),
        match kind {
            ModuleKind::M1 => train_set.m1.len(),
            ModuleKind::M2 => train_set.m2.len(),
            ModuleKind::M3 => train_set.m3.len(),
        },
        cfg.epochs,
        cfg.learning_rate
    );
    let (mut module, log) = train_module(&cfg, &spec, &train_set, &batches, &val_set)?;
    module.preset = config
        .module_preset_name(kind)
        .map(|s| s.to_string());

    let ckpt = fs::File::create(config.data_dir.join(format!("module_{}.json", kind.tag())))?;
    save_module(std::io::BufWriter::new(ckpt), &module)?;

    let mut csv = String::from("epoch,tau,train_loss,val_accuracy\n");
    for e in &log.epochs {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch,
            e.tau,
            e.train_loss,
            e.val_accuracy.map_or(String::new(), |a| a.to_string())
        ));
    }
    fs::write(
        config.data_dir.join(format!("train_log_{}.csv", kind.tag())),
        csv,
    )?;
    if let (Some(best), Some(acc)) = (log.best_epoch, log.best_val_accuracy) {
        println!("train {}: best epoch {best}, validation accuracy {acc:.4}", kind.tag());
    }
    Ok(())
}

impl RunConfig {
    fn module_preset_name(&self, kind: ModuleKind) -> Option<&str> {
        let overrides = match kind {
            ModuleKind::M1 => &self.m1,
            ModuleKind::M2 => &self.m2,
            ModuleKind::M3 => &self.m3,
        };
        overrides.preset.as_deref()
    }
}

fn load_trained(config: &RunConfig, kind: ModuleKind) -> Result<TrainedModule> {
    let path = config.data_dir.join(format!("module_{}.json", kind.tag()));
    let file = fs::File::open(&path).map_err(|e| {
        Error::Config(format!("cannot open {} (run train first?): {e}", path.display()))
    })?;
    let module = load_module(BufReader::new(file))?;
    if module.kind != kind {
        return Err(Error::Format(format!(
            "checkpoint {} holds a {} module",
            path.display(),
            module.kind.tag()
        )));
    }
    Ok(module)
}

fn run_generate(config: &RunConfig) -> Result<()> {
    let spec = config.spec();
    let m1 = load_trained(config, ModuleKind::M1)?;
    let m2 = load_trained(config, ModuleKind::M2)?;
    let m3 = load_trained(config, ModuleKind::M3)?;
    let d0: SeedDistribution = serde_json::from_str(
        &fs::read_to_string(config.data_dir.join("d0.json"))
            .map_err(|e| Error::Config(format!("cannot read d0.json (run prep first?): {e}")))?,
    )
    .map_err(|e| Error::Format(format!("bad d0.json: {e}")))?;

    let n = config.generate.count.unwrap_or(1000);
    let vmax = config.generate.vmax.unwrap_or(spec.max_vertices);
    let tau = config.generate.tau.unwrap_or(1.0);
    let record_traces = config.generate.traces.unwrap_or(false);

    let policy = ModulePolicy::new(&m1, &m2, &m3, &spec, tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch = generate_batch(&policy, n, &d0, vmax, &mut rng, record_traces)?;
    let complete = batch.iter().filter(|o| o.complete).count();
    println!("generate: {n} molecules, {complete} complete, vmax {vmax}, tau {tau}");

    let file = fs::File::create(config.data_dir.join("batch.jsonl"))?;
    write_graph_cache(
        std::io::BufWriter::new(file),
        config.mode,
        batch
            .iter()
            .map(|o| GraphRecord::from_graph(&o.graph).with_complete(o.complete)),
    )?;

    if record_traces {
        let mut out = fs::File::create(config.data_dir.join("traces.jsonl"))?;
        writeln!(
            out,
            "{}",
            serde_json::json!({"format": "molgen-traces", "version": 1, "mode": config.mode})
        )?;
        for o in &batch {
            writeln!(out, "{}", serde_json::to_string(&o.trace).expect("trace serializes"))?;
        }
    }
    Ok(())
}

fn run_evaluate(config: &RunConfig) -> Result<EvalReport> {
    let spec = config.spec();
    let batch_path = config
        .evaluate
        .batch
        .clone()
        .unwrap_or_else(|| config.data_dir.join("batch.jsonl"));
    let file = fs::File::open(&batch_path).map_err(|e| {
        Error::Config(format!("cannot open {}: {e}", batch_path.display()))
    })?;
    let records = read_graph_cache(BufReader::new(file), config.mode)?;
    let batch: Vec<GenerationOutcome> = records
        .iter()
        .map(|r| {
            Ok(GenerationOutcome {
                graph: r.to_graph(&spec)?,
                complete: r.complete.unwrap_or(true),
                trace: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;

    let reference_paths = config.evaluate.reference.clone().unwrap_or_else(|| {
        ["train", "test", "validation"]
            .iter()
            .map(|name| split_path(config, name))
            .collect()
    });
    let mut reference = Vec::new();
    for path in &reference_paths {
        let file = fs::File::open(path).map_err(|e| {
            Error::Config(format!("cannot open reference {}: {e}", path.display()))
        })?;
        for record in read_graph_cache(BufReader::new(file), config.mode)? {
            reference.push(record.to_graph(&spec)?);
        }
    }

    let report = evaluate(&batch, &reference, &spec);
    println!(
        "evaluate: validity {:.4}, uniqueness {:.4}, novelty {:.4}, vun {:.4}",
        report.validity, report.uniqueness, report.novelty, report.vun
    );
    fs::write(
        config.data_dir.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    if let Some(d) = &report.descriptors {
        fs::write(
            config.data_dir.join("weight_hist.csv"),
            d.weight_histogram.to_csv(),
        )?;
        fs::write(
            config.data_dir.join("log_weight_hist.csv"),
            d.log_weight_histogram.to_csv(),
        )?;
    }
    Ok(report)
}

fn inspect(file: &Path, index: usize, config: &RunConfig) -> Result<()> {
    let spec = config.spec();
    let text = fs::read_to_string(file)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    let header_json: serde_json::Value = serde_json::from_str(header)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    match header_json.get("format").and_then(|f| f.as_str()) {
        Some("molgen-graphs") => {
            let line = lines
                .nth(index)
                .ok_or_else(|| Error::Config(format!("no molecule at index {index}")))?;
            let record: GraphRecord = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("bad record: {e}")))?;
            let g = record.to_graph(&spec)?;
            print_molecule(&g, &spec, record.complete);
        }
        Some("molgen-traces") => {
            let line = lines
                .nth(index)
                .ok_or_else(|| Error::Config(format!("no trace at index {index}")))?;
            let trace: Vec<TraceStep> = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("bad trace: {e}")))?;
            for step in &trace {
                println!(
                    "{:>3} {}  |V|={} |E|={} focus={} target={:?}  {:?}",
                    step.vertices + step.edges,
                    step.module,
                    step.vertices,
                    step.edges,
                    step.focus,
                    step.target,
                    step.decision
                );
            }
        }
        other => {
            return Err(Error::Format(format!(
                "cannot inspect format {other:?}"
            )))
        }
    }
    Ok(())
}

fn print_molecule(g: &MolecularGraph, spec: &DatasetSpec, complete: Option<bool>) {
    let mut formula: std::collections::BTreeMap<&str, usize> = Default::default();
    for v in 0..g.vertex_count() {
        *formula.entry(spec.vertex_types[g.vertex_type(v)]).or_default() += 1;
    }
    let formula: String = formula
        .iter()
        .map(|(s, c)| if *c == 1 { s.to_string() } else { format!("{s}{c}") })
        .collect();
    println!("formula: {formula}");
    println!(
        "vertices: {} edges: {} weight: {:.3}",
        g.vertex_count(),
        g.edge_count(),
        crate::chem::molecular_weight(g, spec)
    );
    let (valid, violations) = crate::chem::check_valence(g, spec);
    println!("valence: {}", if valid { "valid" } else { "invalid" });
    for v in violations {
        println!("  vertex {}: {}", v.vertex, v.reason);
    }
    if let Some(c) = complete {
        println!("complete: {c}");
    }
    for v in 0..g.vertex_count() {
        let bonds: Vec<String> = g
            .incident(v)
            .iter()
            .map(|&(w, e)| {
                format!("{}{}", spec.vertex_types[g.vertex_type(w)], match spec.edge_types
                    [g.edges()[e].label]
                {
                    "single" => format!("-{w}"),
                    "double" => format!("={w}"),
                    "triple" => format!("#{w}"),
                    "aromatic" => format!(":{w}"),
                    _ => format!("?{w}"),
                })
            })
            .collect();
        println!(
            "  {v}: {} [{}]",
            spec.vertex_types[g.vertex_type(v)],
            bonds.join(" ")
        );
    }
}
