//! Thin command-line front end over the pipeline library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use molgen::ingest::Mode;
use molgen::pipeline::{run, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "molgen",
    about = "Sequential molecular graph generation with graph neural decision modules",
    version
)]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dataset mode: qm9 or zinc.
    #[arg(long, global = true)]
    mode: Option<Mode>,

    /// Master seed; mandatory (via flag or config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Artifact directory (default: $MOLGEN_DATA_DIR or ./data).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a dataset file, split it, and write the split caches.
    Ingest {
        /// SDF file (qm9) or one-SMILES-per-line file (zinc).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Train,test,validation counts (e.g. 160,20,20).
        #[arg(long, value_delimiter = ',', num_args = 3)]
        split: Option<Vec<usize>>,
    },
    /// Reorder, decompose and batch the training molecules.
    Prep {
        /// Number of training batches.
        #[arg(long)]
        batches: Option<usize>,
    },
    /// Train one decision module and write its checkpoint.
    Train {
        /// Which module: m1, m2 or m3.
        #[arg(long)]
        module: String,
        /// Named hyperparameter preset (e.g. m1-i, m2-ii, m3-zinc).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        state_dim: Option<usize>,
        #[arg(long)]
        tau_max: Option<f64>,
        #[arg(long)]
        tau_min: Option<f64>,
    },
    /// Generate a batch of molecules from the trained modules.
    Generate {
        /// Batch size.
        #[arg(short, long)]
        n: Option<usize>,
        /// Maximum vertices per molecule.
        #[arg(long)]
        vmax: Option<usize>,
        /// Sampling temperature.
        #[arg(long)]
        tau: Option<f64>,
        /// Record per-molecule decision traces.
        #[arg(long)]
        traces: bool,
    },
    /// Score a generated batch against the dataset.
    Evaluate {
        #[arg(long)]
        batch: Option<PathBuf>,
        /// Reference caches for novelty (default: all three splits).
        #[arg(long)]
        reference: Option<Vec<PathBuf>>,
    },
    /// Pretty-print one molecule or trace from a cache file.
    Inspect {
        file: PathBuf,
        #[arg(long, default_value = "0")]
        index: usize,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, molgen::Error> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                molgen::Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            RunConfig::from_toml(&text)?
        }
        None => {
            let mode = cli
                .mode
                .ok_or_else(|| molgen::Error::Config("--mode is required".into()))?;
            let seed = cli
                .seed
                .ok_or_else(|| molgen::Error::Config("--seed is required".into()))?;
            let data_dir = default_data_dir();
            RunConfig::new(mode, seed, data_dir)
        }
    };
    // Flags override file values.
    if let Some(mode) = cli.mode {
        config.mode = mode;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }

    match &cli.command {
        Cmd::Ingest { input, split } => {
            if let Some(input) = input {
                config.ingest.input = Some(input.clone());
            }
            if let Some(split) = split {
                config.ingest.split = Some([split[0], split[1], split[2]]);
            }
        }
        Cmd::Prep { batches } => {
            if batches.is_some() {
                config.prep.batches = *batches;
            }
        }
        Cmd::Train {
            module,
            preset,
            epochs,
            learning_rate,
            state_dim,
            tau_max,
            tau_min,
        } => {
            let kind: molgen::modules::ModuleKind = module.parse()?;
            let overrides = match kind {
                molgen::modules::ModuleKind::M1 => &mut config.m1,
                molgen::modules::ModuleKind::M2 => &mut config.m2,
                molgen::modules::ModuleKind::M3 => &mut config.m3,
            };
            if preset.is_some() {
                overrides.preset = preset.clone();
            }
            if epochs.is_some() {
                overrides.epochs = *epochs;
            }
            if learning_rate.is_some() {
                overrides.learning_rate = *learning_rate;
            }
            if state_dim.is_some() {
                overrides.state_dim = *state_dim;
            }
            if tau_max.is_some() {
                overrides.tau_max = *tau_max;
            }
            if tau_min.is_some() {
                overrides.tau_min = *tau_min;
            }
        }
        Cmd::Generate { n, vmax, tau, traces } => {
            if n.is_some() {
                config.generate.count = *n;
            }
            if vmax.is_some() {
                config.generate.vmax = *vmax;
            }
            if tau.is_some() {
                config.generate.tau = *tau;
            }
            if *traces {
                config.generate.traces = Some(true);
            }
        }
        Cmd::Evaluate { batch, reference } => {
            if batch.is_some() {
                config.evaluate.batch = batch.clone();
            }
            if reference.is_some() {
                config.evaluate.reference = reference.clone();
            }
        }
        Cmd::Inspect { .. } => {}
    }
    Ok(config)
}

fn default_data_dir() -> PathBuf {
    std::env::var_os("MOLGEN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn command_of(cli: &Cli) -> Result<Command, molgen::Error> {
    Ok(match &cli.command {
        Cmd::Ingest { .. } => Command::Ingest,
        Cmd::Prep { .. } => Command::Prep,
        Cmd::Train { module, .. } => Command::Train {
            module: module.parse()?,
        },
        Cmd::Generate { .. } => Command::Generate,
        Cmd::Evaluate { .. } => Command::Evaluate,
        Cmd::Inspect { file, index } => Command::Inspect {
            file: file.clone(),
            index: *index,
        },
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = build_config(&cli)
        .and_then(|config| command_of(&cli).map(|cmd| (cmd, config)))
        .and_then(|(cmd, config)| run(&cmd, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
