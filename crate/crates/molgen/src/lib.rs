//! Sequential molecular graph generation with graph neural decision
//! modules.
//!
//! A molecule is built one vertex at a time: a node-generation module
//! decides whether the focus atom gets another neighbor and of which
//! element, an edge-classification module assigns the new bond's type,
//! and a linking module closes rings by classifying every provisional
//! edge back to earlier atoms. Each module is an independently trained
//! graph neural network that relaxes per-vertex states over the partial
//! graph and reads its decision off the relaxed states through a
//! Gumbel-softmax output layer.
//!
//! The crate covers the whole workflow:
//!
//! - [`graph`]: labeled undirected graphs, BFS ordering, betweenness
//!   centrality, isomorphism and canonical keys
//! - [`ingest`]: QM9 (SDF) and Zinc (SMILES) parsing, dataset splits,
//!   graph caches
//! - [`chem`]: valence-rule validity and molecular weight
//! - [`sequencer`]: decomposition of molecules into per-step supervised
//!   examples and batch construction
//! - [`gnn`]: the numerical engine — state relaxation, output heads,
//!   exact gradients through the unrolled iterations, Adam, Gumbel
//!   sampling
//! - [`modules`]: configuration presets, training, and invocation of the
//!   three decision modules
//! - [`generator`]: the construction loop, seed distribution, batch
//!   generation, forced replay
//! - [`eval`]: validity/uniqueness/novelty/VUN metrics and descriptor
//!   statistics
//! - [`pipeline`]: file-based orchestration used by the `molgen` binary
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example parse_and_inspect
//! cargo run --release --example ordering_and_centrality
//! cargo run --release --example decompose_and_replay
//! cargo run --release --example gradient_check
//! cargo run --release --example gumbel_sampling
//! cargo run --release --example train_and_generate
//! cargo run --release --example evaluate_batch
//! ```
//!
//! The `molgen` binary drives the same pipeline from the shell; see the
//! repository README.

pub mod chem;
pub mod error;
pub mod eval;
pub mod generator;
pub mod gnn;
pub mod graph;
pub mod ingest;
pub mod modules;
pub mod pipeline;
pub mod sequencer;

pub use error::{Error, Result};
