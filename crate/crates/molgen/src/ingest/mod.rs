//! Dataset ingestion: SDF and SMILES parsing into molecular graphs,
//! train/test/validation splitting, and the preprocessed graph cache.

mod cache;
mod sdf;
mod smiles;

pub use cache::{read_graph_cache, write_graph_cache, GraphRecord, CACHE_FORMAT_VERSION};
pub use sdf::{parse_sdf, RecordDiagnostic, SdfParse};
pub use smiles::{parse_smiles, parse_smiles_file, SmilesParse};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MolecularGraph;

/// Which benchmark data model is in effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Qm9,
    Zinc,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Qm9 => write!(f, "qm9"),
            Mode::Zinc => write!(f, "zinc"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qm9" => Ok(Mode::Qm9),
            "zinc" => Ok(Mode::Zinc),
            other => Err(Error::Config(format!("unknown dataset mode '{other}'"))),
        }
    }
}

/// Fixed type tables and size cap of a dataset mode.
///
/// QM9 keeps explicit hydrogens as vertices; Zinc graphs carry heavy atoms
/// only, with an aromatic bond type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub mode: Mode,
    pub vertex_types: &'static [&'static str],
    pub edge_types: &'static [&'static str],
    pub max_vertices: usize,
}

impl DatasetSpec {
    pub fn qm9() -> Self {
        DatasetSpec {
            mode: Mode::Qm9,
            vertex_types: &["H", "C", "N", "O", "F"],
            edge_types: &["single", "double", "triple"],
            max_vertices: 29,
        }
    }

    pub fn zinc() -> Self {
        DatasetSpec {
            mode: Mode::Zinc,
            vertex_types: &["C", "O", "N", "F", "P", "S", "Cl", "I", "Br"],
            edge_types: &["single", "double", "triple", "aromatic"],
            max_vertices: 38,
        }
    }

    pub fn from_mode(mode: Mode) -> Self {
        match mode {
            Mode::Qm9 => Self::qm9(),
            Mode::Zinc => Self::zinc(),
        }
    }

    pub fn vertex_type_count(&self) -> usize {
        self.vertex_types.len()
    }

    pub fn edge_type_count(&self) -> usize {
        self.edge_types.len()
    }

    pub fn vertex_type_index(&self, symbol: &str) -> Option<usize> {
        self.vertex_types.iter().position(|&s| s == symbol)
    }

    pub fn edge_type_index(&self, name: &str) -> Option<usize> {
        self.edge_types.iter().position(|&s| s == name)
    }

    /// Input edge encoding width: one slot per bond type plus the reserved
    /// candidate slot marking an edge under prediction.
    pub fn edge_input_dim(&self) -> usize {
        self.edge_type_count() + 1
    }

    /// Output class counts of the three decision modules:
    /// node generation (stop + vertex types), first-edge classification
    /// (edge types), additional linking (disconnected + edge types).
    pub fn module_class_counts(&self) -> (usize, usize, usize) {
        (
            1 + self.vertex_type_count(),
            self.edge_type_count(),
            1 + self.edge_type_count(),
        )
    }
}

/// Target sizes and shuffle seed of a dataset split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// The benchmark split sizes for the full QM9 release.
    pub fn qm9_full(seed: u64) -> Self {
        SplitSpec {
            train: 120_000,
            test: 10_000,
            validation: 3_885,
            seed,
        }
    }

    /// The benchmark split sizes for the full Zinc release.
    pub fn zinc_full(seed: u64) -> Self {
        SplitSpec {
            train: 230_000,
            test: 10_000,
            validation: 9_455,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.test + self.validation
    }
}

/// Seeded shuffle followed by a train/test/validation partition.
/// Deterministic given the seed; errors when counts do not sum to the
/// dataset size.
pub fn split_dataset(
    graphs: Vec<MolecularGraph>,
    split: &SplitSpec,
) -> Result<(Vec<MolecularGraph>, Vec<MolecularGraph>, Vec<MolecularGraph>)> {
    if split.total() != graphs.len() {
        return Err(Error::SplitMismatch {
            given: split.total(),
            expected: graphs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split.seed);
    let mut indices: Vec<usize> = (0..graphs.len()).collect();
    indices.shuffle(&mut rng);

    let mut slots: Vec<Option<MolecularGraph>> = graphs.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<MolecularGraph> {
        indices[range]
            .iter()
            .map(|&i| slots[i].take().expect("each index taken once"))
            .collect()
    };
    let train = take(0..split.train);
    let test = take(split.train..split.train + split.test);
    let validation = take(split.train + split.test..split.total());
    Ok((train, test, validation))
}
