//! Generation metrics (validity, uniqueness, novelty, VUN) and descriptor
//! statistics over a generated batch, against a reference dataset.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chem::{check_valence, molecular_weight};
use crate::generator::GenerationOutcome;
use crate::graph::{canonical_key, is_isomorphic, MolecularGraph};
use crate::ingest::DatasetSpec;

/// Fixed-width histogram; `lo` and `bin_width` pin the bin spec in the
/// output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(values: &[f64], bin_width: f64) -> Histogram {
        debug_assert!(!values.is_empty());
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = (min / bin_width).floor() * bin_width;
        let bins = (((max - lo) / bin_width).floor() as usize + 1).max(1);
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - lo) / bin_width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram {
            lo,
            bin_width,
            counts,
        }
    }

    /// Comma-separated rows `bin_lo,bin_hi,count`, consumable by external
    /// plotting tools.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, &c) in self.counts.iter().enumerate() {
            let lo = self.lo + i as f64 * self.bin_width;
            out.push_str(&format!("{},{},{}\n", lo, lo + self.bin_width, c));
        }
        out
    }
}

/// Molecular weight statistics of a molecule set. logP and QED are not
/// computed by this evaluator; `omitted` records that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorReport {
    pub count: usize,
    pub weight_mean: f64,
    pub weight_std: f64,
    pub weight_histogram: Histogram,
    pub log_weight_mean: f64,
    pub log_weight_std: f64,
    pub log_weight_histogram: Histogram,
    pub omitted: Vec<String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean, standard deviation and fixed-bin histograms of molecular weight
/// and its natural logarithm. Panics on an empty set; callers guard.
pub fn descriptor_report<'a, I>(graphs: I, spec: &DatasetSpec) -> DescriptorReport
where
    I: IntoIterator<Item = &'a MolecularGraph>,
{
    let weights: Vec<f64> = graphs
        .into_iter()
        .map(|g| molecular_weight(g, spec))
        .collect();
    assert!(!weights.is_empty(), "descriptor report needs molecules");
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let (weight_mean, weight_std) = mean_std(&weights);
    let (log_weight_mean, log_weight_std) = mean_std(&logs);
    DescriptorReport {
        count: weights.len(),
        weight_mean,
        weight_std,
        weight_histogram: Histogram::build(&weights, 10.0),
        log_weight_mean,
        log_weight_std,
        log_weight_histogram: Histogram::build(&logs, 0.1),
        omitted: vec!["logP".into(), "QED".into()],
    }
}

/// Validity, uniqueness, novelty and their product over a generated batch.
///
/// Uniqueness uses multiset counting: the valid multiset keeps duplicate
/// generations, and `uniqueness = |uniq(Val)| / |Val|` over it
/// (`multiset_valid` flags this in the schema). The `vun` field is the
/// exact product of the three fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub generated: usize,
    pub valid: usize,
    pub unique_valid: usize,
    pub novel: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub vun: f64,
    /// Set when a zero denominator forced uniqueness or novelty to 0.
    pub degenerate_denominator: bool,
    pub multiset_valid: bool,
    pub descriptors: Option<DescriptorReport>,
}

/// Isomorphism-class index: canonical keys bucket candidates, exact
/// isomorphism confirms.
struct ClassIndex<'a> {
    buckets: HashMap<Vec<u8>, Vec<&'a MolecularGraph>>,
}

impl<'a> ClassIndex<'a> {
    fn new() -> Self {
        ClassIndex {
            buckets: HashMap::new(),
        }
    }

    fn from_graphs(graphs: &'a [MolecularGraph], keys: &[Vec<u8>]) -> Self {
        let mut index = Self::new();
        for (g, key) in graphs.iter().zip(keys) {
            let bucket = index.buckets.entry(key.clone()).or_default();
            if !bucket.iter().any(|rep| is_isomorphic(rep, g)) {
                bucket.push(g);
            }
        }
        index
    }

    fn contains(&self, key: &[u8], g: &MolecularGraph) -> bool {
        self.buckets
            .get(key)
            .map(|bucket| bucket.iter().any(|rep| is_isomorphic(rep, g)))
            .unwrap_or(false)
    }

    /// Inserts unless an isomorphic graph is already present; returns
    /// whether an insertion happened.
    fn insert(&mut self, key: &[u8], g: &'a MolecularGraph) -> bool {
        let bucket = self.buckets.entry(key.to_vec()).or_default();
        if bucket.iter().any(|rep| is_isomorphic(rep, g)) {
            false
        } else {
            bucket.push(g);
            true
        }
    }
}

/// Computes the full metric report for a batch against a reference set.
/// Incomplete outcomes count as generated but never as valid.
pub fn evaluate(
    batch: &[GenerationOutcome],
    reference: &[MolecularGraph],
    spec: &DatasetSpec,
) -> EvalReport {
    let valid_graphs: Vec<&MolecularGraph> = batch
        .par_iter()
        .map(|o| (o.complete && check_valence(&o.graph, spec).0).then_some(&o.graph))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let valid_keys: Vec<Vec<u8>> = valid_graphs.par_iter().map(|g| canonical_key(g)).collect();
    let reference_keys: Vec<Vec<u8>> =
        reference.par_iter().map(canonical_key).collect();
    let reference_index = ClassIndex::from_graphs(reference, &reference_keys);

    let mut classes = ClassIndex::new();
    let mut unique_reps: Vec<(&MolecularGraph, Vec<u8>)> = Vec::new();
    for (g, key) in valid_graphs.iter().zip(&valid_keys) {
        if classes.insert(key, g) {
            unique_reps.push((g, key.clone()));
        }
    }

    let novel = unique_reps
        .iter()
        .filter(|(g, key)| !reference_index.contains(key, g))
        .count();

    let generated = batch.len();
    let valid = valid_graphs.len();
    let unique_valid = unique_reps.len();
    let mut degenerate = false;
    let validity = if generated == 0 {
        degenerate = true;
        0.0
    } else {
        valid as f64 / generated as f64
    };
    let uniqueness = if valid == 0 {
        degenerate = true;
        0.0
    } else {
        unique_valid as f64 / valid as f64
    };
    let novelty = if unique_valid == 0 {
        degenerate = true;
        0.0
    } else {
        novel as f64 / unique_valid as f64
    };

    EvalReport {
        generated,
        valid,
        unique_valid,
        novel,
        validity,
        uniqueness,
        novelty,
        vun: validity * uniqueness * novelty,
        degenerate_denominator: degenerate,
        multiset_valid: true,
        descriptors: (valid > 0).then(|| descriptor_report(valid_graphs.iter().copied(), spec)),
    }
}
