//! Valence-rule validity checking and molecular weight.
//!
//! The validity oracle is self-contained: each element carries a fixed set
//! of allowed valences for the neutral atom, and bond orders count single=1,
//! double=2, triple=3, aromatic=1.5. Datasets with explicit hydrogens are
//! checked for exact valence; heavy-atom datasets allow the remainder to be
//! filled by implicit hydrogens.

use crate::graph::MolecularGraph;
use crate::ingest::{DatasetSpec, Mode};

/// Atomic weight of one hydrogen, used for implicit-hydrogen completion.
pub const HYDROGEN_WEIGHT: f64 = 1.008;

/// Static per-element data keyed by the dataset's vertex type index.
#[derive(Debug, Clone)]
pub struct ElementInfo {
    pub symbol: &'static str,
    pub atomic_weight: f64,
    /// Allowed total bond orders for the neutral atom, ascending.
    pub valences: &'static [usize],
}

pub(crate) fn element_by_symbol(symbol: &str) -> Option<ElementInfo> {
    let (symbol, weight, valences): (&'static str, f64, &'static [usize]) = match symbol {
        "H" => ("H", 1.008, &[1]),
        "C" => ("C", 12.011, &[4]),
        "N" => ("N", 14.007, &[3]),
        "O" => ("O", 15.999, &[2]),
        "F" => ("F", 18.998, &[1]),
        "P" => ("P", 30.974, &[3, 5]),
        "S" => ("S", 32.06, &[2, 4, 6]),
        "Cl" => ("Cl", 35.45, &[1]),
        "Br" => ("Br", 79.904, &[1]),
        "I" => ("I", 126.904, &[1]),
        _ => return None,
    };
    Some(ElementInfo {
        symbol,
        atomic_weight: weight,
        valences,
    })
}

/// Element data for vertex type `t` of `spec`.
pub fn element_info(spec: &DatasetSpec, t: usize) -> ElementInfo {
    element_by_symbol(spec.vertex_types[t]).expect("dataset type tables list known elements")
}

/// One valence violation: offending vertex plus a human-readable reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub vertex: usize,
    pub reason: String,
}

fn bond_order(spec: &DatasetSpec, label: usize) -> f64 {
    match spec.edge_types[label] {
        "single" => 1.0,
        "double" => 2.0,
        "triple" => 3.0,
        "aromatic" => 1.5,
        other => panic!("unknown edge type {other}"),
    }
}

fn order_sum(g: &MolecularGraph, spec: &DatasetSpec, v: usize) -> f64 {
    g.incident(v)
        .iter()
        .map(|&(_, e)| bond_order(spec, g.edges()[e].label))
        .sum()
}

/// Checks every vertex against the element valence table.
///
/// Explicit-hydrogen mode (QM9): the bond-order sum must equal one of the
/// allowed valences exactly. Implicit-hydrogen mode (Zinc): the sum, with
/// aromatic bonds counting 1.5 and an odd aromatic degree rounded down to
/// the nearest integer, must not exceed the maximum allowed valence, and
/// every aromatic edge must lie on a cycle of aromatic edges.
pub fn check_valence(g: &MolecularGraph, spec: &DatasetSpec) -> (bool, Vec<Violation>) {
    let mut violations = Vec::new();
    for v in 0..g.vertex_count() {
        let info = element_info(spec, g.vertex_type(v));
        let sum = order_sum(g, spec, v);
        match spec.mode {
            Mode::Qm9 => {
                let rounded = sum.round() as usize;
                let exact = (sum - rounded as f64).abs() < 1e-9
                    && info.valences.contains(&rounded);
                if !exact {
                    violations.push(Violation {
                        vertex: v,
                        reason: format!(
                            "{} has bond order sum {sum}, allowed valences {:?}",
                            info.symbol, info.valences
                        ),
                    });
                }
            }
            Mode::Zinc => {
                let max = *info.valences.last().expect("nonempty valence set") as f64;
                // An odd number of aromatic bonds leaves a half-integer sum;
                // the half counts toward the ring, not the valence budget.
                let fractional = (sum - sum.floor()).abs() > 1e-9;
                let effective = if fractional { sum - 0.5 } else { sum };
                if effective > max + 1e-9 {
                    violations.push(Violation {
                        vertex: v,
                        reason: format!(
                            "{} has bond order sum {sum}, exceeding max valence {max}",
                            info.symbol
                        ),
                    });
                }
            }
        }
    }
    if spec.mode == Mode::Zinc {
        violations.extend(aromatic_ring_violations(g, spec));
    }
    (violations.is_empty(), violations)
}

/// Every aromatic edge must be part of a cycle made of aromatic edges;
/// equivalently it must not be a bridge of the aromatic-edge subgraph.
fn aromatic_ring_violations(g: &MolecularGraph, spec: &DatasetSpec) -> Vec<Violation> {
    let aromatic_label = spec
        .edge_types
        .iter()
        .position(|&t| t == "aromatic");
    let Some(label) = aromatic_label else {
        return Vec::new();
    };
    let mut violations = Vec::new();
    for (idx, e) in g.edges().iter().enumerate() {
        if e.label != label {
            continue;
        }
        if !aromatic_path_exists(g, label, e.u, e.v, idx) {
            violations.push(Violation {
                vertex: e.u,
                reason: format!("aromatic bond ({}, {}) not on an aromatic ring", e.u, e.v),
            });
        }
    }
    violations
}

/// Is there an aromatic-edge path from `from` to `to` avoiding edge `skip`?
fn aromatic_path_exists(
    g: &MolecularGraph,
    label: usize,
    from: usize,
    to: usize,
    skip: usize,
) -> bool {
    let mut seen = vec![false; g.vertex_count()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for &(w, e) in g.incident(v) {
            if e == skip || g.edges()[e].label != label || seen[w] {
                continue;
            }
            if w == to {
                return true;
            }
            seen[w] = true;
            stack.push(w);
        }
    }
    false
}

/// Number of implicit hydrogens completing vertex `v` to its smallest
/// feasible valence (zero for explicit-hydrogen datasets or overfull atoms).
pub fn implicit_hydrogens(g: &MolecularGraph, spec: &DatasetSpec, v: usize) -> usize {
    if spec.mode == Mode::Qm9 {
        return 0;
    }
    let info = element_info(spec, g.vertex_type(v));
    let sum = order_sum(g, spec, v);
    info.valences
        .iter()
        .find(|&&val| val as f64 + 1e-9 >= sum)
        .map(|&val| (val as f64 - sum).floor().max(0.0) as usize)
        .unwrap_or(0)
}

/// Sum of atomic weights, plus implicit hydrogens in heavy-atom mode.
pub fn molecular_weight(g: &MolecularGraph, spec: &DatasetSpec) -> f64 {
    let mut total = 0.0;
    for v in 0..g.vertex_count() {
        total += element_info(spec, g.vertex_type(v)).atomic_weight;
        total += implicit_hydrogens(g, spec, v) as f64 * HYDROGEN_WEIGHT;
    }
    total
}
