//! SDF (V2000 connection table) record parsing.

use crate::graph::MolecularGraph;
use crate::ingest::DatasetSpec;

/// Why one record was rejected, with its starting line (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDiagnostic {
    pub record: usize,
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for RecordDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "record {} (line {}): {}",
            self.record, self.line, self.reason
        )
    }
}

/// Accepted graphs plus per-record rejection diagnostics.
#[derive(Debug, Default)]
pub struct SdfParse {
    pub graphs: Vec<MolecularGraph>,
    pub rejects: Vec<RecordDiagnostic>,
}

impl SdfParse {
    /// Number of records seen, accepted or not.
    pub fn record_count(&self) -> usize {
        self.graphs.len() + self.rejects.len()
    }
}

/// Parses a multi-record SDF document. Each record yields either a graph or
/// a diagnostic; a malformed record never aborts the rest of the file.
///
/// Atoms must come from the spec's element table, bond orders from its bond
/// table. Charged or radical species, disconnected molecules, and molecules
/// above the size cap are rejected. The 3D geometry block is ignored.
pub fn parse_sdf(text: &str, spec: &DatasetSpec) -> SdfParse {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = SdfParse::default();
    let mut start = 0usize;
    let mut record = 0usize;
    while start < lines.len() {
        let end = lines[start..]
            .iter()
            .position(|l| l.trim_end() == "$$$$")
            .map(|p| start + p)
            .unwrap_or(lines.len());
        let slice = &lines[start..end];
        // Whitespace between records is not a record; blank lines inside
        // one (e.g. an empty title) are preserved.
        if slice.iter().all(|l| l.trim().is_empty()) {
            start = end + 1;
            continue;
        }
        match parse_record(slice, start, spec) {
            Ok(graph) => out.graphs.push(graph),
            Err((line, reason)) => out.rejects.push(RecordDiagnostic {
                record,
                line: line + 1,
                reason,
            }),
        }
        record += 1;
        start = end + 1;
    }
    out
}

/// Fixed-width field with a whitespace-split fallback for short lines.
fn field(line: &str, range: std::ops::Range<usize>, word: usize) -> Option<&str> {
    if line.len() >= range.end {
        Some(line[range].trim())
    } else {
        line.split_whitespace().nth(word)
    }
}

type RecordError = (usize, String);

fn parse_record(
    lines: &[&str],
    offset: usize,
    spec: &DatasetSpec,
) -> Result<MolecularGraph, RecordError> {
    if lines.len() < 4 {
        return Err((offset, "truncated record header".into()));
    }
    let counts_line_no = offset + 3;
    let counts = lines[3];
    let natoms: usize = field(counts, 0..3, 0)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| (counts_line_no, "malformed counts line".to_string()))?;
    let nbonds: usize = field(counts, 3..6, 1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| (counts_line_no, "malformed counts line".to_string()))?;
    if natoms == 0 {
        return Err((counts_line_no, "empty molecule".into()));
    }
    if lines.len() < 4 + natoms + nbonds {
        return Err((counts_line_no, "record shorter than counts line claims".into()));
    }

    let mut graph = MolecularGraph::new();
    for (i, line) in lines[4..4 + natoms].iter().enumerate() {
        let line_no = offset + 4 + i;
        let symbol = field(line, 31..34, 3)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| (line_no, "malformed atom line".to_string()))?;
        let type_index = spec
            .vertex_type_index(symbol)
            .ok_or_else(|| (line_no, format!("element outside type table: {symbol}")))?;
        if let Some(charge) = field(line, 36..39, 5) {
            if charge.parse::<i32>().map(|c| c != 0).unwrap_or(false) {
                return Err((line_no, "charged atom".into()));
            }
        }
        graph.add_vertex(type_index);
    }

    for (i, line) in lines[4 + natoms..4 + natoms + nbonds].iter().enumerate() {
        let line_no = offset + 4 + natoms + i;
        let parse3 = |range: std::ops::Range<usize>, word: usize| -> Option<usize> {
            field(line, range, word).and_then(|s| s.parse().ok())
        };
        let (a, b, order) = match (parse3(0..3, 0), parse3(3..6, 1), parse3(6..9, 2)) {
            (Some(a), Some(b), Some(t)) => (a, b, t),
            _ => return Err((line_no, "malformed bond line".to_string())),
        };
        if a == 0 || b == 0 || a > natoms || b > natoms {
            return Err((line_no, format!("bond endpoint out of range: {a}-{b}")));
        }
        let name = match order {
            1 => "single",
            2 => "double",
            3 => "triple",
            4 => "aromatic",
            other => return Err((line_no, format!("unknown bond order {other}"))),
        };
        let label = spec
            .edge_type_index(name)
            .ok_or_else(|| (line_no, format!("bond type outside table: {name}")))?;
        graph
            .add_edge(a - 1, b - 1, label)
            .map_err(|e| (line_no, e.to_string()))?;
    }

    for (i, line) in lines[4 + natoms + nbonds..].iter().enumerate() {
        let line_no = offset + 4 + natoms + nbonds + i;
        if line.starts_with("M  CHG") {
            return Err((line_no, "charged molecule".into()));
        }
        if line.starts_with("M  RAD") {
            return Err((line_no, "radical species".into()));
        }
        if line.trim_end() == "M  END" {
            break;
        }
    }

    if !graph.is_connected() {
        return Err((offset, "disconnected molecule".into()));
    }
    if graph.vertex_count() > spec.max_vertices {
        return Err((
            offset,
            format!(
                "molecule has {} atoms, above the {}-atom cap",
                graph.vertex_count(),
                spec.max_vertices
            ),
        ));
    }
    Ok(graph)
}
