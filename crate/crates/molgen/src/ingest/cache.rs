//! Line-delimited graph cache: one header line with mode and format
//! version, then one JSON record per graph. Reload is bit-exact.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MolecularGraph;
use crate::ingest::{DatasetSpec, Mode};

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    version: u32,
    mode: Mode,
}

/// One cached graph. Generated batches additionally carry the completion
/// flag; dataset graphs leave it absent.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphRecord {
    pub vertex_types: Vec<usize>,
    pub edges: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complete: Option<bool>,
}

impl GraphRecord {
    pub fn from_graph(g: &MolecularGraph) -> Self {
        GraphRecord {
            vertex_types: g.vertex_types().to_vec(),
            edges: g.edges().iter().map(|e| [e.u, e.v, e.label]).collect(),
            complete: None,
        }
    }

    pub fn with_complete(mut self, complete: bool) -> Self {
        self.complete = Some(complete);
        self
    }

    pub fn to_graph(&self, spec: &DatasetSpec) -> Result<MolecularGraph> {
        for &t in &self.vertex_types {
            if t >= spec.vertex_type_count() {
                return Err(Error::Format(format!(
                    "vertex type {t} outside the {} mode table",
                    spec.mode
                )));
            }
        }
        let mut g = MolecularGraph::new();
        for &t in &self.vertex_types {
            g.add_vertex(t);
        }
        for &[u, v, label] in &self.edges {
            if label >= spec.edge_type_count() {
                return Err(Error::Format(format!(
                    "edge type {label} outside the {} mode table",
                    spec.mode
                )));
            }
            g.add_edge(u, v, label)?;
        }
        Ok(g)
    }
}

/// Writes the header followed by one record per graph.
pub fn write_graph_cache<W: Write>(
    mut w: W,
    mode: Mode,
    records: impl IntoIterator<Item = GraphRecord>,
) -> Result<()> {
    let header = CacheHeader {
        format: "molgen-graphs".into(),
        version: CACHE_FORMAT_VERSION,
        mode,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for record in records {
        writeln!(
            w,
            "{}",
            serde_json::to_string(&record).expect("record serializes")
        )?;
    }
    Ok(())
}

/// Reads a cache written by [`write_graph_cache`], checking format name,
/// version, and mode.
pub fn read_graph_cache<R: BufRead>(r: R, expected_mode: Mode) -> Result<Vec<GraphRecord>> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty cache file".into()))??;
    let header: CacheHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Format(format!("bad cache header: {e}")))?;
    if header.format != "molgen-graphs" {
        return Err(Error::Format(format!(
            "expected molgen-graphs cache, found '{}'",
            header.format
        )));
    }
    if header.version != CACHE_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "cache version {} unsupported (expected {})",
            header.version, CACHE_FORMAT_VERSION
        )));
    }
    if header.mode != expected_mode {
        return Err(Error::Format(format!(
            "cache mode {} does not match requested {}",
            header.mode, expected_mode
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}
