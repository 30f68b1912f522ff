//! SMILES parsing for heavy-atom molecular graphs.
//!
//! Covers the subset the Zinc data model needs: organic-subset atoms,
//! simple bracket atoms, bond symbols `- = # :`, branches, and ring
//! closures (single digit or `%nn`). Aromatic lowercase atoms produce
//! aromatic default bonds. Charged and isotopic bracket atoms are outside
//! the modeled type space and rejected; stereo markers are ignored.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::MolecularGraph;
use crate::ingest::{DatasetSpec, RecordDiagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondSym {
    fn type_name(self) -> &'static str {
        match self {
            BondSym::Single => "single",
            BondSym::Double => "double",
            BondSym::Triple => "triple",
            BondSym::Aromatic => "aromatic",
        }
    }
}

/// Accepted graphs plus per-line rejection diagnostics for a molecule-per-
/// line SMILES file.
#[derive(Debug, Default)]
pub struct SmilesParse {
    pub graphs: Vec<MolecularGraph>,
    pub rejects: Vec<RecordDiagnostic>,
}

/// Parses one SMILES string into a heavy-atom graph.
pub fn parse_smiles(s: &str, spec: &DatasetSpec) -> Result<MolecularGraph> {
    Parser {
        chars: s.chars().collect(),
        pos: 0,
        spec,
        graph: MolecularGraph::new(),
        aromatic: Vec::new(),
    }
    .parse()
}

/// Parses a text file with one SMILES per line (anything after the first
/// whitespace on a line, such as a compound id, is ignored). Bad lines
/// become diagnostics, not failures.
pub fn parse_smiles_file(text: &str, spec: &DatasetSpec) -> SmilesParse {
    let mut out = SmilesParse::default();
    let mut record = 0usize;
    for (i, line) in text.lines().enumerate() {
        let Some(token) = line.split_whitespace().next() else {
            continue;
        };
        match parse_smiles(token, spec) {
            Ok(g) => out.graphs.push(g),
            Err(e) => out.rejects.push(RecordDiagnostic {
                record,
                line: i + 1,
                reason: e.to_string(),
            }),
        }
        record += 1;
    }
    out
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    spec: &'a DatasetSpec,
    graph: MolecularGraph,
    aromatic: Vec<bool>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: 0,
            message: format!("{} (at character {})", message.into(), self.pos),
        }
    }

    fn parse(mut self) -> Result<MolecularGraph> {
        let mut prev: Option<usize> = None;
        let mut branch_stack: Vec<usize> = Vec::new();
        let mut pending: Option<BondSym> = None;
        // Ring number -> (open atom, bond symbol at the opening side).
        let mut rings: HashMap<u32, (usize, Option<BondSym>)> = HashMap::new();

        while let Some(c) = self.peek() {
            match c {
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    if pending.is_some() {
                        return Err(self.err("two bond symbols in a row"));
                    }
                    pending = Some(match c {
                        '=' => BondSym::Double,
                        '#' => BondSym::Triple,
                        ':' => BondSym::Aromatic,
                        // '-', '/' and '\' all mean a single bond here;
                        // bond direction is stereochemistry, which this
                        // data model does not carry.
                        _ => BondSym::Single,
                    });
                    self.next();
                }
                '(' => {
                    let Some(p) = prev else {
                        return Err(self.err("branch before any atom"));
                    };
                    if pending.is_some() {
                        return Err(self.err("bond symbol before branch open"));
                    }
                    branch_stack.push(p);
                    self.next();
                }
                ')' => {
                    let Some(p) = branch_stack.pop() else {
                        return Err(self.err("unmatched ')'"));
                    };
                    prev = Some(p);
                    self.next();
                }
                '0'..='9' | '%' => {
                    let Some(atom) = prev else {
                        return Err(self.err("ring closure before any atom"));
                    };
                    let number = self.ring_number()?;
                    match rings.remove(&number) {
                        None => {
                            rings.insert(number, (atom, pending.take()));
                        }
                        Some((open_atom, open_bond)) => {
                            let close_bond = pending.take();
                            let sym = match (open_bond, close_bond) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(self.err(format!(
                                        "ring {number} bond symbols disagree"
                                    )))
                                }
                                (Some(a), _) | (_, Some(a)) => a,
                                (None, None) => self.default_bond(open_atom, atom),
                            };
                            self.add_bond(open_atom, atom, sym)?;
                        }
                    }
                }
                '.' => return Err(self.err("disconnected molecule ('.' separator)")),
                '[' => {
                    let idx = self.bracket_atom()?;
                    self.link(&mut prev, &mut pending, idx)?;
                }
                _ => {
                    let idx = self.organic_atom()?;
                    self.link(&mut prev, &mut pending, idx)?;
                }
            }
        }

        if !branch_stack.is_empty() {
            return Err(self.err("unmatched '('"));
        }
        if let Some(n) = rings.keys().next() {
            return Err(self.err(format!("unclosed ring number {n}")));
        }
        if pending.is_some() {
            return Err(self.err("dangling bond symbol"));
        }
        if self.graph.is_empty() {
            return Err(self.err("empty molecule"));
        }
        if self.graph.vertex_count() > self.spec.max_vertices {
            return Err(Error::Rejected(format!(
                "molecule has {} atoms, above the {}-atom cap",
                self.graph.vertex_count(),
                self.spec.max_vertices
            )));
        }
        Ok(self.graph)
    }

    fn link(
        &mut self,
        prev: &mut Option<usize>,
        pending: &mut Option<BondSym>,
        new: usize,
    ) -> Result<()> {
        if let Some(p) = *prev {
            let sym = pending.take().unwrap_or_else(|| self.default_bond(p, new));
            self.add_bond(p, new, sym)?;
        } else if pending.is_some() {
            return Err(self.err("bond symbol before first atom"));
        }
        *prev = Some(new);
        Ok(())
    }

    fn default_bond(&self, a: usize, b: usize) -> BondSym {
        if self.aromatic[a] && self.aromatic[b] {
            BondSym::Aromatic
        } else {
            BondSym::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, sym: BondSym) -> Result<()> {
        let label = self
            .spec
            .edge_type_index(sym.type_name())
            .ok_or_else(|| self.err(format!("edge type outside table: {}", sym.type_name())))?;
        self.graph.add_edge(a, b, label).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })
    }

    fn ring_number(&mut self) -> Result<u32> {
        match self.next() {
            Some('%') => {
                let d1 = self.next().and_then(|c| c.to_digit(10));
                let d2 = self.next().and_then(|c| c.to_digit(10));
                match (d1, d2) {
                    (Some(a), Some(b)) => Ok(a * 10 + b),
                    _ => Err(self.err("'%' must be followed by two digits")),
                }
            }
            Some(c) => c
                .to_digit(10)
                .ok_or_else(|| self.err("expected ring digit")),
            None => Err(self.err("expected ring number")),
        }
    }

    fn add_atom(&mut self, symbol: &str, aromatic: bool) -> Result<usize> {
        let t = self
            .spec
            .vertex_type_index(symbol)
            .ok_or_else(|| Error::Rejected(format!("element outside type table: {symbol}")))?;
        let idx = self.graph.add_vertex(t);
        self.aromatic.push(aromatic);
        Ok(idx)
    }

    fn organic_atom(&mut self) -> Result<usize> {
        let c = self.next().expect("caller peeked");
        match c {
            'C' if self.peek() == Some('l') => {
                self.next();
                self.add_atom("Cl", false)
            }
            'B' if self.peek() == Some('r') => {
                self.next();
                self.add_atom("Br", false)
            }
            'C' | 'N' | 'O' | 'F' | 'P' | 'S' | 'I' | 'H' => {
                self.add_atom(&c.to_string(), false)
            }
            'c' | 'n' | 'o' | 's' | 'p' => {
                self.add_atom(&c.to_uppercase().to_string(), true)
            }
            other => Err(self.err(format!("unexpected character '{other}'"))),
        }
    }

    /// `[symbol]` with optional stereo marks and hydrogen count; charge and
    /// isotope put an atom outside the modeled type space.
    fn bracket_atom(&mut self) -> Result<usize> {
        self.next(); // consume '['
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(Error::Rejected("isotope-labeled atom".into()));
        }
        let mut symbol = String::new();
        let aromatic = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                symbol.push(c);
                self.next();
                if let Some(c2) = self.peek().filter(|c2| c2.is_ascii_lowercase()) {
                    let two = format!("{symbol}{c2}");
                    if self.spec.vertex_type_index(&two).is_some() {
                        symbol = two;
                        self.next();
                    }
                }
                false
            }
            Some(c) if c.is_ascii_lowercase() => {
                symbol.push(c.to_ascii_uppercase());
                self.next();
                true
            }
            _ => return Err(self.err("expected element symbol in brackets")),
        };
        loop {
            match self.peek() {
                Some('@') => {
                    self.next(); // stereo ignored
                }
                Some('H') => {
                    self.next();
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        self.next();
                    }
                }
                Some('+') | Some('-') => {
                    return Err(Error::Rejected("charged atom".into()));
                }
                Some(']') => {
                    self.next();
                    break;
                }
                Some(other) => {
                    return Err(self.err(format!("unsupported bracket content '{other}'")))
                }
                None => return Err(self.err("unterminated bracket atom")),
            }
        }
        self.add_atom(&symbol, aromatic)
    }
}
