//! Directed multigraph with fixed and fragile (switchable) edges.
//!
//! Node ids are dense integers from 0. Parallel fixed edges are merged into
//! an integer multiplicity; fragile edges are kept as distinct records (their
//! id is the handle by which configurations and constraint sets refer to
//! them, so two fragile records may share endpoints). Graphs are immutable
//! after construction: every operation returns a new value.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge kind: permanently present, or under our control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Fixed,
    Fragile,
}

/// One edge record. `multiplicity` is the integer weight of the edge; a
/// random walk leaving `src` picks among out-edges proportionally to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub multiplicity: u32,
    pub kind: EdgeKind,
}

/// How to repair dangling nodes (nodes with no outgoing edge at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DanglingRule {
    /// Add a single fixed self-loop.
    SelfLoop,
    /// Add one fixed edge to every node (including the node itself).
    UniformToAll,
    /// No repair allowed: a dangling node is an error.
    Reject,
}

/// A subset of the fragile edges marked active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    active: Vec<bool>,
}

impl Configuration {
    pub fn empty(d: usize) -> Self {
        Configuration {
            active: vec![false; d],
        }
    }

    pub fn full(d: usize) -> Self {
        Configuration {
            active: vec![true; d],
        }
    }

    /// Build from a bitmask; bit `k` activates fragile edge `k`. Only the low
    /// `d` bits are read.
    pub fn from_mask(d: usize, mask: u64) -> Self {
        Configuration {
            active: (0..d).map(|k| mask >> k & 1 == 1).collect(),
        }
    }

    pub fn from_active_ids(d: usize, ids: &[usize]) -> Result<Self> {
        let mut cfg = Configuration::empty(d);
        for &id in ids {
            if id >= d {
                return Err(Error::UnknownFragileEdge { id, count: d });
            }
            cfg.active[id] = true;
        }
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, id: usize) -> bool {
        self.active.get(id).copied().unwrap_or(false)
    }

    pub fn set(&mut self, id: usize, on: bool) {
        self.active[id] = on;
    }

    pub fn popcount(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Sorted list of active fragile-edge ids.
    pub fn active_ids(&self) -> Vec<usize> {
        (0..self.active.len())
            .filter(|&k| self.active[k])
            .collect()
    }

    pub fn as_mask(&self) -> u64 {
        assert!(self.active.len() <= 64, "mask view limited to 64 edges");
        self.active
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .fold(0u64, |m, (k, _)| m | 1 << k)
    }
}

/// Directed multigraph with fixed and fragile edge sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl DiGraph {
    /// Build a graph from edge records. Fixed records with equal endpoints
    /// are merged by summing multiplicities; fragile records are kept
    /// distinct in input order (their position among fragile records is
    /// their id).
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        let mut fixed: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        let mut fragile = Vec::new();
        for e in edges {
            if e.src >= n {
                return Err(Error::NodeOutOfRange { node: e.src, n });
            }
            if e.dst >= n {
                return Err(Error::NodeOutOfRange { node: e.dst, n });
            }
            if e.multiplicity == 0 {
                return Err(Error::InvalidInput(format!(
                    "edge {} -> {} has zero multiplicity",
                    e.src, e.dst
                )));
            }
            match e.kind {
                EdgeKind::Fixed => *fixed.entry((e.src, e.dst)).or_insert(0) += e.multiplicity,
                EdgeKind::Fragile => fragile.push(e),
            }
        }
        let mut all: Vec<Edge> = fixed
            .into_iter()
            .map(|((src, dst), multiplicity)| Edge {
                src,
                dst,
                multiplicity,
                kind: EdgeKind::Fixed,
            })
            .collect();
        all.extend(fragile);
        Ok(DiGraph { n, edges: all })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// All edge records, fixed first (sorted by endpoints), then fragile in
    /// id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn fixed_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Fixed)
    }

    /// Fragile records in id order: the `k`-th yielded record has id `k`.
    pub fn fragile_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Fragile)
    }

    pub fn fragile_count(&self) -> usize {
        self.fragile_edges().count()
    }

    pub fn fragile_edge(&self, id: usize) -> Result<&Edge> {
        self.fragile_edges().nth(id).ok_or(Error::UnknownFragileEdge {
            id,
            count: self.fragile_count(),
        })
    }

    /// Sum of fixed out-multiplicities of `node`.
    pub fn fixed_out_degree(&self, node: usize) -> u64 {
        self.fixed_edges()
            .filter(|e| e.src == node)
            .map(|e| u64::from(e.multiplicity))
            .sum()
    }

    /// Sum of fragile out-multiplicities of `node` (all records, active or not).
    pub fn fragile_out_degree(&self, node: usize) -> u64 {
        self.fragile_edges()
            .filter(|e| e.src == node)
            .map(|e| u64::from(e.multiplicity))
            .sum()
    }

    /// Total out-degree (fixed + fragile multiplicities).
    pub fn out_degree(&self, node: usize) -> u64 {
        self.fixed_out_degree(node) + self.fragile_out_degree(node)
    }

    /// Nodes with no outgoing edge at all (fixed or fragile).
    pub fn dangling_nodes(&self) -> Vec<usize> {
        let mut has_out = vec![false; self.n];
        for e in &self.edges {
            has_out[e.src] = true;
        }
        (0..self.n).filter(|&i| !has_out[i]).collect()
    }

    /// Nodes whose out-edges are all fragile: they become dangling when every
    /// one of their links is deactivated.
    pub fn fragile_nodes(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.fixed_out_degree(i) == 0 && self.fragile_out_degree(i) > 0)
            .collect()
    }

    /// Keep all fixed edges plus exactly the active fragile edges, re-marked
    /// fixed. The result has no fragile edges.
    pub fn apply_configuration(&self, cfg: &Configuration) -> Result<DiGraph> {
        if cfg.len() != self.fragile_count() {
            return Err(Error::UnknownFragileEdge {
                id: cfg.len().saturating_sub(1),
                count: self.fragile_count(),
            });
        }
        let edges = self
            .fixed_edges()
            .copied()
            .chain(
                self.fragile_edges()
                    .enumerate()
                    .filter(|(k, _)| cfg.is_active(*k))
                    .map(|(_, e)| Edge {
                        kind: EdgeKind::Fixed,
                        ..*e
                    }),
            )
            .collect::<Vec<_>>();
        DiGraph::new(self.n, edges)
    }

    /// Repair dangling nodes according to `rule`. Nodes with any outgoing
    /// edge (fixed or fragile) are untouched, so the operation is idempotent.
    pub fn handle_dangling(&self, rule: DanglingRule) -> Result<DiGraph> {
        let dangling = self.dangling_nodes();
        if dangling.is_empty() {
            return Ok(self.clone());
        }
        let mut edges: Vec<Edge> = self.edges.clone();
        for &node in &dangling {
            match rule {
                DanglingRule::Reject => return Err(Error::DanglingNode { node }),
                DanglingRule::SelfLoop => edges.push(Edge {
                    src: node,
                    dst: node,
                    multiplicity: 1,
                    kind: EdgeKind::Fixed,
                }),
                DanglingRule::UniformToAll => {
                    for dst in 0..self.n {
                        edges.push(Edge {
                            src: node,
                            dst,
                            multiplicity: 1,
                            kind: EdgeKind::Fixed,
                        });
                    }
                }
            }
        }
        DiGraph::new(self.n, edges)
    }

    /// Parse the edge-list text format.
    ///
    /// First non-comment line: node count. Every further non-comment line:
    /// `<src> <dst> <fixed|fragile> [multiplicity]`, whitespace-delimited;
    /// `#` starts a comment. If the header is missing the node count defaults
    /// to 1 + the largest id mentioned.
    pub fn load(text: &str) -> Result<DiGraph> {
        let mut n: Option<usize> = None;
        let mut records: Vec<Edge> = Vec::new();
        let mut max_id = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.split_once('#') {
                Some((head, _)) => head,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if n.is_none() && fields.len() == 1 {
                n = Some(fields[0].parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("expected node count, found {:?}", fields[0]),
                })?);
                continue;
            }
            if fields.len() < 3 || fields.len() > 4 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "expected `<src> <dst> <fixed|fragile> [multiplicity]`, found {:?}",
                        line
                    ),
                });
            }
            let parse_id = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid node id {:?}", s),
                })
            };
            let src = parse_id(fields[0])?;
            let dst = parse_id(fields[1])?;
            let kind = match fields[2] {
                "fixed" => EdgeKind::Fixed,
                "fragile" => EdgeKind::Fragile,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("edge kind must be `fixed` or `fragile`, found {:?}", other),
                    })
                }
            };
            let multiplicity = match fields.get(3) {
                Some(s) => s.parse::<u32>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid multiplicity {:?}", s),
                })?,
                None => 1,
            };
            if multiplicity == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "multiplicity must be >= 1".into(),
                });
            }
            max_id = max_id.max(src).max(dst);
            records.push(Edge {
                src,
                dst,
                multiplicity,
                kind,
            });
        }
        let n = n.unwrap_or(max_id + 1);
        for e in &records {
            let node = e.src.max(e.dst);
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
        }
        DiGraph::new(n, records)
    }

    /// Render the graph in the edge-list format accepted by [`DiGraph::load`].
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n);
        for e in &self.edges {
            let kind = match e.kind {
                EdgeKind::Fixed => "fixed",
                EdgeKind::Fragile => "fragile",
            };
            if e.multiplicity == 1 {
                let _ = writeln!(out, "{} {} {}", e.src, e.dst, kind);
            } else {
                let _ = writeln!(out, "{} {} {} {}", e.src, e.dst, kind, e.multiplicity);
            }
        }
        out
    }
}
