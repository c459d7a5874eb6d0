//! The mutually-exclusive-links variant is NP-hard: this module builds the
//! reduction gadget from a 3SAT formula and verifies its return-time
//! separation numerically.
//!
//! For a formula with `m` clauses the gadget has `m + 2` nodes: a source
//! `s`, one node per clause with a fixed self-loop, and the optimized node
//! `t`, with fixed edges `t -> s` and `s -> clause`. Each clause node gets
//! three parallel fragile edges into `t`, one per literal; the exclusion
//! constraints forbid activating two edges of the same clause or two edges
//! carrying complementary literals. With damping `1/(100 m)` and uniform
//! personalization, the best expected return time to `t` over feasible
//! configurations is at most 77 when the formula is satisfiable and at
//! least 99 when it is not, so thresholding at PageRank `1/77` decides
//! satisfiability.

use serde::Serialize;

use crate::chain::Personalization;
use crate::error::{Error, Result};
use crate::graph::{Configuration, DanglingRule, DiGraph, Edge, EdgeKind};
use crate::oracle::{brute_force_constrained, BruteForceOpts, ConstraintSet};

/// A propositional variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn complements(&self, other: &Literal) -> bool {
        self.var == other.var && self.negated != other.negated
    }
}

/// A 3SAT formula: every clause has exactly three literals (repetitions
/// allowed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cnf3 {
    num_vars: usize,
    clauses: Vec<[Literal; 3]>,
}

impl Cnf3 {
    pub fn new(num_vars: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        for (j, clause) in clauses.iter().enumerate() {
            for lit in clause {
                if lit.var >= num_vars {
                    return Err(Error::InvalidInput(format!(
                        "clause {j} references variable {} of {num_vars}",
                        lit.var
                    )));
                }
            }
        }
        Ok(Cnf3 { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    /// Parse the DIMACS-like format: a `p cnf <vars> <clauses>` header,
    /// then one clause per line as three signed 1-based literals terminated
    /// by 0; `c` lines are comments.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p cnf") {
                if header.is_some() {
                    return Err(err("duplicate header".into()));
                }
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(err("header must be `p cnf <vars> <clauses>`".into()));
                }
                let vars = fields[0]
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad variable count {:?}", fields[0])))?;
                let count = fields[1]
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad clause count {:?}", fields[1])))?;
                header = Some((vars, count));
                continue;
            }
            let (vars, _) = header.ok_or_else(|| err("clause before header".into()))?;
            let ints = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<i64>()
                        .map_err(|_| err(format!("bad literal {s:?}")))
                })
                .collect::<Result<Vec<i64>>>()?;
            if ints.len() != 4 || ints[3] != 0 {
                return Err(err(
                    "each clause needs exactly three literals and a closing 0".into(),
                ));
            }
            let mut lits = [Literal {
                var: 0,
                negated: false,
            }; 3];
            for (slot, &value) in lits.iter_mut().zip(&ints[..3]) {
                if value == 0 {
                    return Err(err("literal 0 inside a clause".into()));
                }
                let var = value.unsigned_abs() as usize - 1;
                if var >= vars {
                    return Err(err(format!(
                        "literal {value} exceeds declared {vars} variables"
                    )));
                }
                *slot = Literal {
                    var,
                    negated: value < 0,
                };
            }
            clauses.push(lits);
        }
        let (vars, count) = header.ok_or(Error::Parse {
            line: 1,
            msg: "missing `p cnf` header".into(),
        })?;
        if clauses.len() != count {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: format!("header declares {count} clauses, found {}", clauses.len()),
            });
        }
        Cnf3::new(vars, clauses)
    }

    pub fn emit_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let signed = (lit.var as i64 + 1) * if lit.negated { -1 } else { 1 };
                out.push_str(&signed.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|clause| {
            clause
                .iter()
                .any(|lit| assignment[lit.var] != lit.negated)
        })
    }

    /// Exhaustive truth-table satisfiability check (at most 20 variables).
    pub fn satisfying_assignment(&self) -> Result<Option<Vec<bool>>> {
        if self.num_vars > 20 {
            return Err(Error::EnumerationCap {
                d: self.num_vars,
                cap: 20,
            });
        }
        let n = self.num_vars;
        for mask in 0u64..1 << n {
            let assignment: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            if self.evaluate(&assignment) {
                return Ok(Some(assignment));
            }
        }
        Ok(None)
    }
}

/// The reduction gadget: graph, exclusion constraints and chain parameters.
#[derive(Debug, Clone)]
pub struct GadgetInstance {
    pub graph: DiGraph,
    pub constraints: ConstraintSet,
    /// Damping `1/(100 m)` with uniform personalization.
    pub personalization: Personalization,
    /// The node whose PageRank decides satisfiability (`t`).
    pub target: usize,
    /// Decision threshold on the PageRank: `1/77`.
    pub threshold: f64,
    pub formula: Cnf3,
}

/// Node ids of the gadget: `s` is 0, clause `j` is `j + 1`, `t` is last.
pub fn gadget_nodes(m: usize) -> (usize, usize) {
    (0, m + 1)
}

/// Build the gadget. Fragile edge `3 j + l` carries literal `l` of clause
/// `j` as one of three parallel records from the clause node into `t`.
pub fn gadget_from_3sat(f: &Cnf3) -> Result<GadgetInstance> {
    let m = f.clause_count();
    if m == 0 {
        return Err(Error::InvalidInput("formula needs at least one clause".into()));
    }
    let (s, t) = gadget_nodes(m);
    let n = m + 2;
    let mut edges = vec![Edge {
        src: t,
        dst: s,
        multiplicity: 1,
        kind: EdgeKind::Fixed,
    }];
    for j in 0..m {
        let vj = j + 1;
        edges.push(Edge {
            src: s,
            dst: vj,
            multiplicity: 1,
            kind: EdgeKind::Fixed,
        });
        edges.push(Edge {
            src: vj,
            dst: vj,
            multiplicity: 1,
            kind: EdgeKind::Fixed,
        });
        for _ in 0..3 {
            edges.push(Edge {
                src: vj,
                dst: t,
                multiplicity: 1,
                kind: EdgeKind::Fragile,
            });
        }
    }
    let graph = DiGraph::new(n, edges)?;

    let lit_of = |id: usize| f.clauses()[id / 3][id % 3];
    let d = 3 * m;
    let mut pairs = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let same_clause = a / 3 == b / 3;
            if same_clause || lit_of(a).complements(&lit_of(b)) {
                pairs.push((a, b));
            }
        }
    }
    Ok(GadgetInstance {
        graph,
        constraints: ConstraintSet::new(pairs, d)?,
        personalization: Personalization::uniform(n, 1.0 / (100.0 * m as f64))?,
        target: t,
        threshold: 1.0 / 77.0,
        formula: f.clone(),
    })
}

/// Where the constrained optimum landed relative to the proof's bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Best return time at most 77: the formula is satisfiable.
    AtMost77,
    /// Best return time at least 99: the formula is unsatisfiable.
    AtLeast99,
    /// Landed in the open gap; never observed on generated gadgets.
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub best_return_time: f64,
    pub best_pagerank: f64,
    pub satisfiable_witness: Option<Configuration>,
    pub verdict: Verdict,
    /// Configurations satisfying the exclusion constraints.
    pub feasible: usize,
}

/// Minimize the expected return time to `t` over feasible configurations
/// (computed analytically as `1/pi(t)` of the damped chain, by constrained
/// brute force) and classify against the 77/99 bounds.
pub fn verify_separation(
    inst: &GadgetInstance,
    opts: &BruteForceOpts,
) -> Result<SeparationReport> {
    let res = brute_force_constrained(
        &inst.graph,
        inst.target,
        &inst.constraints,
        Some(&inst.personalization),
        DanglingRule::Reject,
        opts,
    )?;
    let best_return_time = 1.0 / res.best_pagerank;
    let verdict = if best_return_time <= 77.0 {
        Verdict::AtMost77
    } else if best_return_time >= 99.0 {
        Verdict::AtLeast99
    } else {
        Verdict::Indeterminate
    };
    Ok(SeparationReport {
        best_return_time,
        best_pagerank: res.best_pagerank,
        satisfiable_witness: (verdict == Verdict::AtMost77).then_some(res.best),
        verdict,
        feasible: res.feasible,
    })
}

/// Read a feasible configuration back as a partial assignment: an active
/// edge asserts its literal. `None` if two active edges contradict each
/// other (impossible when the exclusion constraints hold).
pub fn configuration_assignment(f: &Cnf3, cfg: &Configuration) -> Option<Vec<Option<bool>>> {
    let mut assignment: Vec<Option<bool>> = vec![None; f.num_vars()];
    for id in cfg.active_ids() {
        let lit = f.clauses()[id / 3][id % 3];
        let value = !lit.negated;
        match assignment[lit.var] {
            Some(prev) if prev != value => return None,
            _ => assignment[lit.var] = Some(value),
        }
    }
    Some(assignment)
}
