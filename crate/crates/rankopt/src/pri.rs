//! PageRank Iteration: greedy fragile-link improvement driven by mean
//! hitting times, for the undamped problem.
//!
//! Starting from the full configuration, each round computes the hitting
//! times `H_k` of the target under the current graph and then re-decides
//! every fragile link `(i, j)` in isolation: activate it exactly when
//! stepping through it looks at least one step cheaper than staying put,
//! `H_k(i) >= H_k(j) + 1` (with arrival at the target itself worth 0). This
//! is policy iteration on the refined SSP model with the auxiliary states
//! left implicit, so it terminates finitely at the optimum. The minimizing
//! variant reverses the comparison and first runs an exact structural test
//! for configurations that strand the walk, where the minimum PageRank is 0.
//!
//! Both routines require every node to keep a fixed out-edge once dangling
//! nodes are repaired; instances with fragile nodes belong to the refined
//! SSP solvers, which implement their multi-action treatment.

use serde::Serialize;

use crate::chain::{hitting_times, hitting_times_extended};
use crate::error::{Error, Result};
use crate::graph::{Configuration, DanglingRule, DiGraph};

/// Ties in the greedy comparison within this band keep the link's previous
/// status, which is what makes the iteration terminate instead of flapping
/// between equal-value configurations.
pub const TIE_TOL: f64 = 1e-9;

/// One iteration record: the configuration evaluated and its hitting times.
#[derive(Debug, Clone, Serialize)]
pub struct PriIteration {
    pub k: usize,
    /// Active fragile-edge ids, sorted.
    pub active: Vec<usize>,
    /// Hitting times to the target per node; entry `v` is the expected first
    /// return time. Infinite entries serialize as null.
    pub hitting: Vec<f64>,
    pub return_time: f64,
}

/// Per-iteration trace of a run. The return-time column is monotone:
/// non-increasing for maximization, non-decreasing for minimization.
#[derive(Debug, Clone, Serialize, Default)]
pub struct PriTrace {
    pub iterations: Vec<PriIteration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriResult {
    pub pagerank: f64,
    pub configuration: Configuration,
    pub trace: PriTrace,
}

enum Goal {
    Maximize,
    Minimize,
}

fn prepare(g: &DiGraph, v: usize, rule: DanglingRule) -> Result<DiGraph> {
    let g = g.handle_dangling(rule)?;
    if v >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            node: v,
            n: g.node_count(),
        });
    }
    if let Some(&node) = g.fragile_nodes().first() {
        return Err(Error::FragileNode { node });
    }
    Ok(g)
}

fn iteration_cap(d: usize) -> usize {
    // Policy iteration visits each configuration at most once.
    1usize.checked_shl(d.min(24) as u32).unwrap_or(usize::MAX) + 8
}

fn run(g: DiGraph, v: usize, goal: Goal) -> Result<PriResult> {
    let d = g.fragile_count();
    let mut cfg = Configuration::full(d);
    let mut trace = PriTrace::default();
    let cap = iteration_cap(d);
    for k in 0.. {
        if k > cap {
            return Err(Error::Numeric(format!(
                "greedy iteration exceeded {cap} rounds without settling"
            )));
        }
        let gk = g.apply_configuration(&cfg)?;
        let h = match goal {
            // Under (AR) the full configuration reaches the target from
            // everywhere, and improvement preserves that.
            Goal::Maximize => hitting_times(&gk, v)?,
            Goal::Minimize => hitting_times_extended(&gk, v)?,
        };
        if !h[v].is_finite() {
            return Err(Error::Numeric(format!(
                "return time diverged in round {k}; the structural trap test should have caught this"
            )));
        }
        trace.iterations.push(PriIteration {
            k,
            active: cfg.active_ids(),
            hitting: h.clone(),
            return_time: h[v],
        });

        let mut next = cfg.clone();
        for (id, e) in g.fragile_edges().enumerate() {
            // Value of arriving at j (0 at the split target), plus the step.
            let on_value = if e.dst == v { 0.0 } else { h[e.dst] } + 1.0;
            let off_value = h[e.src];
            if !off_value.is_finite() && !on_value.is_finite() {
                continue; // both branches stranded; irrelevant to the target
            }
            let delta = off_value - on_value;
            let decision = match goal {
                Goal::Maximize => {
                    if delta > TIE_TOL {
                        Some(true)
                    } else if delta < -TIE_TOL {
                        Some(false)
                    } else {
                        None
                    }
                }
                Goal::Minimize => {
                    if delta < -TIE_TOL {
                        Some(true)
                    } else if delta > TIE_TOL {
                        Some(false)
                    } else {
                        None
                    }
                }
            };
            if let Some(on) = decision {
                next.set(id, on);
            }
        }
        if next == cfg {
            let last = trace.iterations.last().expect("at least one iteration");
            return Ok(PriResult {
                pagerank: 1.0 / last.return_time,
                configuration: cfg,
                trace,
            });
        }
        cfg = next;
    }
    unreachable!()
}

/// Maximum PageRank of `v` over all fragile-link configurations, undamped.
///
/// Requires (AR): the full configuration must reach `v` from every node,
/// which is checked up front by the first hitting-time solve.
pub fn pagerank_iteration(g: &DiGraph, v: usize, rule: DanglingRule) -> Result<PriResult> {
    let g = prepare(g, v, rule)?;
    run(g, v, Goal::Maximize)
}

/// Minimum PageRank of `v` over all fragile-link configurations, undamped.
///
/// If some configuration lets the walk started at `v` escape into a region
/// with no path back, the minimum is 0 by the `1/inf = 0` convention; that
/// case is decided exactly by [`strandable_witness`] before any iteration.
pub fn min_pagerank_iteration(g: &DiGraph, v: usize, rule: DanglingRule) -> Result<PriResult> {
    let g = prepare(g, v, rule)?;
    if let Some(witness) = strandable_witness(&g, v) {
        return Ok(PriResult {
            pagerank: 0.0,
            configuration: witness,
            trace: PriTrace::default(),
        });
    }
    run(g, v, Goal::Minimize)
}

/// Exact test for "can some configuration make `v` transient?".
///
/// A set of nodes avoiding `v` can be sealed off exactly when every fixed
/// edge leaving it stays inside (its fragile exits are simply switched off);
/// the largest such set `W` is a greatest fixed point. Some configuration
/// strands the walk iff `v` reaches `W` with everything activated, because
/// an entry path can always be rerouted to avoid edges controlled by the
/// seal. Returns a witness configuration: fragile edges out of `W` off,
/// everything else on.
///
/// Only valid for graphs where every node keeps a fixed out-edge (checked by
/// the callers), so sealing never creates a dangling node.
pub fn strandable_witness(g: &DiGraph, v: usize) -> Option<Configuration> {
    let n = g.node_count();
    let mut in_w = vec![true; n];
    in_w[v] = false;
    // Peel nodes whose fixed edges can escape, to the greatest fixed point.
    loop {
        let mut changed = false;
        for e in g.fixed_edges() {
            if in_w[e.src] && !in_w[e.dst] {
                in_w[e.src] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if !in_w.iter().any(|&b| b) {
        return None;
    }
    // Is W reachable from v when every fragile link is on?
    let full = g
        .apply_configuration(&Configuration::full(g.fragile_count()))
        .expect("full configuration is always valid");
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = full
        .edges()
        .iter()
        .filter(|e| e.src == v)
        .map(|e| e.dst)
        .collect();
    let mut hit = false;
    while let Some(x) = stack.pop() {
        if seen[x] {
            continue;
        }
        seen[x] = true;
        if in_w[x] {
            hit = true;
            break;
        }
        stack.extend(
            full.edges()
                .iter()
                .filter(|e| e.src == x)
                .map(|e| e.dst),
        );
    }
    if !hit {
        return None;
    }
    let mut witness = Configuration::full(g.fragile_count());
    for (id, e) in g.fragile_edges().enumerate() {
        if in_w[e.src] {
            witness.set(id, false);
        }
    }
    Some(witness)
}
