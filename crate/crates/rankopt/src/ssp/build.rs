//! Construction of the simple and refined SSP models from a Max-PageRank
//! instance.
//!
//! Both builders split the optimized node `v` into a start state `v_s`
//! (keeps all out-edges, state index `v`) and an absorbing target `v_t`
//! (receives all in-edges, last state index). Walking a step costs one;
//! detours through auxiliary states are free, so a policy's cost-to-go at
//! `v_s` is exactly the expected first return time of the original walk.

use std::collections::BTreeMap;

use crate::chain::Personalization;
use crate::error::{Error, Result};
use crate::graph::{DanglingRule, DiGraph, EdgeKind};
use crate::ssp::{Action, ActionLabel, SspModel, StateLabel, Transition};

/// Per-node view of the outgoing edge records, in stored order.
struct OutEdges {
    /// (target node, multiplicity) of fixed edges.
    fixed: Vec<(usize, u32)>,
    /// (fragile id, target node, multiplicity).
    fragile: Vec<(usize, usize, u32)>,
    fixed_degree: u64,
    fragile_degree: u64,
}

fn out_edges(g: &DiGraph) -> Vec<OutEdges> {
    let mut per_node: Vec<OutEdges> = (0..g.node_count())
        .map(|_| OutEdges {
            fixed: Vec::new(),
            fragile: Vec::new(),
            fixed_degree: 0,
            fragile_degree: 0,
        })
        .collect();
    let mut fragile_id = 0usize;
    for e in g.edges() {
        let slot = &mut per_node[e.src];
        match e.kind {
            EdgeKind::Fixed => {
                slot.fixed.push((e.dst, e.multiplicity));
                slot.fixed_degree += u64::from(e.multiplicity);
            }
            EdgeKind::Fragile => {
                slot.fragile.push((fragile_id, e.dst, e.multiplicity));
                slot.fragile_degree += u64::from(e.multiplicity);
                fragile_id += 1;
            }
        }
    }
    per_node
}

/// Simple formulation: states are the nodes (with `v` split), and each node
/// chooses which subset of its outgoing fragile links to activate, so a node
/// with `b` fragile records has `2^b` actions. Every step costs one.
///
/// A node whose out-edges are all fragile turns dangling under the empty
/// subset; that action then applies the dangling rule, and `Reject` makes
/// such a node an error (use the refined model's treatment instead).
pub fn build_simple_ssp(g: &DiGraph, v: usize, rule: DanglingRule) -> Result<SspModel> {
    let g = g.handle_dangling(rule)?;
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    let per_node = out_edges(&g);
    let target = n;
    // Arrival at v is arrival at the target.
    let dest = |j: usize| if j == v { target } else { j };

    let mut labels: Vec<StateLabel> = (0..n).map(StateLabel::Node).collect();
    labels.push(StateLabel::Target);
    let mut subset_edges = BTreeMap::new();
    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(n + 1);

    for (i, out) in per_node.iter().enumerate() {
        let b = out.fragile.len();
        if b > 20 {
            return Err(Error::InvalidInput(format!(
                "node {i} has {b} fragile out-edges; the simple model would need 2^{b} actions"
            )));
        }
        if b > 0 {
            subset_edges.insert(i, out.fragile.iter().map(|&(id, _, _)| id).collect());
        }
        let mut acts = Vec::with_capacity(1 << b);
        for mask in 0u64..(1 << b) {
            let active_mult: u64 = out
                .fragile
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask >> bit & 1 == 1)
                .map(|(_, &(_, _, m))| u64::from(m))
                .sum();
            let denom = out.fixed_degree + active_mult;
            let mut transitions = Vec::new();
            if denom == 0 {
                // All links off at a fragile node: fall back to the rule.
                match rule {
                    DanglingRule::Reject => return Err(Error::FragileNode { node: i }),
                    DanglingRule::SelfLoop => transitions.push(Transition {
                        to: dest(i),
                        prob: 1.0,
                        cost: 1.0,
                    }),
                    DanglingRule::UniformToAll => {
                        for w in 0..n {
                            transitions.push(Transition {
                                to: dest(w),
                                prob: 1.0 / n as f64,
                                cost: 1.0,
                            });
                        }
                    }
                }
            } else {
                for &(j, m) in &out.fixed {
                    transitions.push(Transition {
                        to: dest(j),
                        prob: f64::from(m) / denom as f64,
                        cost: 1.0,
                    });
                }
                for (bit, &(_, j, m)) in out.fragile.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        transitions.push(Transition {
                            to: dest(j),
                            prob: f64::from(m) / denom as f64,
                            cost: 1.0,
                        });
                    }
                }
            }
            acts.push(Action {
                label: ActionLabel::Subset(mask),
                transitions,
            });
        }
        actions.push(acts);
    }
    actions.push(vec![absorbing(target)]);

    SspModel::assemble(
        labels,
        actions,
        Some(v),
        None,
        g.fragile_count(),
        subset_edges,
    )
}

/// Refined formulation: one auxiliary two-action state per fragile link, at
/// most two actions per state, `n + d + 1` states without damping and
/// `2n + d + 2` with it.
///
/// A step into a real node costs one; entering a fragile auxiliary or
/// bouncing off a deactivated link is free, so cost-to-go values equal those
/// of the simple model. Fragile nodes (only fragile out-edges) get one
/// action per link ("activate exactly this one") plus a dangling-rule
/// fallback; their links have no auxiliary states. With damping, every
/// arrival into a node is routed through a half-step state that teleports
/// with probability `c`; leaving the teleportation state costs one step.
pub fn build_refined_ssp(
    g: &DiGraph,
    v: usize,
    rule: DanglingRule,
    pers: Option<&Personalization>,
) -> Result<SspModel> {
    let g = g.handle_dangling(rule)?;
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    if let Some(p) = pers {
        if p.n() != n {
            return Err(Error::BadPersonalization(format!(
                "personalization has {} entries for a {n}-node graph",
                p.n()
            )));
        }
    }
    let per_node = out_edges(&g);
    let fragile_nodes: Vec<bool> = (0..n)
        .map(|i| per_node[i].fixed_degree == 0 && !per_node[i].fragile.is_empty())
        .collect();
    if rule == DanglingRule::Reject {
        if let Some(i) = (0..n).find(|&i| fragile_nodes[i]) {
            return Err(Error::FragileNode { node: i });
        }
    }

    // Fragile links of fragile nodes are decided at the node itself and get
    // no auxiliary state.
    let mut aux_of_fragile: Vec<Option<usize>> = vec![None; g.fragile_count()];
    let mut next = n;
    for i in 0..n {
        if fragile_nodes[i] {
            continue;
        }
        for &(id, _, _) in &per_node[i].fragile {
            aux_of_fragile[id] = Some(next);
            next += 1;
        }
    }
    let d_aux = next - n;

    let damped = pers.is_some();
    // Damping layout: h-states for every node except v, then h(v_t), then q,
    // then v_t; undamped: v_t right after the auxiliaries.
    let h_base = n + d_aux;
    let h_of_node = |w: usize| {
        debug_assert!(w != v);
        h_base + if w < v { w } else { w - 1 }
    };
    let h_target = h_base + n - 1;
    let q_state = h_base + n;
    let target = if damped { h_base + n + 1 } else { h_base };

    // Where a real step into node j lands.
    let dest = |j: usize| {
        if damped {
            if j == v {
                h_target
            } else {
                h_of_node(j)
            }
        } else if j == v {
            target
        } else {
            j
        }
    };

    let mut labels = vec![StateLabel::Target; target + 1];
    let mut actions: Vec<Vec<Action>> = vec![Vec::new(); target + 1];

    for i in 0..n {
        labels[i] = StateLabel::Node(i);
        let out = &per_node[i];
        if fragile_nodes[i] {
            let mut acts: Vec<Action> = out
                .fragile
                .iter()
                .map(|&(id, j, _)| Action {
                    label: ActionLabel::ActivateLink(id),
                    transitions: vec![Transition {
                        to: dest(j),
                        prob: 1.0,
                        cost: 1.0,
                    }],
                })
                .collect();
            match rule {
                DanglingRule::Reject => {}
                DanglingRule::SelfLoop => acts.push(Action {
                    label: ActionLabel::Fallback,
                    transitions: vec![Transition {
                        to: dest(i),
                        prob: 1.0,
                        cost: 1.0,
                    }],
                }),
                DanglingRule::UniformToAll => acts.push(Action {
                    label: ActionLabel::Fallback,
                    transitions: (0..n)
                        .map(|w| Transition {
                            to: dest(w),
                            prob: 1.0 / n as f64,
                            cost: 1.0,
                        })
                        .collect(),
                }),
            }
            actions[i] = acts;
        } else {
            let denom = (out.fixed_degree + out.fragile_degree) as f64;
            let mut transitions = Vec::new();
            for &(j, m) in &out.fixed {
                transitions.push(Transition {
                    to: dest(j),
                    prob: f64::from(m) / denom,
                    cost: 1.0,
                });
            }
            for &(id, _, m) in &out.fragile {
                transitions.push(Transition {
                    to: aux_of_fragile[id].expect("aux state exists for non-fragile-node link"),
                    prob: f64::from(m) / denom,
                    cost: 0.0,
                });
            }
            actions[i] = vec![Action {
                label: ActionLabel::Walk,
                transitions,
            }];
        }
    }

    // Fragile auxiliaries: "on" walks the link (one step), "off" bounces
    // back to the source for free.
    for (fragile_id, e) in g.fragile_edges().enumerate() {
        if let Some(s) = aux_of_fragile[fragile_id] {
            labels[s] = StateLabel::FragileAux(fragile_id);
            actions[s] = vec![
                Action {
                    label: ActionLabel::On,
                    transitions: vec![Transition {
                        to: dest(e.dst),
                        prob: 1.0,
                        cost: 1.0,
                    }],
                },
                Action {
                    label: ActionLabel::Off,
                    transitions: vec![Transition {
                        to: e.src,
                        prob: 1.0,
                        cost: 0.0,
                    }],
                },
            ];
        }
    }

    if let Some(p) = pers {
        let c = p.damping();
        for w in 0..n {
            if w == v {
                continue;
            }
            let h = h_of_node(w);
            labels[h] = StateLabel::Damping(w);
            actions[h] = vec![Action {
                label: ActionLabel::Nop,
                transitions: vec![
                    Transition {
                        to: w,
                        prob: 1.0 - c,
                        cost: 0.0,
                    },
                    Transition {
                        to: q_state,
                        prob: c,
                        cost: 0.0,
                    },
                ],
            }];
        }
        // The half-step in front of the target completes the return: no
        // further teleport decision is pending once the step landed on v.
        labels[h_target] = StateLabel::Damping(target);
        actions[h_target] = vec![Action {
            label: ActionLabel::Nop,
            transitions: vec![Transition {
                to: target,
                prob: 1.0,
                cost: 0.0,
            }],
        }];
        labels[q_state] = StateLabel::Teleport;
        let mut transitions: Vec<Transition> = (0..n)
            .filter(|&w| w != v)
            .map(|w| Transition {
                to: h_of_node(w),
                prob: p.z()[w],
                cost: 1.0,
            })
            .collect();
        // Teleporting onto v lands on the target's half-step state with the
        // split node's personalization mass; v_s gets none.
        transitions.push(Transition {
            to: h_target,
            prob: p.z()[v],
            cost: 1.0,
        });
        actions[q_state] = vec![Action {
            label: ActionLabel::Teleport,
            transitions,
        }];
    }

    labels[target] = StateLabel::Target;
    actions[target] = vec![absorbing(target)];

    SspModel::assemble(
        labels,
        actions,
        Some(v),
        pers.map(Personalization::damping),
        g.fragile_count(),
        BTreeMap::new(),
    )
}

fn absorbing(target: usize) -> Action {
    Action {
        label: ActionLabel::Nop,
        transitions: vec![Transition {
            to: target,
            prob: 1.0,
            cost: 0.0,
        }],
    }
}
