//! Stochastic shortest path models and solvers.
//!
//! An [`SspModel`] is a finite undiscounted MDP with an absorbing, cost-free
//! target state (always the last state). Two builders turn a Max-PageRank
//! instance into such a model: [`build_simple_ssp`] gives every node the
//! power set of its outgoing fragile links as actions, and
//! [`build_refined_ssp`] inserts a two-action auxiliary state per fragile
//! link instead, which keeps the action space at two per state and supports
//! damping via a teleportation layer. Generic solvers (policy evaluation,
//! value iteration, policy iteration) operate on any model.

mod build;
mod solve;

pub use build::{build_refined_ssp, build_simple_ssp};
pub use solve::{evaluate_policy, greedy_policy, policy_iteration, value_iteration, Solution};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Configuration;

/// Probability rows must sum to 1 within this (per state and action).
pub const TRANSITION_TOL: f64 = 1e-12;

/// Provenance of a state in a built model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "id")]
pub enum StateLabel {
    /// An original graph node. The split node's id labels the start state
    /// `v_s` (which kept all of its out-edges).
    Node(usize),
    /// Auxiliary state of the fragile edge with this id.
    FragileAux(usize),
    /// Damping half-step state in front of the state with this index.
    Damping(usize),
    /// The teleportation state `q`.
    Teleport,
    /// The absorbing target `v_t`.
    Target,
}

/// What an action does, for tracing and for mapping policies to
/// fragile-link configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "arg")]
pub enum ActionLabel {
    /// The single random-walk step of a node state.
    Walk,
    /// Simple-model action: activate exactly this subset (bitmask over the
    /// node's outgoing fragile records, in fragile-id order).
    Subset(u64),
    /// Fragile auxiliary: link active.
    On,
    /// Fragile auxiliary: link inactive, bounce back to the source.
    Off,
    /// Fragile node: activate exactly the fragile edge with this id.
    ActivateLink(usize),
    /// Fragile node: deactivate everything and follow the dangling rule.
    Fallback,
    /// Deterministic pass-through (damping states, target self-loop).
    Nop,
    /// The teleportation state's single action.
    Teleport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub to: usize,
    pub prob: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Action {
    pub label: ActionLabel,
    pub transitions: Vec<Transition>,
}

impl Action {
    /// Expected immediate cost of the action.
    pub fn expected_cost(&self) -> f64 {
        self.transitions.iter().map(|t| t.prob * t.cost).sum()
    }
}

/// A deterministic policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }
}

/// Finite SSP model. The target state is always the last one; it is
/// absorbing and cost-free.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SspModel {
    labels: Vec<StateLabel>,
    actions: Vec<Vec<Action>>,
    /// Start state (`v_s`) for models built from a Max-PageRank instance.
    start: Option<usize>,
    /// Damping constant when the model carries a teleportation layer.
    damping: Option<f64>,
    /// Teleportation state index, if any.
    teleport: Option<usize>,
    /// Number of fragile edges of the originating graph.
    fragile_count: usize,
    /// Simple-model bookkeeping: node state -> its fragile-record ids in
    /// subset-mask bit order.
    #[serde(skip)]
    subset_edges: BTreeMap<usize, Vec<usize>>,
}

impl SspModel {
    /// Assemble and validate a model: non-empty action sets, probabilities
    /// summing to one, and an absorbing cost-free final state.
    pub fn from_parts(
        labels: Vec<StateLabel>,
        actions: Vec<Vec<Action>>,
        start: Option<usize>,
        damping: Option<f64>,
    ) -> Result<Self> {
        Self::assemble(labels, actions, start, damping, 0, BTreeMap::new())
    }

    pub(crate) fn assemble(
        labels: Vec<StateLabel>,
        actions: Vec<Vec<Action>>,
        start: Option<usize>,
        damping: Option<f64>,
        fragile_count: usize,
        subset_edges: BTreeMap<usize, Vec<usize>>,
    ) -> Result<Self> {
        if labels.len() != actions.len() || labels.is_empty() {
            return Err(Error::InvalidInput(
                "state labels and action table must be non-empty and equal length".into(),
            ));
        }
        let teleport = labels.iter().position(|l| *l == StateLabel::Teleport);
        let model = SspModel {
            labels,
            actions,
            start,
            damping,
            teleport,
            fragile_count,
            subset_edges,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    /// The absorbing target state.
    pub fn target(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn start(&self) -> Option<usize> {
        self.start
    }

    pub fn damping(&self) -> Option<f64> {
        self.damping
    }

    pub fn teleport(&self) -> Option<usize> {
        self.teleport
    }

    pub fn fragile_count(&self) -> usize {
        self.fragile_count
    }

    pub(crate) fn subset_edges(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.subset_edges
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> StateLabel {
        self.labels[state]
    }

    pub fn actions_of(&self, state: usize) -> &[Action] {
        &self.actions[state]
    }

    /// Largest action count over all states.
    pub fn max_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Smallest positive transition probability in the model.
    pub fn min_positive_prob(&self) -> f64 {
        self.actions
            .iter()
            .flatten()
            .flat_map(|a| a.transitions.iter())
            .filter(|t| t.prob > 0.0)
            .fold(f64::INFINITY, |m, t| m.min(t.prob))
    }

    /// Check the structural invariants: every state has at least one action,
    /// each action's probabilities are nonnegative and sum to one, and the
    /// target state is absorbing and cost-free.
    pub fn validate(&self) -> Result<()> {
        let tau = self.target();
        for (i, acts) in self.actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::InvalidInput(format!("state {i} has no actions")));
            }
            for (u, act) in acts.iter().enumerate() {
                let mut sum = 0.0;
                for t in &act.transitions {
                    if t.to >= self.n_states() {
                        return Err(Error::InvalidInput(format!(
                            "state {i} action {u} targets out-of-range state {}",
                            t.to
                        )));
                    }
                    if t.prob < 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "state {i} action {u} has negative probability"
                        )));
                    }
                    sum += t.prob;
                }
                if (sum - 1.0).abs() > TRANSITION_TOL {
                    return Err(Error::InvalidInput(format!(
                        "state {i} action {u} probabilities sum to {sum}"
                    )));
                }
                if i == tau {
                    for t in &act.transitions {
                        if t.to != tau || t.cost != 0.0 {
                            return Err(Error::InvalidInput(
                                "target state must be absorbing and cost-free".into(),
                            ));
                        }
                    }
                }
            }
        }
        if self.labels[tau] != StateLabel::Target {
            return Err(Error::InvalidInput(
                "last state must carry the Target label".into(),
            ));
        }
        Ok(())
    }

    /// Flip the sign of every cost (the target stays cost-free). Minimizing
    /// the flipped model maximizes the original expected cost, which is how
    /// the minimum-PageRank variant is solved.
    pub fn negate_costs(&self) -> SspModel {
        let mut m = self.clone();
        for acts in &mut m.actions {
            for act in acts {
                for t in &mut act.transitions {
                    if t.cost != 0.0 {
                        t.cost = -t.cost;
                    }
                }
            }
        }
        m
    }

    /// Expected first return time to the split node encoded by `values`.
    ///
    /// Without damping this is the start state's value. With damping the
    /// first step out of the node can itself be a teleport, a choice the
    /// model makes inside the damping layer of the step's destination, so
    /// the true return time blends the start state with the teleportation
    /// state: `(1-c) J(v_s) + c J(q)`.
    pub fn expected_return_time(&self, values: &[f64]) -> Result<f64> {
        let start = self
            .start
            .ok_or_else(|| Error::InvalidInput("model has no start state".into()))?;
        match (self.damping, self.teleport) {
            (Some(c), Some(q)) => Ok((1.0 - c) * values[start] + c * values[q]),
            (None, None) => Ok(values[start]),
            _ => Err(Error::InvalidInput(
                "inconsistent damping metadata on model".into(),
            )),
        }
    }

    /// PageRank of the split node under `values` (`1 / return time`, with
    /// the absolute value taken so cost-negated models work too).
    pub fn pagerank_value(&self, values: &[f64]) -> Result<f64> {
        let rt = self.expected_return_time(values)?;
        if rt.abs() == 0.0 {
            return Err(Error::Numeric("zero expected return time".into()));
        }
        Ok(1.0 / rt.abs())
    }

    /// Map a fragile-link configuration to the policy realizing it.
    ///
    /// In a refined model a fragile node admits at most one active link, so
    /// configurations activating several links of one fragile node are
    /// rejected there (the simple model expresses them all).
    pub fn policy_for_configuration(&self, cfg: &Configuration) -> Result<Policy> {
        if cfg.len() != self.fragile_count {
            return Err(Error::InvalidInput(format!(
                "configuration covers {} fragile edges, model has {}",
                cfg.len(),
                self.fragile_count
            )));
        }
        let mut choices = Vec::with_capacity(self.n_states());
        for (i, acts) in self.actions.iter().enumerate() {
            let wanted = match self.labels[i] {
                StateLabel::FragileAux(id) => {
                    let want = if cfg.is_active(id) {
                        ActionLabel::On
                    } else {
                        ActionLabel::Off
                    };
                    acts.iter().position(|a| a.label == want)
                }
                StateLabel::Node(_) if matches!(acts[0].label, ActionLabel::Subset(_)) => {
                    let ids = self.subset_edges.get(&i).cloned().unwrap_or_default();
                    let mut mask = 0u64;
                    for (bit, id) in ids.iter().enumerate() {
                        if cfg.is_active(*id) {
                            mask |= 1 << bit;
                        }
                    }
                    acts.iter()
                        .position(|a| a.label == ActionLabel::Subset(mask))
                }
                StateLabel::Node(_) if acts.len() > 1 => {
                    // Refined fragile node.
                    let active: Vec<usize> = acts
                        .iter()
                        .filter_map(|a| match a.label {
                            ActionLabel::ActivateLink(id) if cfg.is_active(id) => Some(id),
                            _ => None,
                        })
                        .collect();
                    match active.len() {
                        0 => acts.iter().position(|a| a.label == ActionLabel::Fallback),
                        1 => acts
                            .iter()
                            .position(|a| a.label == ActionLabel::ActivateLink(active[0])),
                        k => {
                            return Err(Error::InvalidInput(format!(
                                "configuration activates {k} links of a fragile node; \
                                 the refined model allows at most one"
                            )))
                        }
                    }
                }
                _ => Some(0),
            };
            match wanted {
                Some(u) => choices.push(u),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "no action matching the configuration at state {i}"
                    )))
                }
            }
        }
        Ok(Policy(choices))
    }

    /// Extract the fragile-link configuration a policy realizes.
    pub fn configuration_for_policy(&self, policy: &Policy) -> Result<Configuration> {
        let mut cfg = Configuration::empty(self.fragile_count);
        for (i, acts) in self.actions.iter().enumerate() {
            let act = acts.get(policy.action(i)).ok_or_else(|| {
                Error::InvalidInput(format!("policy action out of range at state {i}"))
            })?;
            match act.label {
                ActionLabel::On => {
                    if let StateLabel::FragileAux(id) = self.labels[i] {
                        cfg.set(id, true);
                    }
                }
                ActionLabel::ActivateLink(id) => cfg.set(id, true),
                ActionLabel::Subset(mask) => {
                    let ids = self.subset_edges.get(&i).cloned().unwrap_or_default();
                    for (bit, id) in ids.iter().enumerate() {
                        if mask >> bit & 1 == 1 {
                            cfg.set(*id, true);
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests;
