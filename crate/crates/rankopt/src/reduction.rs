//! State-space reduction: eliminate states with exactly one action.
//!
//! In the refined Max-PageRank model only the per-link auxiliary states
//! offer a choice, so after folding the single-action ("non-decision")
//! states into the transition probabilities and costs of the remaining
//! ones, the model shrinks to `d + 1` states: one per fragile link plus the
//! target. Folding is exact: the fundamental matrix of the non-decision
//! block gives both the arrival distribution onto decision states and the
//! expected cost picked up along the way, and policies correspond one-to-one
//! with unchanged values on the surviving states.

use nalgebra::{DMatrix, DVector};

use crate::chain::{fundamental_matrix, Personalization};
use crate::error::{Error, Result};
use crate::graph::{Configuration, DanglingRule, DiGraph};
use crate::ssp::{
    build_refined_ssp, evaluate_policy, value_iteration, Action, Policy, Solution, SspModel,
    StateLabel, Transition,
};

/// A reduced model together with everything needed to audit the folding and
/// to lift results back to the original state space.
#[derive(Debug, Clone)]
pub struct ReducedSsp {
    /// Model over the decision states only; the target stays last.
    pub model: SspModel,
    /// Reduced index -> original state index.
    pub decision_states: Vec<usize>,
    /// Original indices of the eliminated states, in block order.
    pub non_decision_states: Vec<usize>,
    /// The model the reduction started from (with state-action costs).
    original: SspModel,
    /// Transition block among non-decision states (column-oriented:
    /// entry (j, k) is the probability of stepping to block state j from k).
    r0: DMatrix<f64>,
    /// Transitions from non-decision states into decision states.
    q0: DMatrix<f64>,
    /// `(I - R0)^{-1}`.
    fundamental: DMatrix<f64>,
    /// Expected cost of each non-decision state's single action.
    non_decision_costs: DVector<f64>,
}

impl ReducedSsp {
    pub fn r0(&self) -> &DMatrix<f64> {
        &self.r0
    }

    pub fn q0(&self) -> &DMatrix<f64> {
        &self.q0
    }

    pub fn fundamental(&self) -> &DMatrix<f64> {
        &self.fundamental
    }

    /// Arrival distribution onto decision states from each non-decision
    /// state: `Q* = Q0 (I - R0)^{-1}`; its columns sum to one.
    pub fn q_star(&self) -> DMatrix<f64> {
        &self.q0 * &self.fundamental
    }

    pub fn original(&self) -> &SspModel {
        &self.original
    }

    /// Restrict a full-model policy to the decision states.
    pub fn restrict_policy(&self, full: &Policy) -> Policy {
        Policy(
            self.decision_states
                .iter()
                .map(|&s| full.action(s))
                .collect(),
        )
    }

    /// Extend a reduced policy with the forced single actions.
    pub fn lift_policy(&self, reduced: &Policy) -> Policy {
        let mut full = vec![0usize; self.original.n_states()];
        for (ri, &s) in self.decision_states.iter().enumerate() {
            full[s] = reduced.action(ri);
        }
        Policy(full)
    }

    /// Lift reduced values back to the original state space: decision
    /// states keep their values, eliminated states get
    /// `J_R = F^T (g_R + Q0^T J_D)`.
    pub fn recover_full_values(&self, reduced_values: &[f64]) -> Vec<f64> {
        let jd = DVector::from_iterator(
            self.decision_states.len(),
            reduced_values.iter().copied(),
        );
        let jr = self.fundamental.transpose()
            * (&self.non_decision_costs + self.q0.transpose() * jd);
        let mut full = vec![0.0; self.original.n_states()];
        for (ri, &s) in self.decision_states.iter().enumerate() {
            full[s] = reduced_values[ri];
        }
        for (bi, &s) in self.non_decision_states.iter().enumerate() {
            full[s] = jr[bi];
        }
        full
    }

    /// Solve the reduced model and report the optimum in original terms:
    /// the expected return time, the optimal configuration, and the reduced
    /// solution itself.
    pub fn solve_optimal(&self) -> Result<(f64, Configuration, Solution)> {
        let sol = value_iteration(&self.model, 1e-12)?;
        let exact = evaluate_policy(&self.model, &sol.policy)?;
        let full = self.recover_full_values(&exact);
        let rt = self.original.expected_return_time(&full)?;
        let cfg = self.model.configuration_for_policy(&sol.policy)?;
        Ok((
            rt,
            cfg,
            Solution {
                values: exact,
                policy: sol.policy,
                iterations: sol.iterations,
            },
        ))
    }
}

/// Replace every transition cost by its action's expected cost, making the
/// cost a function of state and action only; every policy's values are
/// unchanged.
pub fn cost_to_state_action(m: &SspModel) -> SspModel {
    let labels = m.labels().to_vec();
    let actions: Vec<Vec<Action>> = (0..m.n_states())
        .map(|i| {
            m.actions_of(i)
                .iter()
                .map(|a| {
                    let g = a.expected_cost();
                    Action {
                        label: a.label,
                        transitions: a
                            .transitions
                            .iter()
                            .map(|t| Transition {
                                to: t.to,
                                prob: t.prob,
                                cost: g,
                            })
                            .collect(),
                    }
                })
                .collect()
        })
        .collect();
    SspModel::assemble(
        labels,
        actions,
        m.start(),
        m.damping(),
        m.fragile_count(),
        m.subset_edges().clone(),
    )
    .expect("cost rewrite preserves model validity")
}

/// Eliminate all single-action states. The target always counts as a
/// decision state and stays last in the reduced model.
pub fn reduce(m: &SspModel) -> Result<ReducedSsp> {
    let m = cost_to_state_action(m);
    let tau = m.target();
    let mut decision: Vec<usize> = (0..m.n_states())
        .filter(|&i| i != tau && m.actions_of(i).len() >= 2)
        .collect();
    decision.push(tau);
    let non_decision: Vec<usize> = (0..m.n_states())
        .filter(|&i| i != tau && m.actions_of(i).len() < 2)
        .collect();

    let s = decision.len();
    let r = non_decision.len();
    let mut reduced_index = vec![usize::MAX; m.n_states()];
    for (ri, &i) in decision.iter().enumerate() {
        reduced_index[i] = ri;
    }
    let mut block_index = vec![usize::MAX; m.n_states()];
    for (bi, &i) in non_decision.iter().enumerate() {
        block_index[i] = bi;
    }

    let mut r0 = DMatrix::<f64>::zeros(r, r);
    let mut q0 = DMatrix::<f64>::zeros(s, r);
    let mut g_nd = DVector::<f64>::zeros(r);
    for (bi, &i) in non_decision.iter().enumerate() {
        let act = &m.actions_of(i)[0];
        g_nd[bi] = act.expected_cost();
        for t in &act.transitions {
            if block_index[t.to] != usize::MAX {
                r0[(block_index[t.to], bi)] += t.prob;
            } else {
                q0[(reduced_index[t.to], bi)] += t.prob;
            }
        }
    }
    let fundamental = fundamental_matrix(&r0).map_err(|e| {
        Error::ImproperStructure(format!(
            "some single-action state cannot drain into a decision state: {e}"
        ))
    })?;
    let q_star = &q0 * &fundamental;
    // Expected cost accumulated in the block before absorption, per block
    // start: F^T g.
    let folded_cost = fundamental.transpose() * &g_nd;

    let mut labels: Vec<StateLabel> = decision.iter().map(|&i| m.label(i)).collect();
    labels[s - 1] = StateLabel::Target;
    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(s);
    for &i in &decision {
        let acts = m
            .actions_of(i)
            .iter()
            .map(|a| {
                let mut probs = vec![0.0; s];
                let mut ghat = a.expected_cost();
                for t in &a.transitions {
                    if block_index[t.to] != usize::MAX {
                        let k = block_index[t.to];
                        ghat += t.prob * folded_cost[k];
                        for j in 0..s {
                            probs[j] += t.prob * q_star[(j, k)];
                        }
                    } else {
                        probs[reduced_index[t.to]] += t.prob;
                    }
                }
                if i == tau {
                    ghat = 0.0;
                }
                Action {
                    label: a.label,
                    transitions: probs
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, p)| p > 0.0)
                        .map(|(j, p)| Transition {
                            to: j,
                            prob: p,
                            cost: ghat,
                        })
                        .collect(),
                }
            })
            .collect();
        actions.push(acts);
    }

    let model = SspModel::assemble(
        labels,
        actions,
        None,
        None,
        m.fragile_count(),
        Default::default(),
    )?;
    Ok(ReducedSsp {
        model,
        decision_states: decision,
        non_decision_states: non_decision,
        original: m,
        r0,
        q0,
        fundamental,
        non_decision_costs: g_nd,
    })
}

/// Build the refined model for a Max-PageRank instance and reduce it. For
/// instances where every node keeps a fixed out-edge the result has exactly
/// `d + 1` states: the fragile-link auxiliaries plus the target.
pub fn reduce_max_pagerank(
    g: &DiGraph,
    v: usize,
    rule: DanglingRule,
    pers: Option<&Personalization>,
) -> Result<ReducedSsp> {
    let refined = build_refined_ssp(g, v, rule, pers)?;
    reduce(&refined)
}
