//! Generic SSP solvers: policy evaluation by linear solve, value iteration,
//! and policy iteration.
//!
//! Properness is decided structurally, not numerically: a policy is proper
//! exactly when the target is reachable from every state through its
//! positive-probability transitions, and at least one proper policy exists
//! exactly when the target is reachable from every state in the union graph
//! of all actions. Both are plain reverse reachability checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ssp::{Policy, SspModel};

/// Default sweep limit for value iteration.
const VI_MAX_SWEEPS: usize = 1_000_000;
/// Policy iteration visits each policy at most once; this is a safety net.
const PI_MAX_ROUNDS: usize = 10_000;
/// Two action values within this of each other count as a tie.
const TIE_EPS: f64 = 1e-12;
/// Runaway guard for value iteration on malformed models.
const VALUE_GUARD: f64 = 1e14;

/// A solved model: values, the policy achieving them, and how many solver
/// rounds it took.
#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
}

/// States that cannot reach the target following positive-probability
/// transitions; `policy` restricts each state to its chosen action, `None`
/// allows any action.
fn states_not_reaching_target(m: &SspModel, policy: Option<&Policy>) -> Vec<usize> {
    let n = m.n_states();
    let tau = m.target();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let acts = m.actions_of(i);
        let range: Box<dyn Iterator<Item = &crate::ssp::Action>> = match policy {
            Some(p) => Box::new(acts.iter().skip(p.action(i)).take(1)),
            None => Box::new(acts.iter()),
        };
        for a in range {
            for t in &a.transitions {
                if t.prob > 0.0 {
                    preds[t.to].push(i);
                }
            }
        }
    }
    let mut reached = vec![false; n];
    reached[tau] = true;
    let mut stack = vec![tau];
    while let Some(s) = stack.pop() {
        for &p in &preds[s] {
            if !reached[p] {
                reached[p] = true;
                stack.push(p);
            }
        }
    }
    (0..n).filter(|&i| !reached[i]).collect()
}

fn check_policy(m: &SspModel, policy: &Policy) -> Result<()> {
    if policy.0.len() != m.n_states() {
        return Err(Error::InvalidInput(format!(
            "policy covers {} states, model has {}",
            policy.0.len(),
            m.n_states()
        )));
    }
    for (i, &u) in policy.0.iter().enumerate() {
        if u >= m.actions_of(i).len() {
            return Err(Error::InvalidInput(format!(
                "policy picks action {u} at state {i}, which has {} actions",
                m.actions_of(i).len()
            )));
        }
    }
    Ok(())
}

/// Exact cost-to-go of a proper policy, by solving the linear system
/// `J = g_mu + P_mu J` over the non-target states. `J(target) = 0`.
pub fn evaluate_policy(m: &SspModel, policy: &Policy) -> Result<Vec<f64>> {
    check_policy(m, policy)?;
    let stranded = states_not_reaching_target(m, Some(policy));
    if !stranded.is_empty() {
        return Err(Error::ImproperPolicy { states: stranded });
    }
    let n = m.n_states();
    let tau = m.target();
    if n == 1 {
        return Ok(vec![0.0]);
    }
    // Row i of the system: J(i) - sum_{j != tau} p(j|i,u) J(j) = E[cost].
    let mut a = DMatrix::<f64>::identity(n - 1, n - 1);
    let mut b = DVector::<f64>::zeros(n - 1);
    for i in 0..n - 1 {
        let act = &m.actions_of(i)[policy.action(i)];
        for t in &act.transitions {
            b[i] += t.prob * t.cost;
            if t.to != tau {
                a[(i, t.to)] -= t.prob;
            }
        }
    }
    let x = a.lu().solve(&b).ok_or_else(|| {
        Error::Numeric(
            "policy evaluation system is singular despite structural properness".into(),
        )
    })?;
    let mut values: Vec<f64> = x.iter().copied().collect();
    values.push(0.0);
    Ok(values)
}

/// One application of the Bellman optimality operator; returns the new
/// values and the greedy action per state (lowest index wins ties).
fn bellman_sweep(m: &SspModel, values: &[f64]) -> (Vec<f64>, Policy) {
    let n = m.n_states();
    let mut out = Vec::with_capacity(n);
    let mut policy = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut best_u = 0;
        for (u, act) in m.actions_of(i).iter().enumerate() {
            let q: f64 = act
                .transitions
                .iter()
                .map(|t| t.prob * (t.cost + values[t.to]))
                .sum();
            if q < best - TIE_EPS {
                best = q;
                best_u = u;
            }
        }
        out.push(best);
        policy.push(best_u);
    }
    out[m.target()] = 0.0;
    (out, Policy(policy))
}

/// Greedy policy with respect to a value function; ties break to the lowest
/// action index.
pub fn greedy_policy(m: &SspModel, values: &[f64]) -> Policy {
    bellman_sweep(m, values).1
}

/// Sup-norm Bellman residual `||TJ - J||_inf`.
pub fn bellman_residual(m: &SspModel, values: &[f64]) -> f64 {
    let (next, _) = bellman_sweep(m, values);
    next.iter()
        .zip(values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Value iteration from `J = 0` until the sup-norm residual drops below
/// `tol`; returns the converged values with their greedy policy.
pub fn value_iteration(m: &SspModel, tol: f64) -> Result<Solution> {
    assert!(tol > 0.0, "tolerance must be positive");
    let stranded = states_not_reaching_target(m, None);
    if !stranded.is_empty() {
        return Err(Error::NoProperPolicy { states: stranded });
    }
    let mut values = vec![0.0; m.n_states()];
    for sweep in 1..=VI_MAX_SWEEPS {
        let (next, policy) = bellman_sweep(m, &values);
        let residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if residual <= tol {
            return Ok(Solution {
                values,
                policy,
                iterations: sweep,
            });
        }
        if values.iter().any(|v| v.abs() > VALUE_GUARD) {
            return Err(Error::Numeric(format!(
                "value iteration diverged beyond {VALUE_GUARD:e} after {sweep} sweeps"
            )));
        }
    }
    Err(Error::NonConvergence {
        iters: VI_MAX_SWEEPS,
        residual: bellman_residual(m, &values),
        last: values,
    })
}

/// Policy iteration from a proper starting policy: evaluate exactly, improve
/// greedily, stop when the policy is stable. Values are monotonically
/// non-increasing across rounds.
pub fn policy_iteration(m: &SspModel, mu0: &Policy) -> Result<Solution> {
    let mut policy = mu0.clone();
    let mut values = evaluate_policy(m, &policy)?;
    for round in 1..=PI_MAX_ROUNDS {
        let (_, improved) = bellman_sweep(m, &values);
        if improved == policy {
            return Ok(Solution {
                values,
                policy,
                iterations: round,
            });
        }
        let next_values = evaluate_policy(m, &improved)?;
        policy = improved;
        values = next_values;
    }
    Err(Error::Numeric(format!(
        "policy iteration failed to settle within {PI_MAX_ROUNDS} rounds"
    )))
}
