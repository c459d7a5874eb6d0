//! Markov-chain numerics: transition matrix, Google matrix, PageRank by
//! power method and by direct solve, hitting times and the fundamental
//! matrix of an absorbing chain.
//!
//! Matrices are dense and column-stochastic: column `j` holds the outgoing
//! distribution of node `j`, so one step of the chain is `x <- P x`. All
//! linear solves go through a pivoted LU factorization; formulas written as
//! matrix inverses are implemented as solves (the fundamental matrix, whose
//! entries are the contract, is the one place a full inverse is formed).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::DiGraph;

/// Column sums of a stochastic matrix must match 1 within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Entries of a PageRank vector must sum to 1 within this.
pub const PAGERANK_SUM_TOL: f64 = 1e-10;

/// Dense column-stochastic matrix: entries nonnegative, columns sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    m: DMatrix<f64>,
}

impl StochasticMatrix {
    /// Validate and wrap a dense matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "transition matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for j in 0..m.ncols() {
            let mut sum = 0.0;
            for i in 0..m.nrows() {
                let p = m[(i, j)];
                if p < 0.0 {
                    return Err(Error::Numeric(format!(
                        "negative transition probability at ({i}, {j}): {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Numeric(format!(
                    "column {j} sums to {sum}, not 1"
                )));
            }
        }
        Ok(StochasticMatrix { m })
    }

    pub fn n(&self) -> usize {
        self.m.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.m[(to, from)]
    }
}

/// Stationary distribution: nonnegative, sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PageRankVector {
    v: Vec<f64>,
    /// Iterations spent by the solver that produced the vector (0 for direct solves).
    pub iterations: usize,
}

impl PageRankVector {
    fn new(v: Vec<f64>, iterations: usize) -> Result<Self> {
        let sum: f64 = v.iter().sum();
        if v.iter().any(|&x| x < -PAGERANK_SUM_TOL) {
            return Err(Error::Numeric("negative PageRank entry".into()));
        }
        if (sum - 1.0).abs() > PAGERANK_SUM_TOL {
            return Err(Error::Numeric(format!("PageRank sums to {sum}, not 1")));
        }
        Ok(PageRankVector { v, iterations })
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn get(&self, node: usize) -> f64 {
        self.v[node]
    }
}

/// Damping constant and personalization distribution for the Google matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Personalization {
    z: Vec<f64>,
    c: f64,
}

impl Personalization {
    pub fn new(z: Vec<f64>, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::BadPersonalization(format!(
                "damping must lie in (0, 1), got {c}"
            )));
        }
        if z.iter().any(|&x| x <= 0.0) {
            return Err(Error::BadPersonalization(
                "personalization entries must be strictly positive".into(),
            ));
        }
        let sum: f64 = z.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::BadPersonalization(format!(
                "personalization sums to {sum}, not 1"
            )));
        }
        Ok(Personalization { z, c })
    }

    /// Uniform personalization over `n` nodes with damping `c`.
    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Personalization::new(vec![1.0 / n as f64; n], c)
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn damping(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }
}

/// Multiplicity-weighted uniform random-walk matrix of the graph
/// (all stored edges, fixed and fragile, are treated as present).
///
/// Column `j` is the distribution over out-neighbors of node `j`; dangling
/// nodes are an error, repair them with a dangling rule first.
pub fn transition_matrix(g: &DiGraph) -> Result<StochasticMatrix> {
    let n = g.node_count();
    if let Some(&node) = g.dangling_nodes().first() {
        return Err(Error::DanglingNode { node });
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for e in g.edges() {
        m[(e.dst, e.src)] += f64::from(e.multiplicity);
    }
    for j in 0..n {
        let deg = g.out_degree(j) as f64;
        for i in 0..n {
            m[(i, j)] /= deg;
        }
    }
    StochasticMatrix::new(m)
}

/// Google matrix `(1 - c) P + c z 1^T`: strictly positive and column-stochastic.
pub fn google_matrix(p: &StochasticMatrix, pers: &Personalization) -> Result<StochasticMatrix> {
    let n = p.n();
    if pers.n() != n {
        return Err(Error::BadPersonalization(format!(
            "personalization has {} entries for a {}-node chain",
            pers.n(),
            n
        )));
    }
    let c = pers.damping();
    let mut g = p.as_matrix().clone() * (1.0 - c);
    for j in 0..n {
        for i in 0..n {
            g[(i, j)] += c * pers.z()[i];
        }
    }
    StochasticMatrix::new(g)
}

/// Power method `x <- G x` until the L1 residual drops below `tol`.
pub fn pagerank_power(
    g: &StochasticMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<PageRankVector> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = g.n();
    let mut x = DVector::<f64>::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        let next = g.as_matrix() * &x;
        residual = (&next - &x).abs().sum();
        x = next;
        if residual <= tol {
            return PageRankVector::new(x.iter().copied().collect(), k);
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual,
        last: x.iter().copied().collect(),
    })
}

/// Direct solve of `pi = c (I - (1 - c) P)^{-1} z`, the exact stationary
/// vector of the Google matrix.
pub fn pagerank_direct(p: &StochasticMatrix, pers: &Personalization) -> Result<PageRankVector> {
    let n = p.n();
    if pers.n() != n {
        return Err(Error::BadPersonalization(format!(
            "personalization has {} entries for a {}-node chain",
            pers.n(),
            n
        )));
    }
    let c = pers.damping();
    // I - (1-c) P is strictly diagonally dominant for c in (0, 1).
    let a = DMatrix::<f64>::identity(n, n) - p.as_matrix() * (1.0 - c);
    let b = DVector::from_column_slice(pers.z()) * c;
    let lu = a.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Numeric("singular system in direct PageRank solve".into()))?;
    PageRankVector::new(x.iter().copied().collect(), 0)
}

/// Expected steps of the uniform random walk from each node until it first
/// arrives at `v`; the entry at `v` itself is the expected first return time.
///
/// Solves `(I - Q)^T h = 1` where `Q` is the transition matrix with row `v`
/// zeroed (no step may enter `v`). Every node must be able to reach `v`,
/// otherwise the stranded nodes are reported.
pub fn hitting_times(g: &DiGraph, v: usize) -> Result<Vec<f64>> {
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    let p = transition_matrix(g)?;
    let stranded = nodes_not_reaching(g, v);
    if !stranded.is_empty() {
        return Err(Error::Unreachable {
            target: v,
            nodes: stranded,
        });
    }
    let mut it = DMatrix::<f64>::identity(n, n);
    // (I - Q)^T, built directly: Q zeroes row v of P, so column v of P^T.
    for i in 0..n {
        for j in 0..n {
            if j != v {
                it[(i, j)] -= p.get(j, i);
            }
        }
    }
    let ones = DVector::<f64>::from_element(n, 1.0);
    let h = it
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::Numeric("singular hitting-time system".into()))?;
    Ok(h.iter().copied().collect())
}

/// Hitting times that tolerate unreachable regions: entries are the expected
/// steps to `v` where the walk hits `v` almost surely, and `+inf` where it
/// can escape into a region with no way back.
///
/// The finite block is exactly the set of nodes that cannot reach any
/// no-return node; it is closed under transitions, so the restricted solve
/// is nonsingular. `result[v]` is the expected first return time, infinite
/// when the walk from `v` can strand.
pub fn hitting_times_extended(g: &DiGraph, v: usize) -> Result<Vec<f64>> {
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    let p = transition_matrix(g)?;
    let no_return = nodes_not_reaching(g, v);
    // Everything that can reach a no-return node has infinite hitting time.
    let mut bad = vec![false; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in g.edges() {
        preds[e.dst].push(e.src);
    }
    let mut stack = no_return;
    for &w in &stack {
        bad[w] = true;
    }
    while let Some(w) = stack.pop() {
        for &u in &preds[w] {
            if !bad[u] {
                bad[u] = true;
                stack.push(u);
            }
        }
    }
    let good: Vec<usize> = (0..n).filter(|&i| !bad[i]).collect();
    let mut h = vec![f64::INFINITY; n];
    if good.is_empty() {
        return Ok(h);
    }
    let index_of: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (row, &x) in good.iter().enumerate() {
            m[x] = Some(row);
        }
        m
    };
    let r = good.len();
    let mut a = DMatrix::<f64>::identity(r, r);
    let ones = DVector::<f64>::from_element(r, 1.0);
    for (row, &x) in good.iter().enumerate() {
        for (y, slot) in index_of.iter().enumerate() {
            let prob = p.get(y, x);
            if prob > 0.0 && y != v {
                let col = slot.expect("good set is closed under transitions");
                a[(row, col)] -= prob;
            }
        }
    }
    let sol = a
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::Numeric("singular restricted hitting-time system".into()))?;
    for (row, &x) in good.iter().enumerate() {
        h[x] = sol[row];
    }
    Ok(h)
}

/// Expected first return time to `v`; `+inf` when `v` is transient under the
/// graph's walk (the `1/inf = 0` PageRank convention applies).
pub fn return_time(g: &DiGraph, v: usize) -> Result<f64> {
    Ok(hitting_times_extended(g, v)?[v])
}

/// Nodes from which `v` cannot be reached by any directed path of length >= 1.
pub(crate) fn nodes_not_reaching(g: &DiGraph, v: usize) -> Vec<usize> {
    let n = g.node_count();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in g.edges() {
        preds[e.dst].push(e.src);
    }
    let mut reaches = vec![false; n];
    let mut stack: Vec<usize> = preds[v].clone();
    while let Some(u) = stack.pop() {
        if !reaches[u] {
            reaches[u] = true;
            stack.extend(preds[u].iter().copied());
        }
    }
    (0..n).filter(|&i| !reaches[i]).collect()
}

/// `(I - R0)^{-1}` for a substochastic `R0` with spectral radius < 1; entry
/// `(j, k)` is the expected number of visits to transient state `j` of a walk
/// started at `k` before absorption.
pub fn fundamental_matrix(r0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = r0.nrows();
    if r0.ncols() != r {
        return Err(Error::ImproperStructure(format!(
            "fundamental matrix needs a square block, got {}x{}",
            r,
            r0.ncols()
        )));
    }
    if r == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // Substochastic in the column orientation, with a little slack for
    // accumulated rounding.
    let mut deficient = Vec::new();
    for j in 0..r {
        let mut sum = 0.0;
        for i in 0..r {
            let p = r0[(i, j)];
            if p < 0.0 {
                return Err(Error::ImproperStructure(format!(
                    "negative entry at ({i}, {j})"
                )));
            }
            sum += p;
        }
        if sum > 1.0 + 1e-9 {
            return Err(Error::ImproperStructure(format!(
                "column {j} sums to {sum} > 1"
            )));
        }
        if sum < 1.0 - 1e-9 {
            deficient.push(j);
        }
    }
    // For a substochastic matrix the spectral radius is < 1 exactly when
    // every state can reach a deficient column through positive entries.
    let mut ok = vec![false; r];
    let mut stack = deficient;
    for &j in &stack {
        ok[j] = true;
    }
    while let Some(j) = stack.pop() {
        for k in 0..r {
            if !ok[k] && r0[(j, k)] > 0.0 {
                ok[k] = true;
                stack.push(k);
            }
        }
    }
    if let Some(bad) = (0..r).find(|&k| !ok[k]) {
        return Err(Error::ImproperStructure(format!(
            "spectral radius >= 1: state {bad} never leaks probability to an absorbing state"
        )));
    }
    let a = DMatrix::<f64>::identity(r, r) - r0;
    a.lu()
        .try_inverse()
        .ok_or_else(|| Error::ImproperStructure("I - R0 is numerically singular".into()))
}
