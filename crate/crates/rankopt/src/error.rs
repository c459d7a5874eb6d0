use thiserror::Error;

/// Errors surfaced by graph loading, model construction and the solvers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("node id {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("unknown fragile edge id {id} (graph has {count} fragile edges)")]
    UnknownFragileEdge { id: usize, count: usize },

    #[error("node {node} is dangling (no outgoing edges) and the dangling rule forbids repair")]
    DanglingNode { node: usize },

    #[error("node {node} has only fragile out-edges; deactivating all of them would leave it dangling. Use a dangling rule (self-loop or uniform) or the refined SSP treatment")]
    FragileNode { node: usize },

    #[error("target node {target} is unreachable from nodes {nodes:?}")]
    Unreachable { target: usize, nodes: Vec<usize> },

    #[error("personalization vector invalid: {0}")]
    BadPersonalization(String),

    #[error("power method did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence {
        iters: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("policy is improper: states {states:?} cannot reach the target under it")]
    ImproperPolicy { states: Vec<usize> },

    #[error("no proper policy exists: states {states:?} cannot reach the target under any action")]
    NoProperPolicy { states: Vec<usize> },

    #[error("improper structure: {0}")]
    ImproperStructure(String),

    #[error("refusing enumeration: {d} fragile edges means 2^{d} configurations (cap is {cap})")]
    EnumerationCap { d: usize, cap: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
