//! Exact maximum or minimum PageRank of a node when a subset of edges
//! ("fragile links") may be switched on or off independently.
//!
//! Maximizing the PageRank of a node is the same as minimizing the expected
//! first return time of the random walk to it, which this crate formulates
//! as a stochastic shortest path problem: split the node into a start and an
//! absorbing target state, give every fragile link a two-action auxiliary
//! state, and solve by policy iteration. The specialized solver
//! ([`pri::pagerank_iteration`]) drives the greedy link updates with mean
//! hitting times; damping and personalization are handled by an extended
//! model with teleportation. Cross-checking machinery ships alongside: an
//! exhaustive configuration oracle, LP emission for external solvers, a
//! state-space reduction to one state per fragile link, and the 3SAT gadget
//! showing the mutually-exclusive-links variant is NP-hard.
//!
//! Scale target is "desk scale": dense linear algebra, thousands of nodes at
//! most, exhaustive enumeration capped around twenty fragile links.

pub mod chain;
pub mod error;
pub mod graph;
pub mod hardness;
pub mod lp;
pub mod oracle;
pub mod pri;
pub mod reduction;
pub mod ssp;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use graph::{Configuration, DanglingRule, DiGraph, Edge, EdgeKind};
