//! Random instance generators shared by the unit tests.

use rand::rngs::StdRng;
use rand::Rng;

use crate::graph::{DiGraph, Edge, EdgeKind};

pub fn fixed(src: usize, dst: usize) -> Edge {
    Edge {
        src,
        dst,
        multiplicity: 1,
        kind: EdgeKind::Fixed,
    }
}

pub fn fragile(src: usize, dst: usize) -> Edge {
    Edge {
        src,
        dst,
        multiplicity: 1,
        kind: EdgeKind::Fragile,
    }
}

/// Random instance with a fixed skeleton that reaches `v` from every node
/// (so every configuration keeps the target reachable and every policy of
/// the derived models is proper), plus `d` random fragile links.
///
/// Returns the graph and the optimized node `v`.
pub fn random_ar_instance(rng: &mut StdRng, n: usize, d: usize) -> (DiGraph, usize) {
    let v = rng.random_range(0..n);
    let mut edges = Vec::new();
    // Shuffled chain into v: every node gets a fixed path to v.
    let mut order: Vec<usize> = (0..n).filter(|&w| w != v).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order.push(v);
    for w in 0..order.len() - 1 {
        edges.push(fixed(order[w], order[w + 1]));
    }
    // v itself needs a way out.
    edges.push(fixed(v, order[0]));
    // Extra fixed edges, occasionally with multiplicity.
    for _ in 0..rng.random_range(0..=n) {
        edges.push(Edge {
            src: rng.random_range(0..n),
            dst: rng.random_range(0..n),
            multiplicity: rng.random_range(1..=2),
            kind: EdgeKind::Fixed,
        });
    }
    for _ in 0..d {
        edges.push(fragile(rng.random_range(0..n), rng.random_range(0..n)));
    }
    (DiGraph::new(n, edges).unwrap(), v)
}
