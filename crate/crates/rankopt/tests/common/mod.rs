//! Instance generators shared across the integration suites.
#![allow(dead_code)] // each test target uses its own subset

use rand::rngs::StdRng;
use rand::Rng;

use rankopt::graph::{DiGraph, Edge, EdgeKind};
use rankopt::hardness::{Cnf3, Literal};

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

/// Instance whose fixed skeleton reaches `v` from every node: the target is
/// recurrent under every configuration, so all derived policies are proper.
pub fn ar_instance(rng: &mut StdRng, n: usize, d: usize) -> (DiGraph, usize) {
    let v = rng.random_range(0..n);
    let mut edges = Vec::new();
    let mut order: Vec<usize> = (0..n).filter(|&w| w != v).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order.push(v);
    for w in 0..order.len() - 1 {
        edges.push(fixed(order[w], order[w + 1]));
    }
    edges.push(fixed(v, order[0]));
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

/// Instance where every node keeps a fixed out-edge but fixed cycles that
/// avoid the target may exist, so some configurations can strand the walk.
/// The full configuration is forced to satisfy reachability.
pub fn trap_capable_instance(rng: &mut StdRng, n: usize, d: usize) -> (DiGraph, usize) {
    let v = rng.random_range(0..n);
    loop {
        let mut edges = Vec::new();
        for w in 0..n {
            edges.push(fixed(w, rng.random_range(0..n)));
        }
        for _ in 0..d {
            edges.push(fragile(rng.random_range(0..n), rng.random_range(0..n)));
        }
        let g = DiGraph::new(n, edges).unwrap();
        // Keep only instances satisfying (AR): the full configuration must
        // reach v from everywhere.
        let full = g
            .apply_configuration(&rankopt::graph::Configuration::full(d))
            .unwrap();
        if rankopt::chain::hitting_times(&full, v).is_ok() {
            return (g, v);
        }
    }
}

/// Connected undirected graph encoded as a symmetric digraph.
pub fn undirected_graph(rng: &mut StdRng, n: usize) -> DiGraph {
    let mut edges = Vec::new();
    let push_undirected = |a: usize, b: usize, edges: &mut Vec<Edge>| {
        edges.push(fixed(a, b));
        edges.push(fixed(b, a));
    };
    for w in 1..n {
        let parent = rng.random_range(0..w);
        push_undirected(w, parent, &mut edges);
    }
    for _ in 0..rng.random_range(0..=n) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            push_undirected(a, b, &mut edges);
        }
    }
    DiGraph::new(n, edges).unwrap()
}

pub fn random_literal(rng: &mut StdRng, vars: usize) -> Literal {
    Literal {
        var: rng.random_range(0..vars),
        negated: rng.random_bool(0.5),
    }
}

/// Random 3SAT formula with `clauses` clauses over `vars` variables.
pub fn random_cnf(rng: &mut StdRng, vars: usize, clauses: usize) -> Cnf3 {
    let body = (0..clauses)
        .map(|_| {
            [
                random_literal(rng, vars),
                random_literal(rng, vars),
                random_literal(rng, vars),
            ]
        })
        .collect();
    Cnf3::new(vars, body).unwrap()
}

/// Unsatisfiable formula: a forced contradiction on one variable plus
/// `padding` random clauses.
pub fn unsat_cnf(rng: &mut StdRng, vars: usize, padding: usize) -> Cnf3 {
    let x = rng.random_range(0..vars);
    let pos = Literal {
        var: x,
        negated: false,
    };
    let neg = Literal {
        var: x,
        negated: true,
    };
    let mut body = vec![[pos, pos, pos], [neg, neg, neg]];
    for _ in 0..padding {
        body.push([
            random_literal(rng, vars),
            random_literal(rng, vars),
            random_literal(rng, vars),
        ]);
    }
    Cnf3::new(vars, body).unwrap()
}
