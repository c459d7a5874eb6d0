//! Ground-truth brute force over fragile-link configurations, with and
//! without exclusion constraints, plus a seeded random-walk estimator.
//!
//! Enumeration order is pinned: configurations by increasing popcount, then
//! lexicographically by their sorted active-id lists; value ties go to the
//! first configuration in that order. Sharding across threads chunks the
//! ordered list and merges shard winners in shard order, so the result is
//! identical for any worker count.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::chain::{pagerank_direct, return_time, transition_matrix, Personalization};
use crate::error::{Error, Result};
use crate::graph::{Configuration, DanglingRule, DiGraph};

/// Enumeration limits and worker count.
#[derive(Debug, Clone, Copy)]
pub struct BruteForceOpts {
    /// Refuse instances with more fragile edges than this (2^d blowup).
    pub cap: usize,
    /// Worker threads for the evaluation loop.
    pub jobs: usize,
}

impl Default for BruteForceOpts {
    fn default() -> Self {
        BruteForceOpts { cap: 20, jobs: 1 }
    }
}

/// One evaluated configuration: its bitmask and the PageRank of the target.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct TableEntry {
    pub mask: u64,
    pub pagerank: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    pub best_pagerank: f64,
    pub best: Configuration,
    /// Every configuration in enumeration order.
    pub table: Vec<TableEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedResult {
    pub best_pagerank: f64,
    pub best: Configuration,
    /// Number of configurations that satisfied the constraints.
    pub feasible: usize,
}

/// Unordered pairs of fragile edges that must not be active together.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConstraintSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl ConstraintSet {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>, d: usize) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidInput(format!(
                    "constraint pairs an edge with itself: ({a}, {a})"
                )));
            }
            for id in [a, b] {
                if id >= d {
                    return Err(Error::UnknownFragileEdge { id, count: d });
                }
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(ConstraintSet { pairs: set })
    }

    /// Parse one pair of fragile-edge ids per line; `#` starts a comment.
    pub fn from_text(text: &str, d: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((head, _)) => head,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("invalid fragile edge id {s:?}"),
                })
            };
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "expected two fragile edge ids per line".into(),
                });
            }
            pairs.push((parse(fields[0])?, parse(fields[1])?));
        }
        ConstraintSet::new(pairs, d)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    pub fn allows(&self, mask: u64) -> bool {
        self.pairs
            .iter()
            .all(|&(a, b)| mask & (1 << a | 1 << b) != (1 << a | 1 << b))
    }
}

/// Enumeration order: popcount first, then the sorted active-id lists
/// lexicographically ({0,3} before {1,2}).
pub(crate) fn cmp_masks(a: u64, b: u64) -> Ordering {
    match a.count_ones().cmp(&b.count_ones()) {
        Ordering::Equal => {}
        other => return other,
    }
    let (mut x, mut y) = (a, b);
    while x != 0 && y != 0 {
        let (lx, ly) = (x.trailing_zeros(), y.trailing_zeros());
        match lx.cmp(&ly) {
            Ordering::Equal => {
                x &= x - 1;
                y &= y - 1;
            }
            other => return other,
        }
    }
    Ordering::Equal
}

/// PageRank of `v` for one fully resolved configuration: damped instances
/// use the direct solve of the Google chain, undamped ones the expected
/// first return time (0 when the walk can strand).
fn evaluate_configuration(
    g: &DiGraph,
    v: usize,
    cfg: &Configuration,
    pers: Option<&Personalization>,
    rule: DanglingRule,
) -> Result<f64> {
    let applied = g.apply_configuration(cfg)?.handle_dangling(rule)?;
    match pers {
        Some(p) => {
            let tm = transition_matrix(&applied)?;
            Ok(pagerank_direct(&tm, p)?.get(v))
        }
        None => {
            let rt = return_time(&applied, v)?;
            Ok(if rt.is_finite() { 1.0 / rt } else { 0.0 })
        }
    }
}

fn evaluate_masks(
    g: &DiGraph,
    v: usize,
    masks: &[u64],
    pers: Option<&Personalization>,
    rule: DanglingRule,
    jobs: usize,
) -> Result<Vec<TableEntry>> {
    let d = g.fragile_count();
    let eval = |mask: u64| -> Result<TableEntry> {
        let cfg = Configuration::from_mask(d, mask);
        Ok(TableEntry {
            mask,
            pagerank: evaluate_configuration(g, v, &cfg, pers, rule)?,
        })
    };
    let jobs = jobs.max(1).min(masks.len().max(1));
    if jobs == 1 {
        return masks.iter().map(|&m| eval(m)).collect();
    }
    let chunk = masks.len().div_ceil(jobs);
    let shards: Vec<Result<Vec<TableEntry>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = masks
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&m| eval(m)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut table = Vec::with_capacity(masks.len());
    for shard in shards {
        table.extend(shard?);
    }
    Ok(table)
}

/// Winner under the pinned order: strictly larger value wins, ties keep the
/// earlier configuration.
fn argmax(table: &[TableEntry]) -> Option<TableEntry> {
    let mut best: Option<TableEntry> = None;
    for e in table {
        if best.is_none_or(|b| e.pagerank > b.pagerank) {
            best = Some(*e);
        }
    }
    best
}

/// Evaluate the PageRank of `v` for every one of the 2^d configurations and
/// return the maximizer with the full table.
pub fn brute_force(
    g: &DiGraph,
    v: usize,
    pers: Option<&Personalization>,
    rule: DanglingRule,
    opts: &BruteForceOpts,
) -> Result<BruteForceResult> {
    let d = g.fragile_count();
    if d > opts.cap {
        return Err(Error::EnumerationCap { d, cap: opts.cap });
    }
    if v >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            node: v,
            n: g.node_count(),
        });
    }
    let mut masks: Vec<u64> = (0..1u64 << d).collect();
    masks.sort_unstable_by(|&a, &b| cmp_masks(a, b));
    let table = evaluate_masks(g, v, &masks, pers, rule, opts.jobs)?;
    let best = argmax(&table).expect("at least the empty configuration");
    Ok(BruteForceResult {
        best_pagerank: best.pagerank,
        best: Configuration::from_mask(d, best.mask),
        table,
    })
}

/// Feasible masks (no forbidden pair active) by backtracking over edge ids,
/// so heavily constrained instances never touch the full 2^d space.
fn feasible_masks(d: usize, constraints: &ConstraintSet) -> Vec<u64> {
    // Pairs indexed by their higher edge id, checked when that id turns on.
    let mut earlier: Vec<u64> = vec![0; d];
    for (a, b) in constraints.pairs() {
        earlier[b] |= 1 << a;
    }
    let mut out = Vec::new();
    let mut stack: Vec<(usize, u64)> = vec![(0, 0)];
    while let Some((id, mask)) = stack.pop() {
        if id == d {
            out.push(mask);
            continue;
        }
        // Push "on" first so the stack pops "off" first; order is fixed by
        // the final sort anyway.
        if mask & earlier[id] == 0 {
            stack.push((id + 1, mask | 1 << id));
        }
        stack.push((id + 1, mask));
    }
    out.sort_unstable_by(|&a, &b| cmp_masks(a, b));
    out
}

/// Maximize over configurations containing no forbidden pair. When the
/// target is unreachable under every feasible configuration the best
/// PageRank is 0 by the `1/inf = 0` convention.
pub fn brute_force_constrained(
    g: &DiGraph,
    v: usize,
    constraints: &ConstraintSet,
    pers: Option<&Personalization>,
    rule: DanglingRule,
    opts: &BruteForceOpts,
) -> Result<ConstrainedResult> {
    let d = g.fragile_count();
    if d > opts.cap {
        return Err(Error::EnumerationCap { d, cap: opts.cap });
    }
    ConstraintSet::new(constraints.pairs(), d)?; // ids must fit this graph
    let masks = feasible_masks(d, constraints);
    let table = evaluate_masks(g, v, &masks, pers, rule, opts.jobs)?;
    let best = argmax(&table).expect("the empty configuration is always feasible");
    Ok(ConstrainedResult {
        best_pagerank: best.pagerank,
        best: Configuration::from_mask(d, best.mask),
        feasible: masks.len(),
    })
}

/// Outcome of a seeded random-walk simulation. Identical inputs produce a
/// bitwise-identical record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkEstimate {
    /// Stream cipher behind the generator; pinned for reproducibility.
    pub rng: &'static str,
    pub seed: u64,
    pub steps: u64,
    pub node: usize,
    pub visits: u64,
    /// Fraction of steps 1..=steps spent at the node.
    pub frequency: f64,
    /// Average gap between consecutive visits (the walk starts at the node),
    /// absent if it never came back.
    pub mean_return_time: Option<f64>,
}

/// Simulate the (damped) walk for `steps` steps starting at `v` with a
/// ChaCha12 generator seeded by `seed`.
pub fn simulate_walk(
    g: &DiGraph,
    v: usize,
    pers: Option<&Personalization>,
    steps: u64,
    seed: u64,
) -> Result<WalkEstimate> {
    let n = g.node_count();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    if steps == 0 {
        return Err(Error::InvalidInput("simulation needs at least one step".into()));
    }
    if let Some(&node) = g.dangling_nodes().first() {
        return Err(Error::DanglingNode { node });
    }
    if let Some(p) = pers {
        if p.n() != n {
            return Err(Error::BadPersonalization(format!(
                "personalization has {} entries for a {n}-node graph",
                p.n()
            )));
        }
    }
    // Integer cumulative multiplicities per node for exact edge sampling.
    let mut cum: Vec<Vec<(u64, usize)>> = vec![Vec::new(); n];
    for e in g.edges() {
        let slot = &mut cum[e.src];
        let base = slot.last().map_or(0, |&(c, _)| c);
        slot.push((base + u64::from(e.multiplicity), e.dst));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = v;
    let mut visits = 0u64;
    let mut last_visit = 0u64;
    for step in 1..=steps {
        let teleported = match pers {
            Some(p) => rand::Rng::random::<f64>(&mut rng) < p.damping(),
            None => false,
        };
        x = if teleported {
            let u: f64 = rand::Rng::random(&mut rng);
            let z = pers.expect("teleport implies personalization").z();
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &zi) in z.iter().enumerate() {
                acc += zi;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            let slot = &cum[x];
            let total = slot.last().expect("no dangling nodes").0;
            let roll = rand::Rng::random_range(&mut rng, 0..total);
            slot[slot.partition_point(|&(c, _)| c <= roll)].1
        };
        if x == v {
            visits += 1;
            last_visit = step;
        }
    }
    Ok(WalkEstimate {
        rng: "chacha12",
        seed,
        steps,
        node: v,
        visits,
        frequency: visits as f64 / steps as f64,
        mean_return_time: (visits > 0).then(|| last_visit as f64 / visits as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{fixed, fragile, random_ar_instance};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn enumeration_order_is_popcount_then_lex() {
        let mut masks: Vec<u64> = (0..16).collect();
        masks.sort_unstable_by(|&a, &b| cmp_masks(a, b));
        // ids: {} {0} {1} {2} {3} {0,1} {0,2} {0,3} {1,2} {1,3} {2,3} ...
        assert_eq!(
            masks,
            vec![0, 1, 2, 4, 8, 3, 5, 9, 6, 10, 12, 7, 11, 13, 14, 15]
        );
    }

    #[test]
    fn table_sizes_match_enumeration() {
        let g = DiGraph::new(
            3,
            [fixed(0, 1), fixed(1, 2), fixed(2, 0), fragile(0, 2), fragile(2, 1)],
        )
        .unwrap();
        let res = brute_force(&g, 0, None, DanglingRule::Reject, &BruteForceOpts::default())
            .unwrap();
        assert_eq!(res.table.len(), 4);

        let g0 = DiGraph::new(2, [fixed(0, 1), fixed(1, 0)]).unwrap();
        let res0 = brute_force(&g0, 0, None, DanglingRule::Reject, &BruteForceOpts::default())
            .unwrap();
        assert_eq!(res0.table.len(), 1);
        assert!((res0.best_pagerank - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cap_refusal() {
        let mut edges = vec![fixed(0, 1), fixed(1, 0)];
        edges.extend((0..5).map(|_| fragile(0, 1)));
        let g = DiGraph::new(2, edges).unwrap();
        let opts = BruteForceOpts { cap: 4, jobs: 1 };
        assert!(matches!(
            brute_force(&g, 0, None, DanglingRule::Reject, &opts),
            Err(Error::EnumerationCap { d: 5, cap: 4 })
        ));
    }

    #[test]
    fn best_dominates_table_and_jobs_do_not_change_it() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..10 {
            let n = rng.random_range(3..=7);
            let d = rng.random_range(0..=6);
            let (g, v) = random_ar_instance(&mut rng, n, d);
            let serial = brute_force(
                &g,
                v,
                None,
                DanglingRule::Reject,
                &BruteForceOpts::default(),
            )
            .unwrap();
            for e in &serial.table {
                assert!(serial.best_pagerank >= e.pagerank);
            }
            let sharded = brute_force(
                &g,
                v,
                None,
                DanglingRule::Reject,
                &BruteForceOpts { cap: 20, jobs: 4 },
            )
            .unwrap();
            assert_eq!(serial.best, sharded.best);
            assert_eq!(serial.table, sharded.table);
        }
    }

    #[test]
    fn constrained_reduces_to_unconstrained_when_empty() {
        let mut rng = StdRng::seed_from_u64(29);
        let (g, v) = random_ar_instance(&mut rng, 5, 4);
        let free = brute_force(&g, v, None, DanglingRule::Reject, &BruteForceOpts::default())
            .unwrap();
        let none = ConstraintSet::default();
        let constrained = brute_force_constrained(
            &g,
            v,
            &none,
            None,
            DanglingRule::Reject,
            &BruteForceOpts::default(),
        )
        .unwrap();
        assert_eq!(constrained.feasible, 1 << 4);
        assert_eq!(constrained.best, free.best);
        assert_eq!(constrained.best_pagerank, free.best_pagerank);
    }

    #[test]
    fn constraints_exclude_forbidden_pairs() {
        let mut rng = StdRng::seed_from_u64(31);
        let (g, v) = random_ar_instance(&mut rng, 5, 3);
        let cs = ConstraintSet::new([(0, 1), (1, 2)], 3).unwrap();
        let res = brute_force_constrained(
            &g,
            v,
            &cs,
            None,
            DanglingRule::Reject,
            &BruteForceOpts::default(),
        )
        .unwrap();
        // Feasible: {}, {0}, {1}, {2}, {0,2} = 5 of 8.
        assert_eq!(res.feasible, 5);
        let m = res.best.as_mask();
        assert!(cs.allows(m));
        let free = brute_force(&g, v, None, DanglingRule::Reject, &BruteForceOpts::default())
            .unwrap();
        assert!(res.best_pagerank <= free.best_pagerank + 1e-15);
    }

    #[test]
    fn constraint_parsing_and_validation() {
        let cs = ConstraintSet::from_text("0 1\n# comment\n2 1\n", 3).unwrap();
        assert_eq!(cs.len(), 2);
        assert!(cs.contains(1, 0));
        assert!(ConstraintSet::new([(0, 0)], 2).is_err());
        assert!(ConstraintSet::new([(0, 5)], 2).is_err());
    }

    #[test]
    fn walk_two_cycle_frequency() {
        let g = DiGraph::new(2, [fixed(0, 1), fixed(1, 0)]).unwrap();
        let est = simulate_walk(&g, 0, None, 1_000_000, 42).unwrap();
        assert!((est.frequency - 0.5).abs() < 0.01);
        assert!((est.mean_return_time.unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn walk_is_deterministic_for_fixed_seed() {
        let mut rng = StdRng::seed_from_u64(55);
        let (g, v) = random_ar_instance(&mut rng, 6, 3);
        let g = g
            .apply_configuration(&Configuration::full(3))
            .unwrap();
        let pers = Personalization::uniform(6, 0.15).unwrap();
        let a = simulate_walk(&g, v, Some(&pers), 100_000, 7).unwrap();
        let b = simulate_walk(&g, v, Some(&pers), 100_000, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_walk(&g, v, Some(&pers), 100_000, 8).unwrap();
        assert_ne!(a.visits, c.visits);
    }

    #[test]
    fn walk_frequency_tracks_analytic_pagerank() {
        let mut rng = StdRng::seed_from_u64(66);
        let (g, v) = random_ar_instance(&mut rng, 5, 2);
        let g = g.apply_configuration(&Configuration::full(2)).unwrap();
        let pers = Personalization::uniform(5, 0.15).unwrap();
        let tm = transition_matrix(&g).unwrap();
        let exact = pagerank_direct(&tm, &pers).unwrap().get(v);
        let steps = 1_000_000;
        let est = simulate_walk(&g, v, Some(&pers), steps, 4242).unwrap();
        let se = (exact * (1.0 - exact) / steps as f64).sqrt();
        assert!(
            (est.frequency - exact).abs() < 3.0 * se,
            "freq {} exact {exact} se {se}",
            est.frequency
        );
    }
}
