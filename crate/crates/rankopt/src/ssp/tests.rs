use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::chain::{hitting_times, Personalization};
use crate::error::Error;
use crate::graph::{Configuration, DanglingRule, DiGraph};
use crate::ssp::*;
use crate::testutil::{fixed, fragile, random_ar_instance};

fn two_cycle() -> DiGraph {
    DiGraph::new(2, [fixed(0, 1), fixed(1, 0)]).unwrap()
}

#[test]
fn simple_model_of_two_cycle() {
    let m = build_simple_ssp(&two_cycle(), 0, DanglingRule::Reject).unwrap();
    assert_eq!(m.n_states(), 3);
    // No fragile links: every state has a single action.
    assert_eq!(m.max_actions(), 1);
    let policy = Policy(vec![0; 3]);
    let values = evaluate_policy(&m, &policy).unwrap();
    assert!((values[m.start().unwrap()] - 2.0).abs() < 1e-12);
}

#[test]
fn simple_model_power_set_actions() {
    let g = DiGraph::new(
        3,
        [fixed(0, 1), fragile(0, 2), fragile(0, 1), fixed(1, 0), fixed(2, 0)],
    )
    .unwrap();
    let m = build_simple_ssp(&g, 1, DanglingRule::Reject).unwrap();
    assert_eq!(m.actions_of(0).len(), 4);
    assert_eq!(m.actions_of(2).len(), 1);
}

#[test]
fn simple_model_value_matches_hitting_time_oracle() {
    let mut rng = StdRng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(3..=7);
        let (g, v) = random_ar_instance(&mut rng, n, 0);
        let m = build_simple_ssp(&g, v, DanglingRule::Reject).unwrap();
        let policy = Policy(vec![0; m.n_states()]);
        let values = evaluate_policy(&m, &policy).unwrap();
        let h = hitting_times(&g, v).unwrap();
        assert!(
            (values[v] - h[v]).abs() < 1e-9,
            "J(v_s) = {} vs phi(v) = {}",
            values[v],
            h[v]
        );
    }
}

#[test]
fn refined_state_count_and_action_bound() {
    let mut rng = StdRng::seed_from_u64(4);
    let (g, v) = random_ar_instance(&mut rng, 5, 3);
    assert_eq!(g.fragile_count(), 3);
    let m = build_refined_ssp(&g, v, DanglingRule::Reject, None).unwrap();
    assert_eq!(m.n_states(), 5 + 3 + 1);
    assert_eq!(m.max_actions(), 2);

    let pers = Personalization::uniform(5, 0.15).unwrap();
    let dm = build_refined_ssp(&g, v, DanglingRule::Reject, Some(&pers)).unwrap();
    assert_eq!(dm.n_states(), 2 * 5 + 3 + 2);
    assert_eq!(dm.max_actions(), 2);
}

#[test]
fn refined_aux_values_follow_on_off_formula() {
    let mut rng = StdRng::seed_from_u64(9);
    let (g, v) = random_ar_instance(&mut rng, 6, 4);
    let m = build_refined_ssp(&g, v, DanglingRule::Reject, None).unwrap();
    let cfg = Configuration::from_mask(4, 0b0101);
    let policy = m.policy_for_configuration(&cfg).unwrap();
    let values = evaluate_policy(&m, &policy).unwrap();
    for (s, label) in m.labels().iter().enumerate() {
        if let StateLabel::FragileAux(id) = label {
            let e = g.fragile_edge(*id).unwrap();
            let expected = if cfg.is_active(*id) {
                let to = if e.dst == v { m.target() } else { e.dst };
                values[to] + 1.0
            } else {
                values[e.src]
            };
            assert!((values[s] - expected).abs() < 1e-10);
        }
    }
}

#[test]
fn refined_arrival_probability_is_one_over_a_plus_k() {
    // A node with `a` fixed and `b` fragile out-edges, `k` of them active:
    // the chance of eventually stepping to any particular enabled neighbor
    // (before reaching any other real node) must be 1/(a+k). Verified by an
    // absorbing solve on the refined model's transition structure.
    for a in 1..=4usize {
        for b in 0..=4usize {
            for k in 0..=b {
                let n = 1 + a + b;
                let mut edges = Vec::new();
                for t in 0..a {
                    edges.push(fixed(0, 1 + t));
                }
                for t in 0..b {
                    edges.push(fragile(0, 1 + a + t));
                }
                // Every neighbor returns to 0 so nothing dangles.
                for w in 1..n {
                    edges.push(fixed(w, 0));
                }
                let g = DiGraph::new(n, edges).unwrap();
                let m = build_refined_ssp(&g, 0, DanglingRule::Reject, None).unwrap();
                let cfg =
                    Configuration::from_active_ids(b, &(0..k).collect::<Vec<_>>()).unwrap();
                let policy = m.policy_for_configuration(&cfg).unwrap();

                // Absorbing-chain solve: p(s) = P(first real node reached
                // from s is the chosen neighbor), linear in the transient
                // states {v_s, auxiliaries}.
                let solve_arrival = |target_node: usize| -> f64 {
                    let transient: Vec<usize> = (0..m.n_states())
                        .filter(|&s| {
                            s == 0 || matches!(m.label(s), StateLabel::FragileAux(_))
                        })
                        .collect();
                    let idx = |s: usize| transient.iter().position(|&t| t == s);
                    let r = transient.len();
                    let mut mat = nalgebra::DMatrix::<f64>::identity(r, r);
                    let mut rhs = nalgebra::DVector::<f64>::zeros(r);
                    for (row, &s) in transient.iter().enumerate() {
                        let act = &m.actions_of(s)[policy.action(s)];
                        for t in &act.transitions {
                            if let Some(col) = idx(t.to) {
                                mat[(row, col)] -= t.prob;
                            } else if t.to == target_node {
                                rhs[row] += t.prob;
                            }
                        }
                    }
                    let sol = mat.lu().solve(&rhs).unwrap();
                    sol[idx(0).unwrap()]
                };

                let expect = 1.0 / (a + k) as f64;
                for t in 0..a {
                    assert!(
                        (solve_arrival(1 + t) - expect).abs() < 1e-10,
                        "fixed neighbor, a={a} b={b} k={k}"
                    );
                }
                for t in 0..k {
                    assert!(
                        (solve_arrival(1 + a + t) - expect).abs() < 1e-10,
                        "active fragile neighbor, a={a} b={b} k={k}"
                    );
                }
            }
        }
    }
}

#[test]
fn all_off_policy_can_be_improper() {
    // v is only reachable over the fragile link.
    let g = DiGraph::new(
        3,
        [fixed(0, 1), fixed(1, 1), fragile(1, 2), fixed(2, 0)],
    )
    .unwrap();
    let m = build_refined_ssp(&g, 2, DanglingRule::Reject, None).unwrap();
    let all_off = m.policy_for_configuration(&Configuration::empty(1)).unwrap();
    match evaluate_policy(&m, &all_off) {
        Err(Error::ImproperPolicy { states }) => assert!(!states.is_empty()),
        other => panic!("expected improper policy, got {other:?}"),
    }
    // The full configuration is fine.
    let all_on = m.policy_for_configuration(&Configuration::full(1)).unwrap();
    assert!(evaluate_policy(&m, &all_on).is_ok());
}

#[test]
fn value_iteration_on_two_cycle() {
    let m = build_refined_ssp(&two_cycle(), 0, DanglingRule::Reject, None).unwrap();
    let sol = value_iteration(&m, 1e-10).unwrap();
    assert!((sol.values[m.start().unwrap()] - 2.0).abs() < 1e-9);
}

#[test]
fn value_iteration_matches_policy_iteration() {
    let mut rng = StdRng::seed_from_u64(33);
    for case in 0..25 {
        let n = rng.random_range(3..=8);
        let d = rng.random_range(0..=6);
        let (g, v) = random_ar_instance(&mut rng, n, d);
        let m = build_refined_ssp(&g, v, DanglingRule::Reject, None).unwrap();

        let vi = value_iteration(&m, 1e-12).unwrap();
        let vi_exact = evaluate_policy(&m, &vi.policy).unwrap();

        let mu0 = m
            .policy_for_configuration(&Configuration::full(g.fragile_count()))
            .unwrap();
        let pi = policy_iteration(&m, &mu0).unwrap();

        for (s, (a, b)) in vi_exact.iter().zip(&pi.values).enumerate() {
            assert!(
                (a - b).abs() < 1e-9,
                "case {case} state {s}: VI {a} vs PI {b}"
            );
        }
        // A greedy policy of the optimum evaluates back to the optimum.
        let greedy = greedy_policy(&m, &pi.values);
        let re = evaluate_policy(&m, &greedy).unwrap();
        for (a, b) in re.iter().zip(&pi.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn policy_iteration_at_fixed_point_stops_immediately() {
    let mut rng = StdRng::seed_from_u64(5);
    let (g, v) = random_ar_instance(&mut rng, 6, 4);
    let m = build_refined_ssp(&g, v, DanglingRule::Reject, None).unwrap();
    let mu0 = m
        .policy_for_configuration(&Configuration::full(4))
        .unwrap();
    let first = policy_iteration(&m, &mu0).unwrap();
    let again = policy_iteration(&m, &first.policy).unwrap();
    assert_eq!(again.iterations, 1);
    assert_eq!(again.policy, first.policy);
}

#[test]
fn policy_iteration_rejects_improper_start() {
    let g = DiGraph::new(
        3,
        [fixed(0, 1), fixed(1, 1), fragile(1, 2), fixed(2, 0)],
    )
    .unwrap();
    let m = build_refined_ssp(&g, 2, DanglingRule::Reject, None).unwrap();
    let bad = m.policy_for_configuration(&Configuration::empty(1)).unwrap();
    assert!(matches!(
        policy_iteration(&m, &bad),
        Err(Error::ImproperPolicy { .. })
    ));
}

#[test]
fn value_iteration_detects_missing_proper_policy() {
    // Node 1 can never reach v = 2: no action of any policy helps.
    let g = DiGraph::new(3, [fixed(0, 2), fixed(1, 1), fixed(2, 0)]).unwrap();
    let m = build_refined_ssp(&g, 2, DanglingRule::Reject, None).unwrap();
    assert!(matches!(
        value_iteration(&m, 1e-10),
        Err(Error::NoProperPolicy { .. })
    ));
}

#[test]
fn simple_and_refined_agree_for_every_configuration() {
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..15 {
        let n = rng.random_range(3..=6);
        let d = rng.random_range(0..=6);
        let (g, v) = random_ar_instance(&mut rng, n, d);
        let simple = build_simple_ssp(&g, v, DanglingRule::Reject).unwrap();
        let refined = build_refined_ssp(&g, v, DanglingRule::Reject, None).unwrap();
        for mask in 0u64..(1 << d) {
            let cfg = Configuration::from_mask(d, mask);
            let js = evaluate_policy(&simple, &simple.policy_for_configuration(&cfg).unwrap())
                .unwrap();
            let jr = evaluate_policy(&refined, &refined.policy_for_configuration(&cfg).unwrap())
                .unwrap();
            assert!(
                (js[v] - jr[v]).abs() < 1e-9,
                "config {mask:b}: simple {} vs refined {}",
                js[v],
                jr[v]
            );
        }
    }
}

#[test]
fn damped_model_return_time_closed_form() {
    // Two-cycle, c = 1/2, uniform personalization: J(v_s) = (4-c)/(2-c),
    // J(q) = 5/3, and the blended return time is exactly 2 (the Google
    // chain is symmetric, so pi(v) = 1/2).
    let pers = Personalization::uniform(2, 0.5).unwrap();
    let m = build_refined_ssp(&two_cycle(), 0, DanglingRule::Reject, Some(&pers)).unwrap();
    let policy = Policy(vec![0; m.n_states()]);
    let values = evaluate_policy(&m, &policy).unwrap();
    let vs = m.start().unwrap();
    let q = m.teleport().unwrap();
    assert!((values[vs] - 7.0 / 3.0).abs() < 1e-12);
    assert!((values[q] - 5.0 / 3.0).abs() < 1e-12);
    assert!((m.expected_return_time(&values).unwrap() - 2.0).abs() < 1e-12);
    assert!((m.pagerank_value(&values).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn damped_models_make_every_policy_proper() {
    let mut rng = StdRng::seed_from_u64(40);
    let (g, v) = random_ar_instance(&mut rng, 6, 5);
    let pers = Personalization::uniform(6, 0.15).unwrap();
    let m = build_refined_ssp(&g, v, DanglingRule::Reject, Some(&pers)).unwrap();
    for _ in 0..100 {
        let policy = Policy(
            (0..m.n_states())
                .map(|s| rng.random_range(0..m.actions_of(s).len()))
                .collect(),
        );
        assert!(evaluate_policy(&m, &policy).is_ok());
    }
}

#[test]
fn fragile_node_gets_one_action_per_link_plus_fallback() {
    let g = DiGraph::new(
        3,
        [fixed(0, 1), fragile(1, 2), fragile(1, 0), fixed(2, 0)],
    )
    .unwrap();
    let m = build_refined_ssp(&g, 0, DanglingRule::SelfLoop, None).unwrap();
    // Node 1 is fragile: two ActivateLink actions plus the fallback; its
    // links get no auxiliary states.
    assert_eq!(m.actions_of(1).len(), 3);
    assert_eq!(m.n_states(), 4); // n + 0 aux + target
    assert!(matches!(
        build_refined_ssp(&g, 0, DanglingRule::Reject, None),
        Err(Error::FragileNode { node: 1 })
    ));
}

#[test]
fn policy_configuration_round_trip() {
    let mut rng = StdRng::seed_from_u64(77);
    let (g, v) = random_ar_instance(&mut rng, 6, 5);
    for model in [
        build_refined_ssp(&g, v, DanglingRule::Reject, None).unwrap(),
        build_simple_ssp(&g, v, DanglingRule::Reject).unwrap(),
    ] {
        for mask in [0u64, 0b00111, 0b10101, 0b11111] {
            let cfg = Configuration::from_mask(5, mask);
            let policy = model.policy_for_configuration(&cfg).unwrap();
            assert_eq!(model.configuration_for_policy(&policy).unwrap(), cfg);
        }
    }
}

#[test]
fn negated_costs_flip_the_objective() {
    // One fragile shortcut into v: maximizing the return time leaves it off.
    let g = DiGraph::new(
        3,
        [fixed(0, 1), fixed(1, 2), fixed(2, 0), fragile(1, 0)],
    )
    .unwrap();
    let m = build_refined_ssp(&g, 0, DanglingRule::Reject, None).unwrap();
    let max_sol = value_iteration(&m, 1e-12).unwrap();
    let max_cfg = m.configuration_for_policy(&max_sol.policy).unwrap();
    assert_eq!(max_cfg.active_ids(), vec![0]);

    let negated = m.negate_costs();
    let min_sol = value_iteration(&negated, 1e-12).unwrap();
    let min_cfg = negated.configuration_for_policy(&min_sol.policy).unwrap();
    assert!(min_cfg.active_ids().is_empty());
    // |J_hat(v_s)| is the maximized return time: the 3-cycle takes 3 steps.
    assert!((min_sol.values[0].abs() - 3.0).abs() < 1e-9);
}
