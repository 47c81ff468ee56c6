use cohort_core::instance::ws_instance;
use cohort_core::solvers::baselines::{baseline_even_users, baseline_network, baseline_random};
use cohort_core::solvers::repair_two_groups;
use cohort_core::{
    evaluate_partition, solve_exact, solve_lns, solve_local_search, validate_partition, LnsConfig, ModelParams,
    NodeId, SolveConstraints, SolveError,
};
use proptest::prelude::*;

fn quick(seed: u64) -> LnsConfig {
    LnsConfig { restarts: 6, seed, ..LnsConfig::default() }
}

#[test]
fn optimal_success_does_not_rise_with_user_pressure() {
    for seed in 0..3 {
        let net = ws_instance(10, 500 + seed).unwrap();
        let mut last = f64::INFINITY;
        for omega in [0.25, 0.5, 0.75, 1.0] {
            let params = ModelParams { omega_user_given_non: omega, omega_non_given_user: 0.8, ..ModelParams::default() };
            let s = solve_exact(&net, &params, &SolveConstraints::default()).unwrap().evaluation.success;
            assert!(s <= last + 1e-12, "seed {seed}: {s} after {last}");
            last = s;
        }
    }
}

#[test]
fn results_are_reproducible_across_runs() {
    let net = ws_instance(26, 3).unwrap();
    let params = ModelParams::default();
    let c = SolveConstraints::default();
    let a = solve_lns(&net, &params, &quick(11), &c).unwrap().without_timings();
    let b = solve_lns(&net, &params, &quick(11), &c).unwrap().without_timings();
    assert_eq!(a, b);
    let a = solve_local_search(&net, &params, &quick(11), &c).unwrap().without_timings();
    let b = solve_local_search(&net, &params, &quick(11), &c).unwrap().without_timings();
    assert_eq!(a, b);
}

#[test]
fn infeasible_pin_index_is_reported() {
    let net = ws_instance(12, 1).unwrap();
    let c = SolveConstraints::default().pin(NodeId::from("v000"), 9);
    assert!(matches!(
        solve_lns(&net, &ModelParams::default(), &quick(0), &c),
        Err(SolveError::UnsatisfiableConstraints(_))
    ));
}

fn constraint_set(net_len: usize, picks: &[usize]) -> SolveConstraints {
    let id = |k: usize| NodeId(format!("v{:03}", picks[k] % net_len));
    let mut c = SolveConstraints::default().pin(id(0), 0).pin(id(1), 1);
    if id(2) != id(3) && id(2) != id(0) && id(3) != id(0) {
        c = c.must(id(2), id(3));
    }
    if id(4) != id(5) {
        c = c.cannot(id(4), id(5));
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_algorithm_returns_a_valid_partition(seed in 0u64..10_000, n in 9usize..36) {
        let net = ws_instance(n, seed).unwrap();
        let params = ModelParams::default();
        let c = SolveConstraints::default();
        let parts = [
            solve_lns(&net, &params, &quick(seed), &c).unwrap().partition,
            solve_local_search(&net, &params, &quick(seed), &c).unwrap().partition,
            baseline_random(&net, &params, seed).unwrap(),
            baseline_network(&net, &params, seed).unwrap(),
            baseline_even_users(&net, &params, seed).unwrap(),
        ];
        for p in &parts {
            prop_assert!(validate_partition(&net, p, params.capacity).is_empty());
        }
    }

    #[test]
    fn search_honors_constraints(seed in 0u64..10_000, picks in proptest::collection::vec(0usize..1000, 6)) {
        let net = ws_instance(20, seed).unwrap();
        let params = ModelParams::default();
        let c = constraint_set(20, &picks);
        for result in [
            solve_lns(&net, &params, &quick(seed), &c),
            solve_local_search(&net, &params, &quick(seed), &c),
        ] {
            let r = match result {
                Ok(r) => r,
                Err(SolveError::UnsatisfiableConstraints(_)) => continue,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let p = &r.partition;
            for (id, &g) in &c.pinned {
                prop_assert_eq!(p.group_of(id), Some(g));
            }
            for pair in &c.must_link {
                prop_assert!(p.same_group(pair.first(), pair.second()));
            }
            for pair in &c.cannot_link {
                prop_assert!(!p.same_group(pair.first(), pair.second()));
            }
        }
    }

    #[test]
    fn repair_never_loses(seed in 0u64..10_000, n in 12usize..30) {
        let net = ws_instance(n, seed).unwrap();
        let params = ModelParams::default();
        let p = baseline_even_users(&net, &params, seed).unwrap();
        prop_assume!(p.group_count() >= 2);
        let before = evaluate_partition(&net, &p, &params).unwrap().expected_nonusers;
        let q = repair_two_groups(&net, &params, &p, 0, 1, &SolveConstraints::default()).unwrap();
        let after = evaluate_partition(&net, &q, &params).unwrap().expected_nonusers;
        prop_assert!(after >= before - 1e-12);
        prop_assert_eq!(p.group_sizes().len(), q.group_sizes().len());
    }
}
