use cohort_core::instance::{decorate, generate_ws, DecorationParams, WsParams};
use cohort_core::milp::{build_milp, partition_point, read_lp, write_lp, write_mps, MilpModel};
use cohort_core::solvers::baselines::baseline_random;
use cohort_core::{
    evaluate_partition, feasible_group_counts, Behavior, CapacityBounds, ModelParams, Node, NodeId, Partition,
    SocialNetwork,
};
use cohort_oracles::{all_partitions, check_point, parse_lp, point_from_partition};
use proptest::prelude::*;

fn lp_text(m: &MilpModel) -> String {
    let mut out = Vec::new();
    write_lp(m, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn params(lo: usize, hi: usize) -> ModelParams {
    ModelParams {
        capacity: CapacityBounds::new(lo, hi).unwrap(),
        include_facilitator: false,
        ..ModelParams::default()
    }
}

fn instance(n: usize, seed: u64) -> SocialNetwork {
    let g = generate_ws(&WsParams { n, k: 2, p: 0.5, seed }).unwrap();
    decorate(&g, &DecorationParams { user_ratio: 0.5, reciprocity: 0.6, seed, ..DecorationParams::default() })
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn variable_and_row_counts_follow_closed_forms() {
    for n in 3..=6 {
        let net = instance(n, n as u64);
        let m = build_milp(&net, &params(1, n), 1).unwrap();
        let ordered = n * (n - 1);
        let vars = 1 + binomial(n, 2) + n + 4 * ordered + 2 * n * (n - 1) * (n - 1);
        assert_eq!(m.variables.len(), vars, "n = {n}");
        let rows = 2 * n                       // capacity
            + n * (n - 1) * (n - 2)            // transitivity
            + n + binomial(n, 2) + 1           // group representatives
            + 4 * ordered                      // tie definitions, one-hot, weight cap
            + ordered * (6 * (n - 1) + 1); // products and normalization
        assert_eq!(m.constraints.len(), rows, "n = {n}");
        let lp = parse_lp(&lp_text(&m));
        assert_eq!(lp.variable_names().len(), vars);
        assert_eq!(lp.rows.len(), rows);
    }
}

#[test]
fn every_partition_point_is_feasible_and_scores_like_the_evaluator() {
    for seed in 0..6 {
        let net = instance(5, seed);
        let params = params(1, 3);
        for s in feasible_group_counts(5, params.capacity) {
            let m = build_milp(&net, &params, s).unwrap();
            let text = lp_text(&m);
            let lp = parse_lp(&text);
            for groups in all_partitions(5, 1, 3) {
                let p = Partition::from_assignment(
                    net.nodes.iter().zip(&groups).map(|(x, &g)| (x.id.clone(), g)).collect(),
                );
                let x = point_from_partition(&lp, &net, &params, &p);
                let (violation, value) = check_point(&lp, &x);
                let blocks = p.group_count();
                if blocks == s {
                    assert!(violation <= 1e-9, "violation {violation}");
                    let eval = evaluate_partition(&net, &p, &params).unwrap();
                    assert!((value - eval.expected_nonusers).abs() <= 1e-9);
                    // the library's own point agrees with the oracle's
                    let own = partition_point(&m, &net, &p).unwrap();
                    assert!(m.max_violation(&own) <= 1e-9);
                    assert!((m.objective_value(&own) - value).abs() <= 1e-12);
                } else {
                    assert!(violation > 0.5, "a {blocks}-group point fits an S={s} model");
                }
            }
        }
    }
}

#[test]
fn all_nonuser_objective_is_the_node_count() {
    let nodes: Vec<Node> = (0..5)
        .map(|i| Node { id: NodeId(format!("k{i}")), behavior: Behavior::NonUser })
        .collect();
    let net = SocialNetwork::new(nodes, vec![]);
    let m = build_milp(&net, &params(2, 3), 2).unwrap();
    let lp = parse_lp(&lp_text(&m));
    for (name, c) in &lp.objective {
        assert_eq!((name.as_str(), *c), ("obj_const", 5.0));
    }
    let p = Partition::from_groups([vec!["k0", "k1"], vec!["k2", "k3", "k4"]]);
    let (violation, value) = check_point(&lp, &point_from_partition(&lp, &net, &params(2, 3), &p));
    assert!(violation <= 1e-9);
    assert_eq!(value, 5.0);
}

#[test]
fn forced_pair_scores_point_eight() {
    let net = SocialNetwork::new(
        vec![
            Node { id: "u".into(), behavior: Behavior::User },
            Node { id: "n".into(), behavior: Behavior::NonUser },
        ],
        vec![],
    );
    let m = build_milp(&net, &params(1, 2), 1).unwrap();
    let lp = parse_lp(&lp_text(&m));
    let p = Partition::from_groups([vec!["u", "n"]]);
    let (violation, value) = check_point(&lp, &point_from_partition(&lp, &net, &params(1, 2), &p));
    assert!(violation <= 1e-9);
    assert!((value - 0.8).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_instances_are_consistent(seed: u64, n in 3usize..=6, omega in 0.1f64..1.0) {
        let net = instance(n, seed);
        let params = ModelParams { omega_user_given_non: omega, ..params(1, 3) };
        let p = baseline_random(&net, &params, seed).unwrap();
        let m = build_milp(&net, &params, p.group_count()).unwrap();
        let text = lp_text(&m);
        let lp = parse_lp(&text);
        let (violation, value) = check_point(&lp, &point_from_partition(&lp, &net, &params, &p));
        let eval = evaluate_partition(&net, &p, &params).unwrap();
        prop_assert!(violation <= 1e-9);
        prop_assert!((value - eval.expected_nonusers).abs() <= 1e-9);

        // round trip through the library reader and byte-stable output
        let back = read_lp(&text).unwrap();
        prop_assert_eq!(back.constraints.len(), m.constraints.len());
        prop_assert_eq!(back.variables.len(), m.variables.len());
        prop_assert_eq!(text, lp_text(&m));
        let mut mps = Vec::new();
        write_mps(&m, &mut mps).unwrap();
        prop_assert!(String::from_utf8(mps).unwrap().ends_with("ENDATA\n"));
    }
}
