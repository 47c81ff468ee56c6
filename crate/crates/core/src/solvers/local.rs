use std::collections::HashSet;

use rand::Rng;
use web_time::Instant;

use super::scorer::{group_count, EPS};
use super::{
    deadline_after, pick_best, restart_rng, run_restarts, Algorithm, LnsConfig, Prepared, RestartOutcome,
    SolveConstraints, SolveError, SolveResult, TracePoint,
};
use crate::model::{ModelParams, SocialNetwork};

/// Swap hill-climbing with the same restart, seeding and time semantics as
/// [`super::solve_lns`]. The `destroy` field of the config is ignored.
pub fn solve_local_search(
    net: &SocialNetwork,
    params: &ModelParams,
    cfg: &LnsConfig,
    constraints: &SolveConstraints,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    cfg.check()?;
    let prep = Prepared::new(net, params, constraints)?;
    let deadline = deadline_after(started, cfg.time_limit);
    let outcomes = run_restarts(cfg.restarts, deadline, cfg.cancel.as_ref(), |r| {
        restart(&prep, cfg, r, started, deadline)
    })?;
    let completed = outcomes.len();
    let Some((groups, trace)) = pick_best(outcomes) else {
        return Err(SolveError::UnsatisfiableConstraints(
            "no feasible starting partition honors the constraints".into(),
        ));
    };
    prep.finish(net, params, Algorithm::Local, &groups, started, completed, trace)
}

fn restart(
    prep: &Prepared,
    cfg: &LnsConfig,
    r: usize,
    started: Instant,
    deadline: Instant,
) -> Result<Option<RestartOutcome>, SolveError> {
    let elapsed = || started.elapsed().as_secs_f64() * 1e3;
    let mut rng = restart_rng(cfg.seed, r);
    let Some(mut groups) = prep.initial(cfg.seed, r, &mut rng) else {
        return Ok(None);
    };
    let n = groups.len();
    let mut score = prep.scorer.score(&groups);
    let mut trace = vec![TracePoint {
        restart: r,
        iteration: 0,
        elapsed_ms: elapsed(),
        objective: score,
    }];
    let s = group_count(&groups);
    if s < 2 {
        return Ok(Some(RestartOutcome { groups, score, trace }));
    }
    // swaps keep group sizes, so the number of cross-group pairs is fixed
    let mut sizes = vec![0usize; s];
    for &g in &groups {
        sizes[g] += 1;
    }
    let cross_pairs = (n * n - sizes.iter().map(|k| k * k).sum::<usize>()) / 2;
    let mut tried: HashSet<(usize, usize)> = HashSet::new();
    let mut stall = 0usize;
    let mut iteration = 0u64;

    loop {
        if cfg.cancelled() {
            return Err(SolveError::Cancelled);
        }
        if stall >= cfg.stall_limit || tried.len() == cross_pairs || Instant::now() >= deadline {
            break;
        }
        let (a, b) = loop {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if groups[a] != groups[b] {
                break (a.min(b), a.max(b));
            }
        };
        iteration += 1;
        stall += 1;
        if !tried.insert((a, b)) || !swappable(prep, &groups, a, b) {
            continue;
        }
        let (ga, gb) = (groups[a], groups[b]);
        let affected: Vec<usize> = (0..n).filter(|&j| groups[j] == ga || groups[j] == gb).collect();
        let before: f64 = affected.iter().map(|&j| prep.scorer.target(&groups, j)).sum();
        groups.swap(a, b);
        let after: f64 = affected.iter().map(|&j| prep.scorer.target(&groups, j)).sum();
        if after > before + EPS {
            score = prep.scorer.score(&groups);
            stall = 0;
            tried.clear();
            trace.push(TracePoint {
                restart: r,
                iteration,
                elapsed_ms: elapsed(),
                objective: score,
            });
        } else {
            groups.swap(a, b);
        }
    }
    Ok(Some(RestartOutcome { groups, score, trace }))
}

fn swappable(prep: &Prepared, groups: &[usize], a: usize, b: usize) -> bool {
    let rules = &prep.rules;
    if !rules.is_free(a) || !rules.is_free(b) {
        return false;
    }
    let clash = |x: usize, other: usize, dest: usize| rules.cannot[x].iter().any(|&k| k != other && groups[k] == dest);
    !clash(a, b, groups[b]) && !clash(b, a, groups[a])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{decorate, generate_ws, DecorationParams, WsParams};
    use crate::model::{validate_partition, Behavior, CapacityBounds, Node, NodeId};

    fn cfg(seed: u64) -> LnsConfig {
        LnsConfig {
            restarts: 4,
            seed,
            ..LnsConfig::default()
        }
    }

    #[test]
    fn two_node_swap_reaches_the_other_partition() {
        let nodes = vec![
            Node { id: "a".into(), behavior: Behavior::User },
            Node { id: "b".into(), behavior: Behavior::NonUser },
        ];
        let net = SocialNetwork::new(nodes, vec![]);
        let params = ModelParams {
            capacity: CapacityBounds::new(1, 1).unwrap(),
            ..ModelParams::default()
        };
        let r = solve_local_search(&net, &params, &cfg(0), &SolveConstraints::default()).unwrap();
        assert_eq!(r.partition.group_count(), 2);
        assert!(validate_partition(&net, &r.partition, params.capacity).is_empty());
    }

    #[test]
    fn flat_objective_keeps_the_initial_partition() {
        let nodes = (0..9)
            .map(|i| Node {
                id: NodeId(format!("n{i}")),
                behavior: Behavior::NonUser,
            })
            .collect();
        let net = SocialNetwork::new(nodes, vec![]);
        let r = solve_local_search(&net, &ModelParams::default(), &cfg(3), &SolveConstraints::default()).unwrap();
        assert_eq!(r.evaluation.expected_nonusers, 9.0);
        assert!(r.improvement_trace.iter().all(|t| t.iteration == 0));
    }

    #[test]
    fn local_search_is_deterministic_and_honors_pins() {
        let g = generate_ws(&WsParams { n: 20, k: 4, p: 0.2, seed: 9 }).unwrap();
        let net = decorate(&g, &DecorationParams { seed: 9, ..DecorationParams::default() });
        let first = net.nodes[0].id.clone();
        let c = SolveConstraints::default().pin(first.clone(), 0);
        let a = solve_local_search(&net, &ModelParams::default(), &cfg(5), &c).unwrap();
        let b = solve_local_search(&net, &ModelParams::default(), &cfg(5), &c).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.partition.group_of(&first), Some(0));
    }
}
