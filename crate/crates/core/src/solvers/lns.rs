use std::collections::HashSet;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use web_time::{Duration, Instant};

use super::repair::best_split;
use super::scorer::EPS;
use super::{
    deadline_after, pick_best, restart_rng, run_restarts, Algorithm, CancelToken, Prepared, RestartOutcome,
    SolveConstraints, SolveError, SolveResult, TracePoint,
};
use crate::model::{ModelParams, SocialNetwork};

/// Neighborhood destroyed in each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DestroyStrategy {
    /// Two random groups, repaired by exhaustive split enumeration.
    TwoGroups,
    /// `count` random unconstrained nodes, reinserted by enumerating every
    /// placement into the groups they were taken from. Experimental.
    RandomNodes { count: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LnsConfig {
    pub restarts: usize,
    #[serde(with = "millis")]
    pub time_limit: Duration,
    /// Consecutive non-improving rounds that end a restart.
    pub stall_limit: usize,
    pub destroy: DestroyStrategy,
    pub seed: u64,
    #[serde(skip)]
    pub cancel: Option<CancelToken>,
}

impl Default for LnsConfig {
    fn default() -> Self {
        LnsConfig {
            restarts: 50,
            time_limit: Duration::from_secs(300),
            stall_limit: 200,
            destroy: DestroyStrategy::TwoGroups,
            seed: 0,
            cancel: None,
        }
    }
}

impl LnsConfig {
    pub(crate) fn check(&self) -> Result<(), SolveError> {
        if self.time_limit.is_zero() {
            return Err(SolveError::TimeBudgetZero);
        }
        if self.restarts == 0 || self.stall_limit == 0 {
            return Err(SolveError::InvalidConfig(
                "restarts and stall_limit must be at least 1".into(),
            ));
        }
        if let DestroyStrategy::RandomNodes { count } = self.destroy {
            if !(1..=6).contains(&count) {
                return Err(SolveError::InvalidConfig("random-node destroy size must be 1..=6".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(CancelToken::is_cancelled)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use web_time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Large neighborhood search: from random feasible starts, repeatedly
/// destroy two random groups and re-split their members optimally,
/// keeping the result only when the objective strictly improves.
pub fn solve_lns(
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
    prep.finish(net, params, Algorithm::Lns, &groups, started, completed, trace)
}

fn elapsed_ms(started: Instant) -> f64 {
    started.elapsed().as_secs_f64() * 1e3
}

fn restart(
    prep: &Prepared,
    cfg: &LnsConfig,
    r: usize,
    started: Instant,
    deadline: Instant,
) -> Result<Option<RestartOutcome>, SolveError> {
    let mut rng = restart_rng(cfg.seed, r);
    let Some(mut groups) = prep.initial(cfg.seed, r, &mut rng) else {
        return Ok(None);
    };
    let mut score = prep.scorer.score(&groups);
    let mut trace = vec![TracePoint {
        restart: r,
        iteration: 0,
        elapsed_ms: elapsed_ms(started),
        objective: score,
    }];
    let s = super::scorer::group_count(&groups);
    let movable: Vec<usize> = (0..s).filter(|g| !prep.rules.frozen.contains(g)).collect();
    if movable.len() < 2 {
        return Ok(Some(RestartOutcome { groups, score, trace }));
    }
    let pair_count = movable.len() * (movable.len() - 1) / 2;
    // pairs repaired without gain since the last improvement; repair is
    // deterministic, so once all are exhausted the partition is 2-group optimal
    let mut exhausted: HashSet<(usize, usize)> = HashSet::new();
    let mut stall = 0usize;
    let mut iteration = 0u64;

    loop {
        if cfg.cancelled() {
            return Err(SolveError::Cancelled);
        }
        if stall >= cfg.stall_limit || Instant::now() >= deadline {
            break;
        }
        if cfg.destroy == DestroyStrategy::TwoGroups && exhausted.len() == pair_count {
            break;
        }
        iteration += 1;
        stall += 1;
        let candidate = match cfg.destroy {
            DestroyStrategy::TwoGroups => {
                let picked = sample(&mut rng, movable.len(), 2);
                let (a, b) = (movable[picked.index(0)], movable[picked.index(1)]);
                let key = (a.min(b), a.max(b));
                if exhausted.contains(&key) {
                    continue;
                }
                exhausted.insert(key);
                match best_split(prep, &groups, a, b) {
                    Ok(split) => split.groups,
                    Err(SolveError::NoFeasibleSplit) => continue,
                    Err(e) => return Err(e),
                }
            }
            DestroyStrategy::RandomNodes { count } => match reinsert_random_nodes(prep, &groups, count, &mut rng) {
                Some(g) => g,
                None => continue,
            },
        };
        let candidate_score = prep.scorer.score(&candidate);
        if candidate_score > score + EPS {
            groups = candidate;
            score = candidate_score;
            stall = 0;
            exhausted.clear();
            trace.push(TracePoint {
                restart: r,
                iteration,
                elapsed_ms: elapsed_ms(started),
                objective: score,
            });
        }
    }
    Ok(Some(RestartOutcome { groups, score, trace }))
}

/// Removes `count` free nodes and tries every placement back into their
/// source groups, returning the best feasible assignment.
fn reinsert_random_nodes(prep: &Prepared, groups: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let free: Vec<usize> = (0..groups.len()).filter(|&i| prep.rules.is_free(i)).collect();
    if free.len() < count {
        return None;
    }
    let picked: Vec<usize> = sample(rng, free.len(), count).into_iter().map(|k| free[k]).collect();
    let mut targets: Vec<usize> = picked.iter().map(|&i| groups[i]).collect();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() < 2 {
        return None;
    }
    let mut sizes = vec![0usize; super::scorer::group_count(groups)];
    for &g in groups {
        sizes[g] += 1;
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let combos = targets.len().pow(count as u32);
    let mut work = groups.to_vec();
    for code in 0..combos {
        let mut c = code;
        let mut local_sizes = sizes.clone();
        for &i in &picked {
            local_sizes[groups[i]] -= 1;
        }
        for &i in &picked {
            let g = targets[c % targets.len()];
            c /= targets.len();
            work[i] = g;
            local_sizes[g] += 1;
        }
        if !targets.iter().all(|&g| prep.bounds.contains(local_sizes[g])) {
            continue;
        }
        if !picked
            .iter()
            .all(|&i| prep.rules.cannot[i].iter().all(|&k| work[k] != work[i]))
        {
            continue;
        }
        let s = prep.scorer.score(&work);
        if best.as_ref().is_none_or(|(_, b)| s > b + EPS) {
            best = Some((work.clone(), s));
        }
    }
    best.map(|(g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{decorate, generate_ws, DecorationParams, WsParams};
    use crate::model::{validate_partition, CapacityBounds, Node, Behavior};
    use crate::solvers::solve_exact;

    fn ws(n: usize, seed: u64) -> SocialNetwork {
        let g = generate_ws(&WsParams { n, k: 4, p: 0.25, seed }).unwrap();
        decorate(&g, &DecorationParams { seed, ..DecorationParams::default() })
    }

    fn quick(seed: u64) -> LnsConfig {
        LnsConfig {
            restarts: 8,
            seed,
            ..LnsConfig::default()
        }
    }

    #[test]
    fn lns_is_deterministic_and_valid() {
        let net = ws(24, 3);
        let params = ModelParams::default();
        let a = solve_lns(&net, &params, &quick(7), &SolveConstraints::default()).unwrap();
        let b = solve_lns(&net, &params, &quick(7), &SolveConstraints::default()).unwrap();
        assert_eq!(a.clone().without_timings(), b.without_timings());
        assert!(validate_partition(&net, &a.partition, params.capacity).is_empty());
        assert_eq!(a.restarts_completed, 8);
    }

    #[test]
    fn trace_is_strictly_increasing_within_each_restart() {
        let net = ws(30, 5);
        let r = solve_lns(&net, &ModelParams::default(), &quick(1), &SolveConstraints::default()).unwrap();
        for w in r.improvement_trace.windows(2) {
            if w[0].restart == w[1].restart {
                assert!(w[1].objective > w[0].objective);
                assert!(w[1].iteration > w[0].iteration);
            }
        }
    }

    #[test]
    fn lns_matches_exact_on_small_instances() {
        for seed in 0..4 {
            let net = ws(10, seed);
            let params = ModelParams::default();
            let exact = solve_exact(&net, &params, &SolveConstraints::default()).unwrap();
            let lns = solve_lns(&net, &params, &quick(seed), &SolveConstraints::default()).unwrap();
            assert!(lns.evaluation.expected_nonusers >= 0.98 * exact.evaluation.expected_nonusers);
        }
    }

    #[test]
    fn single_group_instance_returns_immediately() {
        let nodes = (0..5)
            .map(|i| Node {
                id: format!("m{i}").into(),
                behavior: if i < 2 { Behavior::User } else { Behavior::NonUser },
            })
            .collect();
        let net = SocialNetwork::new(nodes, vec![]);
        let params = ModelParams {
            capacity: CapacityBounds::new(4, 7).unwrap(),
            ..ModelParams::default()
        };
        let r = solve_lns(&net, &params, &quick(2), &SolveConstraints::default()).unwrap();
        assert_eq!(r.partition.group_count(), 1);
        assert!(r.improvement_trace.iter().all(|t| t.iteration == 0));
    }

    #[test]
    fn constraints_are_honored() {
        let net = ws(20, 8);
        let params = ModelParams::default();
        let ids: Vec<_> = net.nodes.iter().map(|n| n.id.clone()).collect();
        let c = SolveConstraints::default()
            .pin(ids[0].clone(), 1)
            .must(ids[1].clone(), ids[2].clone())
            .cannot(ids[3].clone(), ids[4].clone());
        let r = solve_lns(&net, &params, &quick(4), &c).unwrap();
        let p = &r.partition;
        assert_eq!(p.group_of(&ids[0]), Some(1));
        assert!(p.same_group(&ids[1], &ids[2]));
        assert!(!p.same_group(&ids[3], &ids[4]));
    }

    #[test]
    fn config_errors() {
        let net = ws(12, 1);
        let params = ModelParams::default();
        let zero = LnsConfig {
            time_limit: Duration::ZERO,
            ..LnsConfig::default()
        };
        assert!(matches!(
            solve_lns(&net, &params, &zero, &SolveConstraints::default()),
            Err(SolveError::TimeBudgetZero)
        ));
        let bad = LnsConfig {
            restarts: 0,
            ..LnsConfig::default()
        };
        assert!(solve_lns(&net, &params, &bad, &SolveConstraints::default()).is_err());
    }

    #[test]
    fn cancellation_aborts() {
        let net = ws(30, 1);
        let token = CancelToken::new();
        token.cancel();
        let cfg = LnsConfig {
            cancel: Some(token),
            ..quick(1)
        };
        assert!(matches!(
            solve_lns(&net, &ModelParams::default(), &cfg, &SolveConstraints::default()),
            Err(SolveError::Cancelled)
        ));
    }

    #[test]
    fn random_node_destroy_runs() {
        let net = ws(24, 2);
        let cfg = LnsConfig {
            destroy: DestroyStrategy::RandomNodes { count: 3 },
            ..quick(3)
        };
        let r = solve_lns(&net, &ModelParams::default(), &cfg, &SolveConstraints::default()).unwrap();
        assert!(validate_partition(&net, &r.partition, ModelParams::default().capacity).is_empty());
    }
}
