//! One entry point for running any algorithm, shared by the CLI and the
//! HTTP service so both produce identical results for identical inputs.

use std::time::Duration;

use cohort_core::solvers::baselines::{baseline_even_users, baseline_network, baseline_random};
use cohort_core::solvers::TracePoint;
use cohort_core::{
    evaluate_partition, solve_exact, solve_lns, solve_local_search, Algorithm, CancelToken, LnsConfig, ModelParams,
    Partition, SocialNetwork, SolveConstraints, SolveError, SolveResult,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub algo: Algorithm,
    pub seed: u64,
    /// Wall-clock budget for the search algorithms.
    pub time_limit_ms: Option<u64>,
    pub restarts: Option<usize>,
    pub stall_limit: Option<usize>,
    pub params: ModelParams,
    pub constraints: SolveConstraints,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            algo: Algorithm::Lns,
            seed: 0,
            time_limit_ms: None,
            restarts: None,
            stall_limit: None,
            params: ModelParams::default(),
            constraints: SolveConstraints::default(),
        }
    }
}

impl SolveOptions {
    pub fn lns_config(&self, cancel: Option<CancelToken>) -> LnsConfig {
        let d = LnsConfig::default();
        LnsConfig {
            restarts: self.restarts.unwrap_or(d.restarts),
            time_limit: self.time_limit_ms.map_or(d.time_limit, Duration::from_millis),
            stall_limit: self.stall_limit.unwrap_or(d.stall_limit),
            seed: self.seed,
            cancel,
            ..d
        }
    }
}

pub fn run_solve(net: &SocialNetwork, opts: &SolveOptions, cancel: Option<CancelToken>) -> Result<SolveResult, SolveError> {
    let params = &opts.params;
    let c = &opts.constraints;
    if opts.algo.is_baseline() && !c.is_empty() {
        return Err(SolveError::ConstraintsUnsupported(opts.algo));
    }
    match opts.algo {
        Algorithm::Exact => solve_exact(net, params, c),
        Algorithm::Lns => solve_lns(net, params, &opts.lns_config(cancel), c),
        Algorithm::Local => solve_local_search(net, params, &opts.lns_config(cancel), c),
        Algorithm::Random => baseline(net, params, opts.algo, |n, p| baseline_random(n, p, opts.seed)),
        Algorithm::Network => baseline(net, params, opts.algo, |n, p| baseline_network(n, p, opts.seed)),
        Algorithm::Even => baseline(net, params, opts.algo, |n, p| baseline_even_users(n, p, opts.seed)),
    }
}

fn baseline(
    net: &SocialNetwork,
    params: &ModelParams,
    algorithm: Algorithm,
    run: impl FnOnce(&SocialNetwork, &ModelParams) -> Result<Partition, SolveError>,
) -> Result<SolveResult, SolveError> {
    let started = std::time::Instant::now();
    let partition = run(net, params)?;
    let evaluation = evaluate_partition(net, &partition, params)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(SolveResult {
        algorithm,
        improvement_trace: vec![TracePoint {
            restart: 0,
            iteration: 0,
            elapsed_ms,
            objective: evaluation.expected_nonusers,
        }],
        partition,
        evaluation,
        wall_time_ms: elapsed_ms,
        restarts_completed: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cohort_core::{Behavior, Node, NodeId};

    #[test]
    fn even_split_gives_two_users_per_group() {
        let nodes = (0..16)
            .map(|i| Node {
                id: NodeId(format!("p{i:02}")),
                behavior: if i % 2 == 0 { Behavior::User } else { Behavior::NonUser },
            })
            .collect();
        let net = SocialNetwork::new(nodes, vec![]);
        let opts = SolveOptions {
            algo: Algorithm::Even,
            params: ModelParams {
                capacity: cohort_core::CapacityBounds::new(4, 4).unwrap(),
                ..ModelParams::default()
            },
            ..SolveOptions::default()
        };
        let r = run_solve(&net, &opts, None).unwrap();
        for group in r.partition.groups() {
            let users = group
                .iter()
                .filter(|id| net.nodes.iter().any(|n| &n.id == *id && n.behavior == Behavior::User))
                .count();
            assert_eq!(users, 2);
        }
    }

    #[test]
    fn baselines_reject_constraints() {
        let net = cohort_core::instance::ws_instance(12, 0).unwrap();
        let opts = SolveOptions {
            algo: Algorithm::Random,
            constraints: SolveConstraints::default().pin("v000", 0),
            ..SolveOptions::default()
        };
        assert!(matches!(
            run_solve(&net, &opts, None),
            Err(SolveError::ConstraintsUnsupported(Algorithm::Random))
        ));
    }

    #[test]
    fn options_accept_partial_json() {
        let o: SolveOptions = serde_json::from_str(r#"{"algo":"exact","params":{"omega_user_given_non":0.5}}"#).unwrap();
        assert_eq!(o.algo, Algorithm::Exact);
        assert_eq!(o.params.omega_user_given_non, 0.5);
        assert_eq!(o.params.omega_non_given_user, 0.8);
    }
}
