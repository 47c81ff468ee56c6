//! Partitioning algorithms: exhaustive search, large neighborhood search
//! with exact two-group repair, swap-based local search and the three
//! practitioner baselines. Every algorithm reports its final partition
//! through [`evaluate_partition`].

pub mod baselines;
mod constraints;
mod exact;
mod lns;
mod local;
mod repair;
pub(crate) mod scorer;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::{Duration, Instant};

pub use baselines::{baseline_even_users, baseline_network, baseline_random};
pub use constraints::{NodePair, SolveConstraints};
pub use exact::{solve_exact, solve_exact_limited, DEFAULT_EXACT_LIMIT};
pub use lns::{solve_lns, DestroyStrategy, LnsConfig};
pub use local::solve_local_search;
pub use repair::{count_two_group_splits, repair_two_groups};

use crate::dynamics::apply_intervention;
use crate::influence::{expected_nonusers, flip_profile, success, Evaluation, InfluenceError};
use crate::model::{feasible_group_counts, CapacityBounds, Instance, ModelError, ModelParams, Partition, SocialNetwork};
use crate::seed::derive_seed;
use constraints::Rules;
use scorer::Scorer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("instance has {n} nodes; exhaustive search is limited to {limit}")]
    InstanceTooLarge { n: usize, limit: usize },
    #[error("{n} nodes cannot be split into groups of {lo}..={hi}")]
    InfeasibleBounds { n: usize, lo: usize, hi: usize },
    #[error("constraints cannot be satisfied: {0}")]
    UnsatisfiableConstraints(String),
    #[error("time budget must be positive")]
    TimeBudgetZero,
    #[error("no feasible split of the two groups")]
    NoFeasibleSplit,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} does not accept solve constraints")]
    ConstraintsUnsupported(Algorithm),
    #[error("solve was cancelled")]
    Cancelled,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Influence(#[from] InfluenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Exact,
    Lns,
    Local,
    Random,
    Network,
    Even,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Exact,
        Algorithm::Lns,
        Algorithm::Local,
        Algorithm::Random,
        Algorithm::Network,
        Algorithm::Even,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Lns => "lns",
            Algorithm::Local => "local",
            Algorithm::Random => "random",
            Algorithm::Network => "network",
            Algorithm::Even => "even",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Algorithm::Random | Algorithm::Network | Algorithm::Even)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected exact|lns|local|random|network|even)"))
    }
}

/// Shared flag for aborting a running solve.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub restart: usize,
    pub iteration: u64,
    pub elapsed_ms: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub algorithm: Algorithm,
    pub partition: Partition,
    pub evaluation: Evaluation,
    pub wall_time_ms: f64,
    pub restarts_completed: usize,
    pub improvement_trace: Vec<TracePoint>,
}

impl SolveResult {
    /// Zeroes every wall-clock field so results of identical runs compare
    /// (and serialize) identically.
    pub fn without_timings(mut self) -> Self {
        self.wall_time_ms = 0.0;
        for p in &mut self.improvement_trace {
            p.elapsed_ms = 0.0;
        }
        self
    }
}

/// Full pipeline: rewire, closed-form expectation, success and flip risks.
pub fn evaluate_partition(net: &SocialNetwork, p: &Partition, params: &ModelParams) -> Result<Evaluation, SolveError> {
    params.validate()?;
    let wnet = apply_intervention(net, p, params)?;
    let expected = expected_nonusers(&wnet, params)?;
    Ok(Evaluation {
        expected_nonusers: expected,
        success: success(net, expected, params),
        flips: flip_profile(&wnet, params)?,
        partition: p.clone(),
    })
}

/// Validated instance data shared by the search algorithms.
pub(crate) struct Prepared {
    pub inst: Instance,
    pub scorer: Scorer,
    pub rules: Rules,
    pub bounds: CapacityBounds,
    pub counts: Vec<usize>,
}

impl Prepared {
    pub(crate) fn new(net: &SocialNetwork, params: &ModelParams, constraints: &SolveConstraints) -> Result<Self, SolveError> {
        params.validate()?;
        let inst = Instance::new(net)?;
        let bounds = params.capacity;
        let counts = feasible_group_counts(inst.len(), bounds);
        if counts.is_empty() {
            return Err(SolveError::InfeasibleBounds {
                n: inst.len(),
                lo: bounds.lo(),
                hi: bounds.hi(),
            });
        }
        let rules = constraints.compile(&inst, bounds)?;
        if !counts.iter().any(|&s| rules.supports_group_count(s)) {
            return Err(SolveError::UnsatisfiableConstraints(
                "pinned group indices exceed every feasible group count".into(),
            ));
        }
        Ok(Prepared {
            scorer: Scorer::new(&inst, params),
            inst,
            rules,
            bounds,
            counts,
        })
    }

    pub(crate) fn finish(
        &self,
        net: &SocialNetwork,
        params: &ModelParams,
        algorithm: Algorithm,
        groups: &[usize],
        started: Instant,
        restarts_completed: usize,
        improvement_trace: Vec<TracePoint>,
    ) -> Result<SolveResult, SolveError> {
        let partition = self.inst.partition_from_dense(groups);
        let evaluation = evaluate_partition(net, &partition, params)?;
        Ok(SolveResult {
            algorithm,
            partition,
            evaluation,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            restarts_completed,
            improvement_trace,
        })
    }

    /// Random feasible start for restart `r`: group counts are visited in a
    /// seeded rotation, skipping counts the constraints rule out.
    pub(crate) fn initial(&self, seed: u64, r: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        let len = self.counts.len();
        let offset = (derive_seed(seed, u64::MAX) % len as u64) as usize;
        (0..len)
            .map(|k| self.counts[(offset + r + k) % len])
            .find_map(|s| self.rules.random_assignment(s, self.bounds, rng))
    }
}

pub(crate) fn restart_rng(seed: u64, r: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64))
}

pub(crate) struct RestartOutcome {
    pub groups: Vec<usize>,
    pub score: f64,
    pub trace: Vec<TracePoint>,
}

/// Runs restarts `0..restarts` in worker-sized batches until the deadline,
/// returning outcomes in restart order.
pub(crate) fn run_restarts<F>(restarts: usize, deadline: Instant, cancel: Option<&CancelToken>, run: F) -> Result<Vec<RestartOutcome>, SolveError>
where
    F: Fn(usize) -> Result<Option<RestartOutcome>, SolveError> + Sync,
{
    #[cfg(feature = "parallel")]
    let batch = rayon::current_num_threads().max(1);
    #[cfg(not(feature = "parallel"))]
    let batch = 1usize;

    let mut out = Vec::new();
    let mut next = 0usize;
    while next < restarts {
        if cancel.is_some_and(CancelToken::is_cancelled) {
            return Err(SolveError::Cancelled);
        }
        if next > 0 && Instant::now() >= deadline {
            break;
        }
        let end = restarts.min(next.saturating_add(batch));
        #[cfg(feature = "parallel")]
        let results: Vec<_> = {
            use rayon::prelude::*;
            (next..end).into_par_iter().map(&run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<_> = (next..end).map(&run).collect();
        for r in results {
            if let Some(o) = r? {
                out.push(o);
            }
        }
        next = end;
    }
    Ok(out)
}

pub(crate) fn deadline_after(start: Instant, limit: Duration) -> Instant {
    start.checked_add(limit).unwrap_or(start + Duration::from_secs(86_400 * 365))
}

/// Best outcome by score, ties broken towards the canonical partition.
pub(crate) fn pick_best(outcomes: Vec<RestartOutcome>) -> Option<(Vec<usize>, Vec<TracePoint>)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut trace = Vec::new();
    for o in outcomes {
        trace.extend(o.trace);
        let replace = match &best {
            None => true,
            Some((g, s)) => scorer::better(o.score, &o.groups, *s, g),
        };
        if replace {
            best = Some((o.groups, o.score));
        }
    }
    best.map(|(g, _)| (g, trace))
}
