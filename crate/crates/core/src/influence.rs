//! Single-stage competitive threshold influence: closed-form expectations,
//! per-node flip probabilities, the success score and a Monte Carlo
//! estimator used as an independent check of the closed form.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::WeightedNetwork;
use crate::model::{Behavior, ModelParams, NodeId, Partition, SocialNetwork};
use crate::seed::derive_seed;

/// Tolerance on a target's incoming weight sum being 0 or 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

const SIM_CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfluenceError {
    #[error("incoming weights of {node} sum to {sum}, expected 0 or 1")]
    UnnormalizedInput { node: NodeId, sum: f64 },
    #[error("sample count must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipProbabilities {
    pub become_user: f64,
    pub become_nonuser: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlipProfile {
    pub per_node: BTreeMap<NodeId, FlipProbabilities>,
    /// Opposite-weight sums that drifted outside [0, 1] and were clamped.
    #[serde(default)]
    pub clamped: usize,
}

impl FlipProfile {
    pub fn get(&self, id: &NodeId) -> Option<FlipProbabilities> {
        self.per_node.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub expected_nonusers: f64,
    pub success: f64,
    pub flips: FlipProfile,
    pub partition: Partition,
}

fn check_normalized(wnet: &WeightedNetwork) -> Result<(), InfluenceError> {
    for (j, node) in wnet.nodes().iter().enumerate() {
        if node.is_facilitator {
            continue;
        }
        let sum = wnet.incoming_sum(j);
        if sum.abs() > NORMALIZATION_TOLERANCE && (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(InfluenceError::UnnormalizedInput {
                node: node.id.clone(),
                sum,
            });
        }
    }
    Ok(())
}

/// Probability that node `j`'s threshold is exceeded, plus whether the raw
/// sum needed clamping.
fn exceed_probability(wnet: &WeightedNetwork, j: usize) -> (f64, bool) {
    let s = wnet.opposite_sum(j);
    let clamped = s.clamp(0.0, 1.0);
    (clamped, clamped != s)
}

/// Expected number of non-users among original participants after one
/// round of influence.
pub fn expected_nonusers(wnet: &WeightedNetwork, params: &ModelParams) -> Result<f64, InfluenceError> {
    check_normalized(wnet)?;
    let mut total = 0.0;
    for (j, node) in wnet.nodes().iter().enumerate() {
        if node.is_facilitator {
            continue;
        }
        let (p, _) = exceed_probability(wnet, j);
        total += match node.behavior {
            Behavior::NonUser => 1.0 - params.omega_user_given_non * p,
            Behavior::User => params.omega_non_given_user * p,
        };
    }
    Ok(total)
}

pub fn flip_profile(wnet: &WeightedNetwork, params: &ModelParams) -> Result<FlipProfile, InfluenceError> {
    check_normalized(wnet)?;
    let mut profile = FlipProfile::default();
    for (j, node) in wnet.nodes().iter().enumerate() {
        if node.is_facilitator {
            continue;
        }
        let (p, clamped) = exceed_probability(wnet, j);
        if clamped {
            profile.clamped += 1;
        }
        let probs = match node.behavior {
            Behavior::NonUser => FlipProbabilities {
                become_user: params.omega_user_given_non * p,
                become_nonuser: 0.0,
            },
            Behavior::User => FlipProbabilities {
                become_user: 0.0,
                become_nonuser: params.omega_non_given_user * p,
            },
        };
        profile.per_node.insert(node.id.clone(), probs);
    }
    Ok(profile)
}

/// Expected gain in non-users relative to the largest possible gain
/// (every user's threshold exceeded). Zero when there are no users.
pub fn success(net: &SocialNetwork, expected_post: f64, params: &ModelParams) -> f64 {
    success_from_counts(net.user_count(), net.nonuser_count(), expected_post, params)
}

pub(crate) fn success_from_counts(users: usize, nonusers: usize, expected_post: f64, params: &ModelParams) -> f64 {
    let denom = params.omega_non_given_user * users as f64;
    if users == 0 || denom == 0.0 {
        return 0.0;
    }
    // dividing each term first keeps ratios such as -0.25 exact
    expected_post / denom - nonusers as f64 / denom
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Moments { count, mean, m2 }
    }
}

struct SimNode {
    opposite: f64,
    user: bool,
}

fn run_chunk(nodes: &[SimNode], base_nonusers: u64, params: &ModelParams, seed: u64, chunk: u64, len: u64) -> Moments {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk));
    let mut m = Moments::default();
    for _ in 0..len {
        let mut nonusers = base_nonusers;
        for node in nodes {
            // threshold on (0, 1] so a zero sum never reaches it
            let threshold = 1.0 - rng.random::<f64>();
            if node.opposite < threshold {
                continue;
            }
            if node.user {
                if rng.random::<f64>() < params.omega_non_given_user {
                    nonusers += 1;
                }
            } else if rng.random::<f64>() < params.omega_user_given_non {
                nonusers -= 1;
            }
        }
        m.push(nonusers as f64);
    }
    m
}

/// Monte Carlo estimate of [`expected_nonusers`]: draws independent uniform
/// thresholds per participant and applies the switching probabilities.
///
/// Samples are split into fixed-size chunks, each seeded from `(seed, chunk)`,
/// so the result does not depend on how many worker threads run them.
pub fn simulate(
    wnet: &WeightedNetwork,
    params: &ModelParams,
    sample_count: u64,
    seed: u64,
) -> Result<SimulationSummary, InfluenceError> {
    if sample_count == 0 {
        return Err(InfluenceError::NoSamples);
    }
    check_normalized(wnet)?;
    let mut base_nonusers = 0u64;
    let mut nodes = Vec::new();
    for (j, node) in wnet.nodes().iter().enumerate() {
        if node.is_facilitator {
            continue;
        }
        if node.behavior == Behavior::NonUser {
            base_nonusers += 1;
        }
        let opposite = wnet.opposite_sum(j).clamp(0.0, 1.0);
        if opposite > 0.0 {
            nodes.push(SimNode {
                opposite,
                user: node.behavior.is_user(),
            });
        }
    }

    let chunks = sample_count.div_ceil(SIM_CHUNK);
    let chunk_len = |c: u64| SIM_CHUNK.min(sample_count - c * SIM_CHUNK);
    let run = |c: u64| run_chunk(&nodes, base_nonusers, params, seed, c, chunk_len(c));

    #[cfg(feature = "parallel")]
    let parts: Vec<Moments> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Moments> = (0..chunks).map(run).collect();

    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if m.count > 1 {
        (m.m2 / (m.count - 1) as f64 / m.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(SimulationSummary {
        mean: m.mean,
        std_error,
        samples: m.count,
    })
}
