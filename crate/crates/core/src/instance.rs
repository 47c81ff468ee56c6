//! Synthetic instances: Watts–Strogatz small-world skeletons decorated with
//! behaviors, arc directions and tie strengths.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Behavior, Node, NodeId, SocialNetwork, Tie, TieStrength};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("ring degree {k} must be even and in 2..{n}")]
    BadDegree { n: usize, k: usize },
    #[error("rewiring probability {0} is outside [0, 1]")]
    BadProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsParams {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub seed: u64,
}

impl WsParams {
    pub fn new(n: usize, seed: u64) -> Self {
        WsParams { n, k: 4, p: 0.25, seed }
    }
}

/// Undirected simple graph on nodes `0..n`; each edge is stored once with
/// the smaller endpoint first, in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl WsGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }
}

pub fn generate_ws(wp: &WsParams) -> Result<WsGraph, InstanceError> {
    let WsParams { n, k, p, seed } = *wp;
    if k < 2 || k % 2 == 1 || k >= n {
        return Err(InstanceError::BadDegree { n, k });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(InstanceError::BadProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for i in 0..n {
        for d in 1..=k / 2 {
            let j = (i + d) % n;
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    // rewire lattice edges lap by lap, as in the original construction
    for d in 1..=k / 2 {
        for i in 0..n {
            let j = (i + d) % n;
            if !adj[i].contains(&j) || !rng.random_bool(p) {
                continue;
            }
            if adj[i].len() >= n - 1 {
                continue;
            }
            let target = loop {
                let t = rng.random_range(0..n);
                if t != i && !adj[i].contains(&t) {
                    break t;
                }
            };
            adj[i].remove(&j);
            adj[j].remove(&i);
            adj[i].insert(target);
            adj[target].insert(i);
        }
    }
    let edges = (0..n)
        .flat_map(|a| adj[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect();
    Ok(WsGraph { n, edges })
}

/// Ratios outside `[0, 1]` are clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecorationParams {
    pub user_ratio: f64,
    pub strong_ratio: f64,
    pub reciprocity: f64,
    pub seed: u64,
}

impl Default for DecorationParams {
    fn default() -> Self {
        DecorationParams {
            user_ratio: 0.68,
            strong_ratio: 0.5,
            reciprocity: 1.0,
            seed: 0,
        }
    }
}

fn unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Zero-padded ids (`v000`, `v001`, ...) so lexicographic and numeric order agree.
pub fn node_id(i: usize, n: usize) -> NodeId {
    let width = n.saturating_sub(1).to_string().len().max(3);
    NodeId(format!("v{i:0width$}"))
}

/// Exactly `round(user_ratio * n)` Users chosen uniformly; each edge yields
/// the arc from its smaller endpoint and, with probability `reciprocity`,
/// the reverse arc; each arc is independently Strong with probability
/// `strong_ratio`.
pub fn decorate(g: &WsGraph, dp: &DecorationParams) -> SocialNetwork {
    let n = g.n;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(dp.seed, 0xdec0));
    let users = ((unit(dp.user_ratio) * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut behavior = vec![Behavior::NonUser; n];
    for &i in &order[..users] {
        behavior[i] = Behavior::User;
    }
    let nodes = (0..n)
        .map(|i| Node {
            id: node_id(i, n),
            behavior: behavior[i],
        })
        .collect();
    let (strong, recip) = (unit(dp.strong_ratio), unit(dp.reciprocity));
    let strength = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(strong) {
            TieStrength::Strong
        } else {
            TieStrength::Weak
        }
    };
    let mut ties = Vec::with_capacity(2 * g.edges.len());
    for &(a, b) in &g.edges {
        let s = strength(&mut rng);
        ties.push(Tie {
            from: node_id(a, n),
            to: node_id(b, n),
            strength: s,
        });
        if rng.random_bool(recip) {
            let s = strength(&mut rng);
            ties.push(Tie {
                from: node_id(b, n),
                to: node_id(a, n),
                strength: s,
            });
        }
    }
    SocialNetwork::new(nodes, ties)
}

/// Convenience: WS skeleton with default shape plus default decoration,
/// both driven by one seed.
pub fn ws_instance(n: usize, seed: u64) -> Result<SocialNetwork, InstanceError> {
    let g = generate_ws(&WsParams::new(n, seed))?;
    Ok(decorate(&g, &DecorationParams { seed, ..DecorationParams::default() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_network;

    #[test]
    fn lattice_without_rewiring() {
        let g = generate_ws(&WsParams { n: 30, k: 4, p: 0.0, seed: 1 }).unwrap();
        assert_eq!(g.edges.len(), 60);
        assert!(g.degrees().iter().all(|&d| d == 4));
        assert!(g.edges.contains(&(0, 1)) && g.edges.contains(&(0, 2)) && g.edges.contains(&(0, 29)));
    }

    #[test]
    fn full_rewiring_keeps_a_simple_graph() {
        for seed in 0..100 {
            let g = generate_ws(&WsParams { n: 30, k: 4, p: 1.0, seed }).unwrap();
            assert_eq!(g.edges.len(), 60);
            let set: BTreeSet<_> = g.edges.iter().copied().collect();
            assert_eq!(set.len(), 60);
            assert!(g.edges.iter().all(|&(a, b)| a < b && b < 30));
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(
            generate_ws(&WsParams { n: 4, k: 4, p: 0.1, seed: 0 }),
            Err(InstanceError::BadDegree { .. })
        ));
        assert!(generate_ws(&WsParams { n: 10, k: 3, p: 0.1, seed: 0 }).is_err());
        assert!(generate_ws(&WsParams { n: 10, k: 2, p: 1.5, seed: 0 }).is_err());
    }

    #[test]
    fn decoration_counts() {
        let g = generate_ws(&WsParams::new(30, 3)).unwrap();
        let net = decorate(&g, &DecorationParams::default());
        assert_eq!(net.user_count(), 20);
        assert_eq!(net.ties.len(), 2 * g.edges.len());
        assert!(validate_network(&net).is_empty());

        let none = decorate(&g, &DecorationParams { user_ratio: 0.0, reciprocity: 0.0, ..DecorationParams::default() });
        assert_eq!(none.user_count(), 0);
        assert_eq!(none.ties.len(), g.edges.len());
    }

    #[test]
    fn ids_sort_numerically() {
        assert_eq!(node_id(7, 30).0, "v007");
        assert_eq!(node_id(1234, 5000).0, "v1234");
        assert!(node_id(9, 30) < node_id(10, 30));
    }

    #[test]
    fn same_seed_same_instance() {
        assert_eq!(ws_instance(25, 4).unwrap(), ws_instance(25, 4).unwrap());
        assert_ne!(ws_instance(25, 4).unwrap(), ws_instance(25, 5).unwrap());
    }
}
