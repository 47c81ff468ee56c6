//! Group-formation strategies used in practice, for comparison. All three
//! use the smallest feasible group count and ignore solve constraints.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SolveError;
use crate::dynamics::raw_weight;
use crate::model::{feasible_group_counts, Behavior, Instance, ModelParams, Partition, SocialNetwork};

struct Setup {
    inst: Instance,
    groups: usize,
    order: Vec<usize>,
}

fn setup(net: &SocialNetwork, params: &ModelParams, seed: u64) -> Result<Setup, SolveError> {
    params.validate()?;
    let inst = Instance::new(net)?;
    let bounds = params.capacity;
    let Some(&groups) = feasible_group_counts(inst.len(), bounds).first() else {
        return Err(SolveError::InfeasibleBounds {
            n: inst.len(),
            lo: bounds.lo(),
            hi: bounds.hi(),
        });
    };
    let mut order: Vec<usize> = (0..inst.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Setup { inst, groups, order })
}

/// Shuffles the nodes and deals them into groups of near-equal size, the
/// larger groups first.
pub fn baseline_random(net: &SocialNetwork, params: &ModelParams, seed: u64) -> Result<Partition, SolveError> {
    let Setup { inst, groups: s, order } = setup(net, params, seed)?;
    let n = inst.len();
    let mut dense = vec![0usize; n];
    let mut pos = 0;
    for g in 0..s {
        let size = n / s + usize::from(g < n % s);
        for &i in &order[pos..pos + size] {
            dense[i] = g;
        }
        pos += size;
    }
    Ok(inst.partition_from_dense(&dense))
}

/// Greedy nomination clustering. Groups are filled one after another: each
/// starts from a random node that has a tie to another unassigned node and
/// then admits the unassigned node most strongly tied to its current
/// members until full. Undersized groups are topped up afterwards with the
/// least attached members of groups that can spare them.
pub fn baseline_network(net: &SocialNetwork, params: &ModelParams, seed: u64) -> Result<Partition, SolveError> {
    let Setup { inst, groups: s, order } = setup(net, params, seed)?;
    let n = inst.len();
    let (lo, hi) = (params.capacity.lo(), params.capacity.hi());
    let mut bond = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = raw_weight(inst.pre_tie(i, j).into(), params) + raw_weight(inst.pre_tie(j, i).into(), params);
                bond[i * n + j] = w;
            }
        }
    }
    let mut dense = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); s];
    for (g, group) in members.iter_mut().enumerate() {
        let unassigned = |i: &&usize| dense[**i] == usize::MAX;
        let seed_node = order
            .iter()
            .filter(unassigned)
            .find(|&&i| order.iter().any(|&k| k != i && dense[k] == usize::MAX && bond[i * n + k] > 0.0))
            .or_else(|| order.iter().find(unassigned))
            .copied();
        let Some(first) = seed_node else { break };
        dense[first] = g;
        group.push(first);
        while group.len() < hi {
            let mut best: Option<(usize, f64)> = None;
            for &i in order.iter().filter(|&&i| dense[i] == usize::MAX) {
                let a: f64 = group.iter().map(|&m| bond[i * n + m]).sum();
                if best.is_none_or(|(_, b)| a > b) {
                    best = Some((i, a));
                }
            }
            let Some((i, _)) = best else { break };
            dense[i] = g;
            group.push(i);
        }
    }
    while let Some(needy) = (0..s).find(|&g| members[g].len() < lo) {
        let attachment = |i: usize, ms: &[usize]| -> f64 { ms.iter().map(|&m| bond[i * n + m]).sum() };
        let mut pick: Option<(usize, usize, f64)> = None;
        for donor in (0..s).filter(|&g| members[g].len() > lo) {
            for &i in &members[donor] {
                let a = attachment(i, &members[donor]);
                if pick.is_none_or(|(_, _, b)| a < b) {
                    pick = Some((donor, i, a));
                }
            }
        }
        let (donor, i, _) = pick.expect("minimum feasible group count leaves a donor");
        members[donor].retain(|&m| m != i);
        members[needy].push(i);
        dense[i] = needy;
    }
    Ok(inst.partition_from_dense(&dense))
}

/// Deals Users round-robin in shuffled order, then places each NonUser in
/// the currently smallest group.
pub fn baseline_even_users(net: &SocialNetwork, params: &ModelParams, seed: u64) -> Result<Partition, SolveError> {
    let Setup { inst, groups: s, order } = setup(net, params, seed)?;
    let mut dense = vec![0usize; inst.len()];
    let mut sizes = vec![0usize; s];
    let users = order.iter().filter(|&&i| inst.behavior(i) == Behavior::User);
    for (k, &i) in users.enumerate() {
        dense[i] = k % s;
        sizes[k % s] += 1;
    }
    for &i in order.iter().filter(|&&i| inst.behavior(i) == Behavior::NonUser) {
        let g = (0..s).min_by_key(|&g| sizes[g]).unwrap_or(0);
        dense[i] = g;
        sizes[g] += 1;
    }
    Ok(inst.partition_from_dense(&dense))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_partition, CapacityBounds, Node, NodeId, Tie, TieStrength};

    fn nodes(n: usize, users: usize) -> Vec<Node> {
        (0..n)
            .map(|i| Node {
                id: NodeId(format!("v{i:02}")),
                behavior: if i < users { Behavior::User } else { Behavior::NonUser },
            })
            .collect()
    }

    fn tie(a: usize, b: usize) -> Tie {
        Tie {
            from: NodeId(format!("v{a:02}")),
            to: NodeId(format!("v{b:02}")),
            strength: TieStrength::Strong,
        }
    }

    fn bounds(lo: usize, hi: usize) -> ModelParams {
        ModelParams {
            capacity: CapacityBounds::new(lo, hi).unwrap(),
            ..ModelParams::default()
        }
    }

    fn sorted_sizes(p: &Partition) -> Vec<usize> {
        let mut s = p.group_sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    #[test]
    fn random_split_sizes() {
        let net = SocialNetwork::new(nodes(30, 20), vec![]);
        let p = baseline_random(&net, &ModelParams::default(), 1).unwrap();
        assert_eq!(p.group_sizes(), vec![8, 8, 7, 7]);
        let six = SocialNetwork::new(nodes(6, 2), vec![]);
        assert_eq!(sorted_sizes(&baseline_random(&six, &bounds(3, 3), 4).unwrap()), vec![3, 3]);
        assert_eq!(baseline_random(&net, &ModelParams::default(), 9), baseline_random(&net, &ModelParams::default(), 9));
    }

    #[test]
    fn network_baseline_recovers_cliques() {
        let mut ties = Vec::new();
        for block in [[0, 1, 2], [3, 4, 5]] {
            for a in block {
                for b in block {
                    if a != b {
                        ties.push(tie(a, b));
                    }
                }
            }
        }
        let net = SocialNetwork::new(nodes(6, 3), ties);
        for seed in 0..10 {
            let p = baseline_network(&net, &bounds(3, 3), seed).unwrap();
            let ids: Vec<NodeId> = (0..6).map(|i| NodeId(format!("v{i:02}"))).collect();
            assert!(p.same_group(&ids[0], &ids[1]) && p.same_group(&ids[1], &ids[2]));
            assert!(p.same_group(&ids[3], &ids[4]) && p.same_group(&ids[4], &ids[5]));
            assert!(!p.same_group(&ids[0], &ids[3]));
        }
    }

    #[test]
    fn star_hub_keeps_two_spokes() {
        // hub v00, spokes v01..v04, isolate v05
        let ties = (1..5).map(|s| tie(0, s)).collect();
        let net = SocialNetwork::new(nodes(6, 2), ties);
        for seed in 0..10 {
            let p = baseline_network(&net, &bounds(3, 3), seed).unwrap();
            let hub = p.group_of(&NodeId::from("v00")).unwrap();
            let spokes = (1..5)
                .filter(|&s| p.group_of(&NodeId(format!("v{s:02}"))) == Some(hub))
                .count();
            assert_eq!(spokes, 2);
        }
    }

    #[test]
    fn network_baseline_on_edgeless_graph_is_valid_and_seeded() {
        let net = SocialNetwork::new(nodes(17, 5), vec![]);
        let p = baseline_network(&net, &ModelParams::default(), 2).unwrap();
        assert!(validate_partition(&net, &p, ModelParams::default().capacity).is_empty());
        assert_eq!(p, baseline_network(&net, &ModelParams::default(), 2).unwrap());
    }

    #[test]
    fn even_users() {
        let count_users = |net: &SocialNetwork, p: &Partition| {
            let mut c = vec![0; p.group_count()];
            for node in &net.nodes {
                if node.behavior == Behavior::User {
                    c[p.group_of(&node.id).unwrap()] += 1;
                }
            }
            c.sort_unstable_by(|a, b| b.cmp(a));
            c
        };
        let net = SocialNetwork::new(nodes(16, 8), vec![]);
        let p = baseline_even_users(&net, &bounds(4, 4), 3).unwrap();
        assert_eq!(count_users(&net, &p), vec![2, 2, 2, 2]);

        let net = SocialNetwork::new(nodes(16, 5), vec![]);
        let p = baseline_even_users(&net, &bounds(4, 4), 3).unwrap();
        assert_eq!(count_users(&net, &p), vec![2, 1, 1, 1]);
        assert_eq!(p.group_sizes(), vec![4, 4, 4, 4]);

        let net = SocialNetwork::new(nodes(10, 0), vec![]);
        let p = baseline_even_users(&net, &bounds(3, 4), 3).unwrap();
        assert_eq!(sorted_sizes(&p), vec![4, 3, 3]);
    }

    #[test]
    fn infeasible_bounds() {
        let net = SocialNetwork::new(nodes(2, 1), vec![]);
        assert!(matches!(
            baseline_even_users(&net, &bounds(3, 4), 0),
            Err(SolveError::InfeasibleBounds { .. })
        ));
    }
}
