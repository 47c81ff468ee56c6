//! Post-intervention rewiring of the network and normalization of
//! influence weights.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{
    validate_network, validate_partition, Behavior, ModelError, ModelParams, NodeId, Partition,
    SocialNetwork, TieStrength,
};

/// Tie from one participant to another before the intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreTie {
    NoTie,
    Weak,
    Strong,
}

impl From<TieStrength> for PreTie {
    fn from(s: TieStrength) -> Self {
        match s {
            TieStrength::Strong => PreTie::Strong,
            TieStrength::Weak => PreTie::Weak,
        }
    }
}

/// Tie after the intervention; the one-hot of (none, weak, strong).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostTie {
    None,
    Weak,
    Strong,
}

impl From<PreTie> for PostTie {
    /// The same tie carried over unchanged.
    fn from(t: PreTie) -> Self {
        match t {
            PreTie::NoTie => PostTie::None,
            PreTie::Weak => PostTie::Weak,
            PreTie::Strong => PostTie::Strong,
        }
    }
}

/// How the tie from a node with behavior `from` to one with behavior `to`
/// evolves given its prior state and whether both share a group.
///
/// Same group: equal behaviors always end strong; mixed pairs end weak
/// unless already strong. Separate groups: only a strong tie between equal
/// behaviors stays strong, a strong mixed tie decays to weak, a weak tie
/// survives (as weak) only between two non-users, and no tie is created.
pub fn tie_transition(from: Behavior, to: Behavior, pre: PreTie, same_group: bool) -> PostTie {
    let alike = from == to;
    match (same_group, alike, pre) {
        (true, true, _) => PostTie::Strong,
        (true, false, PreTie::Strong) => PostTie::Strong,
        (true, false, _) => PostTie::Weak,
        (false, _, PreTie::NoTie) => PostTie::None,
        (false, true, PreTie::Strong) => PostTie::Strong,
        (false, false, PreTie::Strong) => PostTie::Weak,
        (false, true, PreTie::Weak) if from == Behavior::NonUser => PostTie::Weak,
        (false, _, PreTie::Weak) => PostTie::None,
    }
}

pub fn raw_weight(t: PostTie, params: &ModelParams) -> f64 {
    match t {
        PostTie::Strong => params.weight_strong,
        PostTie::Weak => params.weight_weak,
        PostTie::None => 0.0,
    }
}

/// Tie a group's facilitator forms towards a member of that group.
pub fn facilitator_tie(member: Behavior) -> PostTie {
    match member {
        Behavior::User => PostTie::Weak,
        Behavior::NonUser => PostTie::Strong,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNode {
    pub id: NodeId,
    pub behavior: Behavior,
    pub is_facilitator: bool,
}

/// Rewired network with per-target normalized incoming weights.
///
/// Original participants occupy indices `0..original_count()` in network
/// order; facilitators (if any) follow, one per group.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    nodes: Vec<WeightedNode>,
    original: usize,
    /// `incoming[j]` lists `(source index, weight)` sorted by source.
    incoming: Vec<Vec<(usize, f64)>>,
    index: HashMap<NodeId, usize>,
}

impl WeightedNetwork {
    /// Builds a network from explicit normalized weights; used by tests
    /// and tools that construct weight tables directly.
    pub fn from_parts(nodes: Vec<WeightedNode>, incoming: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(nodes.len(), incoming.len(), "one incoming list per node");
        let original = nodes.iter().filter(|n| !n.is_facilitator).count();
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        WeightedNetwork {
            nodes,
            original,
            incoming,
            index,
        }
    }

    pub fn nodes(&self) -> &[WeightedNode] {
        &self.nodes
    }

    pub fn original_count(&self) -> usize {
        self.original
    }

    pub fn incoming(&self, j: usize) -> &[(usize, f64)] {
        &self.incoming[j]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Normalized weight of the tie `from -> to`; zero when absent.
    pub fn weight(&self, from: &NodeId, to: &NodeId) -> f64 {
        let (Some(i), Some(j)) = (self.index_of(from), self.index_of(to)) else {
            return 0.0;
        };
        self.incoming[j]
            .binary_search_by_key(&i, |&(s, _)| s)
            .map_or(0.0, |k| self.incoming[j][k].1)
    }

    pub fn incoming_sum(&self, j: usize) -> f64 {
        self.incoming[j].iter().map(|&(_, w)| w).sum()
    }

    /// Sum of incoming weight from sources whose behavior differs from `j`'s.
    pub fn opposite_sum(&self, j: usize) -> f64 {
        let b = self.nodes[j].behavior;
        self.incoming[j]
            .iter()
            .filter(|&&(i, _)| self.nodes[i].behavior != b)
            .map(|&(_, w)| w)
            .sum()
    }

    pub fn arc_count(&self) -> usize {
        self.incoming.iter().map(Vec::len).sum()
    }
}

/// Rewires `net` according to `p` and normalizes incoming weights.
pub fn apply_intervention(
    net: &SocialNetwork,
    p: &Partition,
    params: &ModelParams,
) -> Result<WeightedNetwork, ModelError> {
    let nv = validate_network(net);
    if !nv.is_empty() {
        return Err(ModelError::InvalidNetwork(nv));
    }
    let pv = validate_partition(net, p, params.capacity);
    if !pv.is_empty() {
        return Err(ModelError::InvalidPartition(pv));
    }

    let n = net.nodes.len();
    let index: HashMap<&NodeId, usize> =
        net.nodes.iter().enumerate().map(|(i, x)| (&x.id, i)).collect();
    let group: Vec<usize> = net.nodes.iter().map(|x| p.assignment[&x.id]).collect();
    let behavior: Vec<Behavior> = net.nodes.iter().map(|x| x.behavior).collect();
    let group_count = p.group_count();
    let mut members = vec![Vec::new(); group_count];
    for (i, &g) in group.iter().enumerate() {
        members[g].push(i);
    }

    let mut pre: HashMap<(usize, usize), PreTie> = HashMap::with_capacity(net.ties.len());
    for t in &net.ties {
        pre.insert((index[&t.from], index[&t.to]), t.strength.into());
    }

    let mut nodes: Vec<WeightedNode> = net
        .nodes
        .iter()
        .map(|x| WeightedNode {
            id: x.id.clone(),
            behavior: x.behavior,
            is_facilitator: false,
        })
        .collect();
    let mut raw: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    // dense inside each group
    for group_members in &members {
        for &j in group_members {
            for &i in group_members {
                if i == j {
                    continue;
                }
                let prior = pre.get(&(i, j)).copied().unwrap_or(PreTie::NoTie);
                let post = tie_transition(behavior[i], behavior[j], prior, true);
                raw[j].push((i, raw_weight(post, params)));
            }
        }
    }
    // sparse across groups: only surviving prior ties matter
    for (&(i, j), &prior) in &pre {
        if group[i] != group[j] {
            let w = raw_weight(tie_transition(behavior[i], behavior[j], prior, false), params);
            if w > 0.0 {
                raw[j].push((i, w));
            }
        }
    }

    if params.include_facilitator {
        for (g, group_members) in members.iter().enumerate() {
            let f = nodes.len();
            nodes.push(WeightedNode {
                id: NodeId(format!("facilitator:{g}")),
                behavior: Behavior::NonUser,
                is_facilitator: true,
            });
            raw.push(Vec::new());
            for &j in group_members {
                raw[j].push((f, raw_weight(facilitator_tie(behavior[j]), params)));
            }
        }
    }

    let incoming = raw
        .into_iter()
        .map(|mut list| {
            list.retain(|&(_, w)| w > 0.0);
            list.sort_by_key(|&(i, _)| i);
            let total: f64 = list.iter().map(|&(_, w)| w).sum();
            if total > 0.0 {
                for entry in &mut list {
                    entry.1 /= total;
                }
            }
            list
        })
        .collect();

    Ok(WeightedNetwork::from_parts(nodes, incoming))
}
