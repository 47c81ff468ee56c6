//! Domain types shared by every stage of the pipeline: the behavior-labeled
//! social network, capacity bounds, partitions and model parameters.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::PreTie;

/// Opaque, stable participant identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    User,
    NonUser,
}

impl Behavior {
    /// The 0/1 encoding used by the algebraic tie and objective formulas.
    pub fn indicator(self) -> u8 {
        match self {
            Behavior::User => 1,
            Behavior::NonUser => 0,
        }
    }

    pub fn is_user(self) -> bool {
        self == Behavior::User
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieStrength {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub behavior: Behavior,
}

/// Directed tie: influence flows from `from` to `to` (`to` nominated `from`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tie {
    pub from: NodeId,
    pub to: NodeId,
    pub strength: TieStrength,
}

/// Pre-intervention network. Construction never fails; use
/// [`validate_network`] to list invariant violations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SocialNetwork {
    pub nodes: Vec<Node>,
    pub ties: Vec<Tie>,
}

impl SocialNetwork {
    pub fn new(nodes: Vec<Node>, ties: Vec<Tie>) -> Self {
        SocialNetwork { nodes, ties }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.behavior.is_user()).count()
    }

    pub fn nonuser_count(&self) -> usize {
        self.nodes.len() - self.user_count()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    /// Copy of the network without `id` and every tie touching it.
    pub fn without_node(&self, id: &NodeId) -> SocialNetwork {
        SocialNetwork {
            nodes: self.nodes.iter().filter(|n| &n.id != id).cloned().collect(),
            ties: self
                .ties
                .iter()
                .filter(|t| &t.from != id && &t.to != id)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkViolation {
    SelfArc { node: NodeId },
    DuplicateArc { from: NodeId, to: NodeId },
    DanglingEndpoint { from: NodeId, to: NodeId, missing: NodeId },
    DuplicateNode { node: NodeId },
}

impl fmt::Display for NetworkViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkViolation::SelfArc { node } => write!(f, "self-tie on {node}"),
            NetworkViolation::DuplicateArc { from, to } => write!(f, "duplicate tie {from} -> {to}"),
            NetworkViolation::DanglingEndpoint { from, to, missing } => {
                write!(f, "tie {from} -> {to} references unknown node {missing}")
            }
            NetworkViolation::DuplicateNode { node } => write!(f, "node {node} declared twice"),
        }
    }
}

/// Lists every invariant violation of `net`; an empty list means well-formed.
pub fn validate_network(net: &SocialNetwork) -> Vec<NetworkViolation> {
    let mut out = Vec::new();
    let mut ids = HashSet::with_capacity(net.nodes.len());
    for n in &net.nodes {
        if !ids.insert(&n.id) {
            out.push(NetworkViolation::DuplicateNode { node: n.id.clone() });
        }
    }
    let mut arcs = HashSet::with_capacity(net.ties.len());
    for t in &net.ties {
        if t.from == t.to {
            out.push(NetworkViolation::SelfArc { node: t.from.clone() });
            continue;
        }
        for end in [&t.from, &t.to] {
            if !ids.contains(end) {
                out.push(NetworkViolation::DanglingEndpoint {
                    from: t.from.clone(),
                    to: t.to.clone(),
                    missing: end.clone(),
                });
            }
        }
        if !arcs.insert((&t.from, &t.to)) {
            out.push(NetworkViolation::DuplicateArc {
                from: t.from.clone(),
                to: t.to.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds")]
pub struct CapacityBounds {
    lo: usize,
    hi: usize,
}

#[derive(Deserialize)]
struct RawBounds {
    lo: usize,
    hi: usize,
}

impl TryFrom<RawBounds> for CapacityBounds {
    type Error = ModelError;

    fn try_from(raw: RawBounds) -> Result<Self, Self::Error> {
        CapacityBounds::new(raw.lo, raw.hi)
    }
}

impl CapacityBounds {
    pub fn new(lo: usize, hi: usize) -> Result<Self, ModelError> {
        if lo == 0 || lo > hi {
            return Err(ModelError::BadBounds { lo, hi });
        }
        Ok(CapacityBounds { lo, hi })
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn contains(&self, size: usize) -> bool {
        (self.lo..=self.hi).contains(&size)
    }
}

impl Default for CapacityBounds {
    fn default() -> Self {
        CapacityBounds { lo: 3, hi: 8 }
    }
}

/// Every group count `S` for which `n` nodes can be split into `S` groups
/// whose sizes all lie within `bounds`. Empty when the instance is infeasible.
pub fn feasible_group_counts(n: usize, bounds: CapacityBounds) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let min_s = n.div_ceil(bounds.hi);
    let max_s = n / bounds.lo;
    (min_s.max(1)..=max_s).collect()
}

/// Assignment of every node to a 0-based group index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: BTreeMap<NodeId, usize>,
}

impl Partition {
    pub fn from_assignment(assignment: BTreeMap<NodeId, usize>) -> Self {
        Partition { assignment }
    }

    /// Builds a partition where group `g` holds `groups[g]`.
    pub fn from_groups<I, N>(groups: I) -> Self
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = N>,
        N: Into<NodeId>,
    {
        let mut assignment = BTreeMap::new();
        for (g, members) in groups.into_iter().enumerate() {
            for m in members {
                assignment.insert(m.into(), g);
            }
        }
        Partition { assignment }
    }

    pub fn group_of(&self, id: &NodeId) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn same_group(&self, a: &NodeId, b: &NodeId) -> bool {
        match (self.group_of(a), self.group_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// Number of group indices in use, i.e. `max index + 1`.
    pub fn group_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }

    /// Members per group index, each list sorted by node id.
    pub fn groups(&self) -> Vec<Vec<NodeId>> {
        let mut groups = vec![Vec::new(); self.group_count()];
        for (id, &g) in &self.assignment {
            groups[g].push(id.clone());
        }
        groups
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.group_count()];
        for &g in self.assignment.values() {
            sizes[g] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionViolation {
    NodeUnassigned { node: NodeId },
    UnknownNode { node: NodeId },
    EmptyGroup { group: usize },
    GroupTooSmall { group: usize, size: usize },
    GroupTooLarge { group: usize, size: usize },
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionViolation::NodeUnassigned { node } => write!(f, "node {node} is not assigned"),
            PartitionViolation::UnknownNode { node } => {
                write!(f, "partition assigns unknown node {node}")
            }
            PartitionViolation::EmptyGroup { group } => write!(f, "group {group} is empty"),
            PartitionViolation::GroupTooSmall { group, size } => {
                write!(f, "group {group} has {size} members, below the lower bound")
            }
            PartitionViolation::GroupTooLarge { group, size } => {
                write!(f, "group {group} has {size} members, above the upper bound")
            }
        }
    }
}

pub fn validate_partition(
    net: &SocialNetwork,
    p: &Partition,
    bounds: CapacityBounds,
) -> Vec<PartitionViolation> {
    let mut out = Vec::new();
    let declared: HashSet<&NodeId> = net.nodes.iter().map(|n| &n.id).collect();
    for n in &net.nodes {
        if !p.assignment.contains_key(&n.id) {
            out.push(PartitionViolation::NodeUnassigned { node: n.id.clone() });
        }
    }
    for id in p.assignment.keys() {
        if !declared.contains(id) {
            out.push(PartitionViolation::UnknownNode { node: id.clone() });
        }
    }
    for (group, size) in p.group_sizes().into_iter().enumerate() {
        if size == 0 {
            out.push(PartitionViolation::EmptyGroup { group });
        } else if size < bounds.lo() {
            out.push(PartitionViolation::GroupTooSmall { group, size });
        } else if size > bounds.hi() {
            out.push(PartitionViolation::GroupTooLarge { group, size });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Chance that a non-user whose threshold is exceeded becomes a user.
    pub omega_user_given_non: f64,
    /// Chance that a user whose threshold is exceeded becomes a non-user.
    pub omega_non_given_user: f64,
    pub weight_strong: f64,
    pub weight_weak: f64,
    pub capacity: CapacityBounds,
    pub include_facilitator: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            omega_user_given_non: 1.0,
            omega_non_given_user: 0.8,
            weight_strong: 3.0,
            weight_weak: 1.0,
            capacity: CapacityBounds::default(),
            include_facilitator: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("omega_user_given_non", self.omega_user_given_non),
            ("omega_non_given_user", self.omega_non_given_user),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::BadProbability { name, value: v });
            }
        }
        if !(self.weight_weak > 0.0 && self.weight_weak < self.weight_strong)
            || !self.weight_strong.is_finite()
        {
            return Err(ModelError::BadWeights {
                strong: self.weight_strong,
                weak: self.weight_weak,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("capacity bounds must satisfy 1 <= lo <= hi (got lo={lo}, hi={hi})")]
    BadBounds { lo: usize, hi: usize },
    #[error("{name} must lie in [0, 1] (got {value})")]
    BadProbability { name: &'static str, value: f64 },
    #[error("tie weights must satisfy 0 < weak < strong (got strong={strong}, weak={weak})")]
    BadWeights { strong: f64, weak: f64 },
    #[error("malformed network: {}", join(.0))]
    InvalidNetwork(Vec<NetworkViolation>),
    #[error("invalid partition: {}", join(.0))]
    InvalidPartition(Vec<PartitionViolation>),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Dense, index-based view of a validated network used by the solvers.
#[derive(Debug, Clone)]
pub struct Instance {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    behaviors: Vec<Behavior>,
    pre: Vec<PreTie>,
}

impl Instance {
    pub fn new(net: &SocialNetwork) -> Result<Self, ModelError> {
        let violations = validate_network(net);
        if !violations.is_empty() {
            return Err(ModelError::InvalidNetwork(violations));
        }
        let n = net.nodes.len();
        let ids: Vec<NodeId> = net.nodes.iter().map(|x| x.id.clone()).collect();
        let index: HashMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let behaviors = net.nodes.iter().map(|x| x.behavior).collect();
        let mut pre = vec![PreTie::NoTie; n * n];
        for t in &net.ties {
            let (i, j) = (index[&t.from], index[&t.to]);
            pre[i * n + j] = PreTie::from(t.strength);
        }
        Ok(Instance {
            ids,
            index,
            behaviors,
            pre,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &NodeId {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn behavior(&self, i: usize) -> Behavior {
        self.behaviors[i]
    }

    pub fn behaviors(&self) -> &[Behavior] {
        &self.behaviors
    }

    /// Pre-intervention tie from `i` to `j`.
    pub fn pre_tie(&self, i: usize, j: usize) -> PreTie {
        self.pre[i * self.ids.len() + j]
    }

    pub fn user_count(&self) -> usize {
        self.behaviors.iter().filter(|b| b.is_user()).count()
    }

    /// Converts a partition into a dense group vector aligned with node order.
    pub fn dense_assignment(&self, p: &Partition, bounds: CapacityBounds) -> Result<Vec<usize>, ModelError> {
        let n = self.ids.len();
        let mut out = vec![usize::MAX; n];
        let mut violations = Vec::new();
        for (id, &g) in &p.assignment {
            match self.index.get(id) {
                Some(&i) => out[i] = g,
                None => violations.push(PartitionViolation::UnknownNode { node: id.clone() }),
            }
        }
        for (i, &g) in out.iter().enumerate() {
            if g == usize::MAX {
                violations.push(PartitionViolation::NodeUnassigned {
                    node: self.ids[i].clone(),
                });
            }
        }
        let mut sizes = vec![0usize; p.group_count()];
        for &g in p.assignment.values() {
            sizes[g] += 1;
        }
        for (group, size) in sizes.into_iter().enumerate() {
            if size == 0 {
                violations.push(PartitionViolation::EmptyGroup { group });
            } else if size < bounds.lo() {
                violations.push(PartitionViolation::GroupTooSmall { group, size });
            } else if size > bounds.hi() {
                violations.push(PartitionViolation::GroupTooLarge { group, size });
            }
        }
        if violations.is_empty() {
            Ok(out)
        } else {
            Err(ModelError::InvalidPartition(violations))
        }
    }

    pub fn partition_from_dense(&self, groups: &[usize]) -> Partition {
        Partition {
            assignment: self
                .ids
                .iter()
                .cloned()
                .zip(groups.iter().copied())
                .collect(),
        }
    }
}
