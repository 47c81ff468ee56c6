//! Practitioner-imposed constraints on a solve: pinned assignments,
//! must-link and cannot-link pairs, and frozen groups.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SolveError;
use crate::model::{CapacityBounds, Instance, NodeId};

/// Unordered node pair; stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(NodeId, NodeId)", into = "(NodeId, NodeId)")]
pub struct NodePair(NodeId, NodeId);

impl NodePair {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            NodePair(a, b)
        } else {
            NodePair(b, a)
        }
    }

    pub fn first(&self) -> &NodeId {
        &self.0
    }

    pub fn second(&self) -> &NodeId {
        &self.1
    }
}

impl From<(NodeId, NodeId)> for NodePair {
    fn from((a, b): (NodeId, NodeId)) -> Self {
        NodePair::new(a, b)
    }
}

impl From<NodePair> for (NodeId, NodeId) {
    fn from(p: NodePair) -> Self {
        (p.0, p.1)
    }
}

/// A frozen group's membership is exactly the set of nodes pinned to it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConstraints {
    pub pinned: BTreeMap<NodeId, usize>,
    pub must_link: BTreeSet<NodePair>,
    pub cannot_link: BTreeSet<NodePair>,
    pub frozen_groups: BTreeSet<usize>,
}

impl SolveConstraints {
    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
            && self.must_link.is_empty()
            && self.cannot_link.is_empty()
            && self.frozen_groups.is_empty()
    }

    pub fn pin(mut self, id: impl Into<NodeId>, group: usize) -> Self {
        self.pinned.insert(id.into(), group);
        self
    }

    pub fn must(mut self, a: impl Into<NodeId>, b: impl Into<NodeId>) -> Self {
        self.must_link.insert(NodePair::new(a, b));
        self
    }

    pub fn cannot(mut self, a: impl Into<NodeId>, b: impl Into<NodeId>) -> Self {
        self.cannot_link.insert(NodePair::new(a, b));
        self
    }

    pub fn freeze(mut self, group: usize) -> Self {
        self.frozen_groups.insert(group);
        self
    }

    /// Drops references to a node that left the roster.
    pub fn without_node(&self, id: &NodeId) -> SolveConstraints {
        let keep = |p: &&NodePair| p.first() != id && p.second() != id;
        SolveConstraints {
            pinned: self
                .pinned
                .iter()
                .filter(|(k, _)| *k != id)
                .map(|(k, &g)| (k.clone(), g))
                .collect(),
            must_link: self.must_link.iter().filter(keep).cloned().collect(),
            cannot_link: self.cannot_link.iter().filter(keep).cloned().collect(),
            frozen_groups: self.frozen_groups.clone(),
        }
    }

    pub(crate) fn compile(&self, inst: &Instance, bounds: CapacityBounds) -> Result<Rules, SolveError> {
        let n = inst.len();
        let idx = |id: &NodeId| {
            inst.index_of(id)
                .ok_or_else(|| SolveError::UnsatisfiableConstraints(format!("unknown node {id}")))
        };
        if let Some(p) = self.must_link.intersection(&self.cannot_link).next() {
            return Err(SolveError::UnsatisfiableConstraints(format!(
                "{} and {} are both must-link and cannot-link",
                p.first(),
                p.second()
            )));
        }

        let mut pin = vec![None; n];
        for (id, &g) in &self.pinned {
            pin[idx(id)?] = Some(g);
        }

        let mut dsu = Dsu::new(n);
        for p in &self.must_link {
            dsu.union(idx(p.first())?, idx(p.second())?);
        }
        // nodes pinned to the same group are implicitly linked
        let mut first_pinned: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, g) in pin.iter().enumerate() {
            if let Some(g) = *g {
                match first_pinned.get(&g) {
                    Some(&k) => dsu.union(k, i),
                    None => {
                        first_pinned.insert(g, i);
                    }
                }
            }
        }

        let mut unit_of = vec![usize::MAX; n];
        let mut units: Vec<Vec<usize>> = Vec::new();
        let mut root_unit: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..n {
            let r = dsu.find(i);
            let u = *root_unit.entry(r).or_insert_with(|| {
                units.push(Vec::new());
                units.len() - 1
            });
            unit_of[i] = u;
            units[u].push(i);
        }

        let mut unit_pin = vec![None; units.len()];
        for (u, members) in units.iter().enumerate() {
            for &i in members {
                if let Some(g) = pin[i] {
                    match unit_pin[u] {
                        Some(h) if h != g => {
                            return Err(SolveError::UnsatisfiableConstraints(format!(
                                "linked nodes are pinned to groups {h} and {g}"
                            )))
                        }
                        _ => unit_pin[u] = Some(g),
                    }
                }
            }
            if members.len() > bounds.hi() {
                return Err(SolveError::UnsatisfiableConstraints(format!(
                    "{} linked nodes exceed the group capacity {}",
                    members.len(),
                    bounds.hi()
                )));
            }
        }

        let mut cannot = vec![Vec::new(); n];
        for p in &self.cannot_link {
            let (a, b) = (idx(p.first())?, idx(p.second())?);
            if unit_of[a] == unit_of[b] {
                return Err(SolveError::UnsatisfiableConstraints(format!(
                    "{} and {} cannot be separated and cannot share a group",
                    p.first(),
                    p.second()
                )));
            }
            cannot[a].push(b);
            cannot[b].push(a);
        }

        let mut frozen_size = BTreeMap::new();
        for &g in &self.frozen_groups {
            let size: usize = units
                .iter()
                .zip(&unit_pin)
                .filter(|(_, p)| **p == Some(g))
                .map(|(m, _)| m.len())
                .sum();
            if !bounds.contains(size) {
                return Err(SolveError::UnsatisfiableConstraints(format!(
                    "frozen group {g} would hold {size} members"
                )));
            }
            frozen_size.insert(g, size);
        }

        Ok(Rules {
            pin,
            unit_of,
            units,
            unit_pin,
            cannot,
            frozen: self.frozen_groups.clone(),
            max_label: self
                .pinned
                .values()
                .chain(self.frozen_groups.iter())
                .copied()
                .max(),
        })
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Constraints resolved to dense indices. Must-link pairs and shared pins
/// are merged into units that always travel together.
#[derive(Debug, Clone)]
pub(crate) struct Rules {
    pub pin: Vec<Option<usize>>,
    pub unit_of: Vec<usize>,
    pub units: Vec<Vec<usize>>,
    pub unit_pin: Vec<Option<usize>>,
    pub cannot: Vec<Vec<usize>>,
    pub frozen: BTreeSet<usize>,
    /// Largest group index referenced by a pin or freeze.
    pub max_label: Option<usize>,
}

impl Rules {
    pub(crate) fn supports_group_count(&self, s: usize) -> bool {
        self.max_label.is_none_or(|m| m < s)
    }

    /// Node can change group on its own (no pin, not linked to others).
    pub(crate) fn is_free(&self, i: usize) -> bool {
        self.pin[i].is_none() && self.units[self.unit_of[i]].len() == 1
    }

    pub(crate) fn satisfied(&self, groups: &[usize]) -> bool {
        for (i, &g) in groups.iter().enumerate() {
            if self.pin[i].is_some_and(|p| p != g) {
                return false;
            }
            if self.units[self.unit_of[i]].iter().any(|&k| groups[k] != g) {
                return false;
            }
            if self.cannot[i].iter().any(|&k| groups[k] == g) {
                return false;
            }
            if self.frozen.contains(&g) && self.pin[i] != Some(g) {
                return false;
            }
        }
        true
    }

    /// Random assignment into exactly `s` groups honoring every rule, or
    /// `None` if repeated randomized attempts fail.
    pub(crate) fn random_assignment<R: Rng>(
        &self,
        s: usize,
        bounds: CapacityBounds,
        rng: &mut R,
    ) -> Option<Vec<usize>> {
        if s == 0 || !self.supports_group_count(s) {
            return None;
        }
        let n = self.pin.len();
        const ATTEMPTS: usize = 64;
        'attempt: for _ in 0..ATTEMPTS {
            let mut groups = vec![usize::MAX; n];
            let mut sizes = vec![0usize; s];

            let mut pinned_size = vec![0usize; s];
            for (u, members) in self.units.iter().enumerate() {
                if let Some(g) = self.unit_pin[u] {
                    pinned_size[g] += members.len();
                }
            }
            let target_init: Vec<usize> = (0..s)
                .map(|g| {
                    if self.frozen.contains(&g) {
                        pinned_size[g]
                    } else {
                        pinned_size[g].max(bounds.lo())
                    }
                })
                .collect();
            if target_init.iter().any(|&t| t > bounds.hi()) {
                return None;
            }
            let mut target = target_init;
            let fixed: usize = target.iter().sum();
            if fixed > n {
                return None;
            }
            let mut open: Vec<usize> = (0..s).filter(|g| !self.frozen.contains(g)).collect();
            for _ in 0..(n - fixed) {
                open.retain(|&g| target[g] < bounds.hi());
                if open.is_empty() {
                    return None;
                }
                let g = open[rng.random_range(0..open.len())];
                target[g] += 1;
            }

            for (u, members) in self.units.iter().enumerate() {
                if let Some(g) = self.unit_pin[u] {
                    for &i in members {
                        groups[i] = g;
                    }
                    sizes[g] += members.len();
                }
            }

            let mut free: Vec<usize> = (0..self.units.len())
                .filter(|&u| self.unit_pin[u].is_none())
                .collect();
            free.shuffle(rng);
            free.sort_by_key(|&u| std::cmp::Reverse(self.units[u].len()));

            for u in free {
                let members = &self.units[u];
                let fits = |g: usize, cap: usize, groups: &[usize], sizes: &[usize]| {
                    !self.frozen.contains(&g)
                        && sizes[g] + members.len() <= cap
                        && members
                            .iter()
                            .all(|&i| self.cannot[i].iter().all(|&k| groups[k] != g))
                };
                let mut eligible: Vec<usize> =
                    (0..s).filter(|&g| fits(g, target[g], &groups, &sizes)).collect();
                if eligible.is_empty() {
                    eligible = (0..s).filter(|&g| fits(g, bounds.hi(), &groups, &sizes)).collect();
                }
                if eligible.is_empty() {
                    continue 'attempt;
                }
                let g = eligible[rng.random_range(0..eligible.len())];
                for &i in members {
                    groups[i] = g;
                }
                sizes[g] += members.len();
            }
            if sizes.iter().all(|&z| bounds.contains(z)) {
                debug_assert!(self.satisfied(&groups));
                return Some(groups);
            }
        }
        None
    }
}
