//! Dense objective evaluation over group vectors.
//!
//! Equivalent to running rewiring and the closed form, but works on raw
//! weights (`opposite / total`) so a target's term can be recomputed from
//! its group alone.

use crate::dynamics::{facilitator_tie, raw_weight, tie_transition};
use crate::model::{Instance, ModelParams};

/// Objective differences at or below this are treated as ties.
pub(crate) const EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Scorer {
    n: usize,
    user: Vec<bool>,
    /// Raw weight `i -> j` when both share a group, at `i * n + j`.
    same: Vec<f64>,
    /// Raw weight `i -> j` across groups.
    sep: Vec<f64>,
    facilitator: Vec<f64>,
    omega_un: f64,
    omega_nu: f64,
}

impl Scorer {
    pub(crate) fn new(inst: &Instance, params: &ModelParams) -> Self {
        let n = inst.len();
        let mut same = vec![0.0; n * n];
        let mut sep = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (bi, bj, pre) = (inst.behavior(i), inst.behavior(j), inst.pre_tie(i, j));
                same[i * n + j] = raw_weight(tie_transition(bi, bj, pre, true), params);
                sep[i * n + j] = raw_weight(tie_transition(bi, bj, pre, false), params);
            }
        }
        let facilitator = (0..n)
            .map(|j| {
                if params.include_facilitator {
                    raw_weight(facilitator_tie(inst.behavior(j)), params)
                } else {
                    0.0
                }
            })
            .collect();
        Scorer {
            n,
            user: inst.behaviors().iter().map(|b| b.is_user()).collect(),
            same,
            sep,
            facilitator,
            omega_un: params.omega_user_given_non,
            omega_nu: params.omega_non_given_user,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    pub(crate) fn is_user(&self, j: usize) -> bool {
        self.user[j]
    }

    pub(crate) fn same(&self, i: usize, j: usize) -> f64 {
        self.same[i * self.n + j]
    }

    pub(crate) fn sep(&self, i: usize, j: usize) -> f64 {
        self.sep[i * self.n + j]
    }

    /// Facilitator raw weight into `j`, and whether it counts as opposite.
    pub(crate) fn facilitator(&self, j: usize) -> (f64, bool) {
        (self.facilitator[j], self.user[j])
    }

    /// Expected non-user contribution of target `j` given its raw incoming
    /// total and the part coming from opposite-behavior sources.
    #[inline]
    pub(crate) fn term(&self, j: usize, total: f64, opposite: f64) -> f64 {
        let p = if total > 0.0 { (opposite / total).clamp(0.0, 1.0) } else { 0.0 };
        if self.user[j] {
            self.omega_nu * p
        } else {
            1.0 - self.omega_un * p
        }
    }

    pub(crate) fn target(&self, groups: &[usize], j: usize) -> f64 {
        let (fw, fopp) = self.facilitator(j);
        let mut total = fw;
        let mut opposite = if fopp { fw } else { 0.0 };
        let gj = groups[j];
        let uj = self.user[j];
        for i in 0..self.n {
            if i == j {
                continue;
            }
            let w = if groups[i] == gj {
                self.same[i * self.n + j]
            } else {
                self.sep[i * self.n + j]
            };
            total += w;
            if self.user[i] != uj {
                opposite += w;
            }
        }
        self.term(j, total, opposite)
    }

    pub(crate) fn score(&self, groups: &[usize]) -> f64 {
        (0..self.n).map(|j| self.target(groups, j)).sum()
    }
}

/// Relabels groups in order of first appearance.
pub(crate) fn canonical(groups: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    groups
        .iter()
        .map(|&g| {
            if g >= map.len() {
                map.resize(g + 1, None);
            }
            *map[g].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

pub(crate) fn group_count(groups: &[usize]) -> usize {
    groups.iter().max().map_or(0, |m| m + 1)
}

/// `true` when `(score, groups)` should replace `(best_score, best_groups)`:
/// a strictly higher score, or a tie broken by fewer groups and then the
/// lexicographically smaller canonical labeling.
pub(crate) fn better(score: f64, groups: &[usize], best_score: f64, best_groups: &[usize]) -> bool {
    if score > best_score + EPS {
        return true;
    }
    if score + EPS < best_score {
        return false;
    }
    let (s, bs) = (group_count(groups), group_count(best_groups));
    if s != bs {
        return s < bs;
    }
    canonical(groups) < canonical(best_groups)
}
