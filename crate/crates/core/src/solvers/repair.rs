//! Exact re-partitioning of the union of two groups.
//!
//! Moving nodes between the two groups only changes same-group status for
//! pairs inside the union, so only targets inside the union change their
//! term. Each candidate split is scored from per-target byte lookup tables
//! holding subset sums of the same-vs-separate weight differences.

use super::scorer::EPS;
use super::{Prepared, SolveConstraints, SolveError};
use crate::model::{ModelParams, Partition, SocialNetwork};

const MAX_UNION: usize = 30;

/// Outcome of enumerating the splits of two groups.
pub(crate) struct Split {
    pub groups: Vec<usize>,
    pub candidates: u64,
}

struct Tables {
    bytes: usize,
    /// `[a][byte][value]` subset sums of `same - sep` into target `a`.
    total: Vec<f64>,
    opposite: Vec<f64>,
    base_total: Vec<f64>,
    base_opposite: Vec<f64>,
}

impl Tables {
    fn build(prep: &Prepared, groups: &[usize], union: &[usize], in_union: &[bool]) -> Tables {
        let sc = &prep.scorer;
        let n = sc.len();
        let m = union.len();
        let bytes = m.div_ceil(8);
        let mut total = vec![0.0; m * bytes * 256];
        let mut opposite = vec![0.0; m * bytes * 256];
        let mut base_total = vec![0.0; m];
        let mut base_opposite = vec![0.0; m];
        for (a, &j) in union.iter().enumerate() {
            let (fw, fopp) = sc.facilitator(j);
            let uj = sc.is_user(j);
            let mut t = fw;
            let mut o = if fopp { fw } else { 0.0 };
            for i in 0..n {
                if i == j {
                    continue;
                }
                // outside nodes sit in other groups; union members start from
                // the separate weight and add the difference when together
                debug_assert!(in_union[i] || groups[i] != groups[j]);
                let w = sc.sep(i, j);
                t += w;
                if sc.is_user(i) != uj {
                    o += w;
                }
            }
            base_total[a] = t;
            base_opposite[a] = o;

            let mut diff = [0.0f64; MAX_UNION + 2];
            let mut diff_opp = [0.0f64; MAX_UNION + 2];
            for (c, &i) in union.iter().enumerate() {
                if c == a {
                    continue;
                }
                diff[c] = sc.same(i, j) - sc.sep(i, j);
                if sc.is_user(i) != uj {
                    diff_opp[c] = diff[c];
                }
            }
            for k in 0..bytes {
                let off = (a * bytes + k) * 256;
                for v in 1..256usize {
                    let low = v.trailing_zeros() as usize;
                    let prev = v & (v - 1);
                    let c = k * 8 + low;
                    total[off + v] = total[off + prev] + diff[c];
                    opposite[off + v] = opposite[off + prev] + diff_opp[c];
                }
            }
        }
        Tables {
            bytes,
            total,
            opposite,
            base_total,
            base_opposite,
        }
    }

    #[inline]
    fn sums(&self, a: usize, block: u32) -> (f64, f64) {
        let mut t = self.base_total[a];
        let mut o = self.base_opposite[a];
        for k in 0..self.bytes {
            let v = ((block >> (8 * k)) & 0xff) as usize;
            let off = (a * self.bytes + k) * 256 + v;
            t += self.total[off];
            o += self.opposite[off];
        }
        (t, o)
    }
}

/// Enumerates every split of groups `g1` and `g2` into two blocks within
/// the capacity bounds that honors the rules, and returns the best one.
/// Ties keep the first split in enumeration order.
pub(crate) fn best_split(prep: &Prepared, groups: &[usize], g1: usize, g2: usize) -> Result<Split, SolveError> {
    if g1 == g2 {
        return Err(SolveError::InvalidConfig("repair needs two distinct groups".into()));
    }
    let union: Vec<usize> = (0..groups.len())
        .filter(|&i| groups[i] == g1 || groups[i] == g2)
        .collect();
    let m = union.len();
    if m > MAX_UNION {
        return Err(SolveError::InvalidConfig(format!(
            "two-group union of {m} nodes exceeds the enumeration limit {MAX_UNION}"
        )));
    }
    if m < 2 {
        return Err(SolveError::NoFeasibleSplit);
    }
    let mut in_union = vec![false; groups.len()];
    let mut pos = vec![usize::MAX; groups.len()];
    for (a, &i) in union.iter().enumerate() {
        in_union[i] = true;
        pos[i] = a;
    }

    let rules = &prep.rules;
    let mut together: Vec<(usize, usize)> = Vec::new();
    let mut apart: Vec<(usize, usize)> = Vec::new();
    let (mut pin1, mut pin2) = (0u32, 0u32);
    for (a, &i) in union.iter().enumerate() {
        for &k in &rules.units[rules.unit_of[i]] {
            if k > i && in_union[k] {
                together.push((a, pos[k]));
            }
        }
        for &k in &rules.cannot[i] {
            if k > i && in_union[k] {
                apart.push((a, pos[k]));
            }
        }
        match rules.pin[i] {
            Some(g) if g == g1 => pin1 |= 1 << a,
            Some(g) if g == g2 => pin2 |= 1 << a,
            _ => {}
        }
    }
    let (frozen1, frozen2) = (rules.frozen.contains(&g1), rules.frozen.contains(&g2));
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };

    // orientation: does block A (holding union[0]) become g1?
    let orient = |a_mask: u32| -> Option<bool> {
        let b_mask = full & !a_mask;
        let as_g1 = pin1 & !a_mask == 0
            && pin2 & a_mask == 0
            && (!frozen1 || a_mask == pin1)
            && (!frozen2 || b_mask == pin2);
        let as_g2 = pin2 & !a_mask == 0
            && pin1 & a_mask == 0
            && (!frozen2 || a_mask == pin2)
            && (!frozen1 || b_mask == pin1);
        match (as_g1, as_g2) {
            (true, true) => Some(g1 < g2),
            (true, false) => Some(true),
            (false, true) => Some(false),
            (false, false) => None,
        }
    };

    let tables = Tables::build(prep, groups, &union, &in_union);
    let (lo, hi) = (prep.bounds.lo() as u32, prep.bounds.hi() as u32);
    let mut best: Option<(u32, bool, f64)> = None;
    let mut candidates = 0u64;
    for rest in 0..(1u64 << (m - 1)) {
        let a_mask = 1u32 | ((rest as u32) << 1);
        let a_size = a_mask.count_ones();
        let b_size = m as u32 - a_size;
        if a_size < lo || a_size > hi || b_size < lo || b_size > hi {
            continue;
        }
        let side = |c: usize| (a_mask >> c) & 1;
        if together.iter().any(|&(c, d)| side(c) != side(d)) || apart.iter().any(|&(c, d)| side(c) == side(d)) {
            continue;
        }
        let Some(a_is_g1) = orient(a_mask) else { continue };
        candidates += 1;
        let b_mask = full & !a_mask;
        let mut score = 0.0;
        for (a, &j) in union.iter().enumerate() {
            let block = if (a_mask >> a) & 1 == 1 { a_mask } else { b_mask };
            let (t, o) = tables.sums(a, block);
            score += prep.scorer.term(j, t, o);
        }
        if best.is_none_or(|(_, _, s)| score > s + EPS) {
            best = Some((a_mask, a_is_g1, score));
        }
    }

    let Some((a_mask, a_is_g1, _)) = best else {
        return Err(SolveError::NoFeasibleSplit);
    };
    let (ga, gb) = if a_is_g1 { (g1, g2) } else { (g2, g1) };
    let mut out = groups.to_vec();
    for (a, &i) in union.iter().enumerate() {
        out[i] = if (a_mask >> a) & 1 == 1 { ga } else { gb };
    }
    Ok(Split { groups: out, candidates })
}

fn prepare_repair(
    net: &SocialNetwork,
    params: &ModelParams,
    p: &Partition,
    constraints: &SolveConstraints,
) -> Result<(Prepared, Vec<usize>), SolveError> {
    let prep = Prepared::new(net, params, constraints)?;
    let groups = prep.inst.dense_assignment(p, prep.bounds)?;
    if !prep.rules.satisfied(&groups) {
        return Err(SolveError::UnsatisfiableConstraints(
            "current partition violates the constraints".into(),
        ));
    }
    Ok((prep, groups))
}

/// Re-partitions the members of groups `g1` and `g2` optimally, keeping
/// every other assignment fixed.
pub fn repair_two_groups(
    net: &SocialNetwork,
    params: &ModelParams,
    p: &Partition,
    g1: usize,
    g2: usize,
    constraints: &SolveConstraints,
) -> Result<Partition, SolveError> {
    let (prep, groups) = prepare_repair(net, params, p, constraints)?;
    let split = best_split(&prep, &groups, g1, g2)?;
    Ok(prep.inst.partition_from_dense(&split.groups))
}

/// Number of candidate splits [`repair_two_groups`] scores for this input.
pub fn count_two_group_splits(
    net: &SocialNetwork,
    params: &ModelParams,
    p: &Partition,
    g1: usize,
    g2: usize,
    constraints: &SolveConstraints,
) -> Result<u64, SolveError> {
    let (prep, groups) = prepare_repair(net, params, p, constraints)?;
    best_split(&prep, &groups, g1, g2).map(|s| s.candidates)
}
