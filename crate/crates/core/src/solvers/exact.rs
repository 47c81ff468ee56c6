use web_time::Instant;

use super::scorer::{better, Scorer};
use super::{Algorithm, Prepared, SolveConstraints, SolveError, SolveResult, TracePoint};
use crate::model::{ModelParams, SocialNetwork};

pub const DEFAULT_EXACT_LIMIT: usize = 12;

/// Exhaustive search over every set partition with block sizes inside the
/// capacity bounds. Ties go to fewer groups, then the lexicographically
/// smallest canonical assignment.
pub fn solve_exact(net: &SocialNetwork, params: &ModelParams, constraints: &SolveConstraints) -> Result<SolveResult, SolveError> {
    solve_exact_limited(net, params, constraints, DEFAULT_EXACT_LIMIT)
}

pub fn solve_exact_limited(
    net: &SocialNetwork,
    params: &ModelParams,
    constraints: &SolveConstraints,
    limit: usize,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    if net.len() > limit {
        return Err(SolveError::InstanceTooLarge { n: net.len(), limit });
    }
    let prep = Prepared::new(net, params, constraints)?;
    let mut search = Search::new(&prep);
    search.descend(0);
    let Some((groups, score)) = search.best else {
        return Err(SolveError::UnsatisfiableConstraints(
            "no partition satisfies the constraints".into(),
        ));
    };
    let trace = vec![TracePoint {
        restart: 0,
        iteration: search.visited,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        objective: score,
    }];
    prep.finish(net, params, Algorithm::Exact, &groups, started, 1, trace)
}

struct Search<'a> {
    prep: &'a Prepared,
    scorer: &'a Scorer,
    n: usize,
    max_blocks: usize,
    assign: Vec<usize>,
    sizes: Vec<usize>,
    block_pin: Vec<Option<usize>>,
    block_unpinned: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
    visited: u64,
}

impl<'a> Search<'a> {
    fn new(prep: &'a Prepared) -> Self {
        let n = prep.inst.len();
        Search {
            prep,
            scorer: &prep.scorer,
            n,
            max_blocks: *prep.counts.last().unwrap_or(&0),
            assign: vec![usize::MAX; n],
            sizes: Vec::new(),
            block_pin: Vec::new(),
            block_unpinned: Vec::new(),
            best: None,
            visited: 0,
        }
    }

    fn allowed(&self, k: usize, b: usize) -> bool {
        let rules = &self.prep.rules;
        if self.sizes[b] >= self.prep.bounds.hi() {
            return false;
        }
        let pin = rules.pin[k];
        match (self.block_pin[b], pin) {
            (Some(p), Some(q)) if p != q => return false,
            (Some(p), None) if rules.frozen.contains(&p) => return false,
            (None, Some(q)) if rules.frozen.contains(&q) && self.block_unpinned[b] > 0 => {
                return false
            }
            _ => {}
        }
        if rules.cannot[k].iter().any(|&c| c < k && self.assign[c] == b) {
            return false;
        }
        let unit = &rules.units[rules.unit_of[k]];
        // units are sorted; the first member fixes the block for the rest
        if unit[0] < k && self.assign[unit[0]] != b {
            return false;
        }
        true
    }

    fn deficit(&self) -> usize {
        let lo = self.prep.bounds.lo();
        self.sizes.iter().map(|&s| lo.saturating_sub(s)).sum()
    }

    fn place(&mut self, k: usize, b: usize) {
        self.assign[k] = b;
        self.sizes[b] += 1;
        match self.prep.rules.pin[k] {
            Some(p) => self.block_pin[b] = Some(p),
            None => self.block_unpinned[b] += 1,
        }
    }

    fn unplace(&mut self, k: usize, b: usize, prev_pin: Option<usize>) {
        self.assign[k] = usize::MAX;
        self.sizes[b] -= 1;
        self.block_pin[b] = prev_pin;
        if self.prep.rules.pin[k].is_none() {
            self.block_unpinned[b] -= 1;
        }
    }

    fn descend(&mut self, k: usize) {
        if k == self.n {
            self.leaf();
            return;
        }
        let remaining = self.n - k - 1;
        let blocks = self.sizes.len();
        for b in 0..blocks {
            if !self.allowed(k, b) {
                continue;
            }
            let prev = self.block_pin[b];
            self.place(k, b);
            if self.deficit() <= remaining {
                self.descend(k + 1);
            }
            self.unplace(k, b, prev);
        }
        if blocks < self.max_blocks {
            self.sizes.push(0);
            self.block_pin.push(None);
            self.block_unpinned.push(0);
            if self.allowed(k, blocks) {
                self.place(k, blocks);
                if self.deficit() <= remaining {
                    self.descend(k + 1);
                }
                self.unplace(k, blocks, None);
            }
            self.sizes.pop();
            self.block_pin.pop();
            self.block_unpinned.pop();
        }
    }

    fn leaf(&mut self) {
        if self.sizes.iter().any(|&s| s < self.prep.bounds.lo()) {
            return;
        }
        let Some(groups) = self.label() else { return };
        self.visited += 1;
        let score = self.scorer.score(&groups);
        let replace = match &self.best {
            None => true,
            Some((g, s)) => better(score, &groups, *s, g),
        };
        if replace {
            self.best = Some((groups, score));
        }
    }

    /// Maps blocks to group indices: pinned blocks take their pin, the
    /// rest fill the unused indices in block order.
    fn label(&self) -> Option<Vec<usize>> {
        let s = self.sizes.len();
        if !self.prep.rules.supports_group_count(s) {
            return None;
        }
        let mut label = vec![usize::MAX; s];
        let mut used = vec![false; s];
        for (b, pin) in self.block_pin.iter().enumerate() {
            if let Some(p) = *pin {
                label[b] = p;
                used[p] = true;
            }
        }
        let mut free = (0..s).filter(|&g| !used[g]);
        for l in label.iter_mut().filter(|l| **l == usize::MAX) {
            *l = free.next()?;
        }
        let groups: Vec<usize> = self.assign.iter().map(|&b| label[b]).collect();
        if groups.iter().enumerate().any(|(i, &g)| {
            self.prep.rules.frozen.contains(&g) && self.prep.rules.pin[i] != Some(g)
        }) {
            return None;
        }
        Some(groups)
    }
}
