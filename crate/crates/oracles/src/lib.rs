//! Slow, direct reference implementations that the fast code paths are
//! checked against. Nothing here reuses solver or rewiring internals: the
//! tie rule is evaluated from its 0/1 arithmetic form, partitions are
//! enumerated naively and LP files are parsed from text.

use std::collections::{BTreeMap, HashMap, HashSet};

use cohort_core::{Behavior, ModelParams, NodeId, Partition, PostTie, PreTie, SocialNetwork, TieStrength};

fn b(x: Behavior) -> i32 {
    match x {
        Behavior::User => 1,
        Behavior::NonUser => 0,
    }
}

/// Post-intervention tie from the indicator arithmetic: with z = 1 for a
/// shared group and s∅/sʷ/sˢ the prior-tie indicators,
/// strong = z(sˢ + |bi+bj−1|(s∅+sʷ)) + (1−z)|bi+bj−1|sˢ and
/// weak = z|bi−bj|(s∅+sʷ) + (1−z)(sʷ(1−max(bi,bj)) + sˢ|bi−bj|).
pub fn formula_post_tie(from: Behavior, to: Behavior, pre: PreTie, same_group: bool) -> PostTie {
    let (bi, bj) = (b(from), b(to));
    let z = i32::from(same_group);
    let (s0, sw, ss) = match pre {
        PreTie::NoTie => (1, 0, 0),
        PreTie::Weak => (0, 1, 0),
        PreTie::Strong => (0, 0, 1),
    };
    let alike = (bi + bj - 1).abs();
    let differ = (bi - bj).abs();
    let strong = z * (ss + alike * (s0 + sw)) + (1 - z) * alike * ss;
    let weak = z * differ * (s0 + sw) + (1 - z) * (sw * (1 - bi.max(bj)) + ss * differ);
    assert!(strong + weak <= 1, "indicators overlap");
    match (strong, weak) {
        (1, _) => PostTie::Strong,
        (_, 1) => PostTie::Weak,
        _ => PostTie::None,
    }
}

fn weight(t: PostTie, params: &ModelParams) -> f64 {
    match t {
        PostTie::Strong => params.weight_strong,
        PostTie::Weak => params.weight_weak,
        PostTie::None => 0.0,
    }
}

/// Expected post-intervention non-user count computed directly from the
/// network and an assignment.
pub fn objective(net: &SocialNetwork, params: &ModelParams, p: &Partition) -> f64 {
    let mut pre: HashMap<(&NodeId, &NodeId), PreTie> = HashMap::new();
    for t in &net.ties {
        let s = match t.strength {
            TieStrength::Strong => PreTie::Strong,
            TieStrength::Weak => PreTie::Weak,
        };
        pre.insert((&t.from, &t.to), s);
    }
    let mut total = 0.0;
    for target in &net.nodes {
        let mut all = 0.0;
        let mut opposite = 0.0;
        for source in net.nodes.iter().filter(|s| s.id != target.id) {
            let prior = pre.get(&(&source.id, &target.id)).copied().unwrap_or(PreTie::NoTie);
            let same = p.assignment[&source.id] == p.assignment[&target.id];
            let w = weight(formula_post_tie(source.behavior, target.behavior, prior, same), params);
            all += w;
            if source.behavior != target.behavior {
                opposite += w;
            }
        }
        if params.include_facilitator {
            // the facilitator is a non-user: strong to non-users, weak to users
            let w = match target.behavior {
                Behavior::NonUser => params.weight_strong,
                Behavior::User => params.weight_weak,
            };
            all += w;
            if target.behavior == Behavior::User {
                opposite += w;
            }
        }
        let share = if all > 0.0 { opposite / all } else { 0.0 };
        total += match target.behavior {
            Behavior::NonUser => 1.0 - params.omega_user_given_non * share,
            Behavior::User => params.omega_non_given_user * share,
        };
    }
    total
}

/// Every assignment of `n` items into unlabeled blocks, as group vectors
/// with blocks numbered by first appearance, keeping those whose block
/// sizes lie in `lo..=hi`.
pub fn all_partitions(n: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for g in 0..=next {
            prefix.push(g);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    grow(&mut Vec::new(), n, &mut all);
    all.retain(|groups| {
        let blocks = groups.iter().max().map_or(0, |m| m + 1);
        (0..blocks).all(|g| {
            let size = groups.iter().filter(|&&x| x == g).count();
            (lo..=hi).contains(&size)
        })
    });
    all
}

/// Best objective over every capacity-feasible partition.
pub fn brute_force_best(net: &SocialNetwork, params: &ModelParams) -> Option<(f64, Partition)> {
    let (lo, hi) = (params.capacity.lo(), params.capacity.hi());
    let mut best: Option<(f64, Partition)> = None;
    for groups in all_partitions(net.nodes.len(), lo, hi) {
        let p = Partition::from_assignment(
            net.nodes.iter().zip(&groups).map(|(x, &g)| (x.id.clone(), g)).collect(),
        );
        let v = objective(net, params, &p);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, p));
        }
    }
    best
}

/// Average local clustering coefficient of an undirected graph; nodes of
/// degree below two contribute zero.
pub fn clustering(n: usize, edges: &[(usize, usize)]) -> f64 {
    let mut adj = vec![HashSet::new(); n];
    for &(a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut sum = 0.0;
    for nb in &adj {
        let d = nb.len();
        if d < 2 {
            continue;
        }
        let list: Vec<usize> = nb.iter().copied().collect();
        let mut links = 0;
        for x in 0..d {
            for y in x + 1..d {
                if adj[list[x]].contains(&list[y]) {
                    links += 1;
                }
            }
        }
        sum += 2.0 * links as f64 / (d * (d - 1)) as f64;
    }
    sum / n as f64
}

/// Row name, terms, sense and right-hand side.
pub type LpRow = (String, Vec<(String, f64)>, String, f64);

/// An LP file read back from text.
#[derive(Debug, Default)]
pub struct LpFile {
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<LpRow>,
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub binaries: Vec<String>,
    /// Node ids by model number, from the header comments.
    pub nodes: Vec<NodeId>,
}

impl LpFile {
    pub fn variable_names(&self) -> HashSet<String> {
        let mut names: HashSet<String> = self.objective.iter().map(|(n, _)| n.clone()).collect();
        for (_, terms, _, _) in &self.rows {
            names.extend(terms.iter().map(|(n, _)| n.clone()));
        }
        names.extend(self.bounds.keys().cloned());
        names.extend(self.binaries.iter().cloned());
        names
    }
}

/// Minimal reader for the subset of LP syntax the exporter writes.
pub fn parse_lp(text: &str) -> LpFile {
    let mut lp = LpFile::default();
    let mut body = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("\\ node ") {
            let (_, id) = rest.split_once(" = ").expect("node comment");
            lp.nodes.push(NodeId(id.to_string()));
        } else if !line.starts_with('\\') {
            body.extend(line.split_whitespace());
        }
    }
    let mut section = "";
    let mut k = 0;
    let read_terms = |k: &mut usize| {
        let mut terms = Vec::new();
        while *k < body.len() && (body[*k] == "+" || body[*k] == "-") {
            let c: f64 = body[*k + 1].parse().expect("coefficient");
            let sign = if body[*k] == "-" { -1.0 } else { 1.0 };
            terms.push((body[*k + 2].to_string(), sign * c));
            *k += 3;
        }
        if terms.is_empty() && body.get(*k) == Some(&"0") {
            *k += 2;
        }
        terms
    };
    while k < body.len() {
        match body[k] {
            "Maximize" | "Bounds" | "Binary" | "End" => {
                section = body[k];
                k += 1;
                continue;
            }
            "Subject" => {
                section = "Subject";
                k += 2;
                continue;
            }
            _ => {}
        }
        match section {
            "Maximize" => {
                k += 1; // "obj:"
                lp.objective = read_terms(&mut k);
            }
            "Subject" => {
                let name = body[k].trim_end_matches(':').to_string();
                k += 1;
                let terms = read_terms(&mut k);
                let sense = body[k].to_string();
                let rhs: f64 = body[k + 1].parse().expect("rhs");
                k += 2;
                lp.rows.push((name, terms, sense, rhs));
            }
            "Bounds" => {
                if body[k + 1] == "=" {
                    let v: f64 = body[k + 2].parse().expect("fixed value");
                    lp.bounds.insert(body[k].to_string(), (v, v));
                    k += 3;
                } else {
                    let lo: f64 = body[k].parse().expect("lower");
                    let hi: f64 = body[k + 4].parse().expect("upper");
                    lp.bounds.insert(body[k + 2].to_string(), (lo, hi));
                    k += 5;
                }
            }
            "Binary" => {
                lp.binaries.push(body[k].to_string());
                k += 1;
            }
            other => panic!("unexpected token `{}` in section `{other}`", body[k]),
        }
    }
    lp
}

/// Variable values implied by a partition, keyed by model variable name,
/// for models without facilitators.
pub fn point_from_partition(
    lp: &LpFile,
    net: &SocialNetwork,
    params: &ModelParams,
    p: &Partition,
) -> HashMap<String, f64> {
    let n = lp.nodes.len();
    let node: Vec<_> = lp
        .nodes
        .iter()
        .map(|id| net.nodes.iter().find(|x| &x.id == id).expect("node in network"))
        .collect();
    let mut pre: HashMap<(usize, usize), PreTie> = HashMap::new();
    let pos = |id: &NodeId| lp.nodes.iter().position(|x| x == id).unwrap();
    for t in &net.ties {
        let s = match t.strength {
            TieStrength::Strong => PreTie::Strong,
            TieStrength::Weak => PreTie::Weak,
        };
        pre.insert((pos(&t.from), pos(&t.to)), s);
    }
    let g = |i: usize| p.assignment[&node[i].id];
    let post = |i: usize, j: usize| {
        formula_post_tie(node[i].behavior, node[j].behavior, pre.get(&(i, j)).copied().unwrap_or(PreTie::NoTie), g(i) == g(j))
    };
    let mut x = HashMap::new();
    x.insert("obj_const".to_string(), 1.0);
    for j in 0..n {
        let rep = (0..j).all(|i| g(i) != g(j));
        x.insert(format!("r_{j}"), f64::from(u8::from(rep)));
        let total: f64 = (0..n).filter(|&i| i != j).map(|i| weight(post(i, j), params)).sum();
        for i in (0..n).filter(|&i| i != j) {
            if i < j {
                x.insert(format!("z_{i}_{j}"), f64::from(u8::from(g(i) == g(j))));
            }
            let t = post(i, j);
            x.insert(format!("xs_{i}_{j}"), f64::from(u8::from(t == PostTie::Strong)));
            x.insert(format!("xw_{i}_{j}"), f64::from(u8::from(t == PostTie::Weak)));
            x.insert(format!("x0_{i}_{j}"), f64::from(u8::from(t == PostTie::None)));
            let w = if total > 0.0 { weight(t, params) / total } else { 0.0 };
            x.insert(format!("w_{i}_{j}"), w);
            for i2 in (0..n).filter(|&i2| i2 != j) {
                let t2 = post(i2, j);
                x.insert(format!("qs_{i2}_{i}_{j}"), if t2 == PostTie::Strong { w } else { 0.0 });
                x.insert(format!("qw_{i2}_{i}_{j}"), if t2 == PostTie::Weak { w } else { 0.0 });
            }
        }
    }
    x
}

/// Largest row, bound or integrality violation of `x`, and the objective
/// value at `x`. Panics if `x` misses a variable the file uses.
pub fn check_point(lp: &LpFile, x: &HashMap<String, f64>) -> (f64, f64) {
    let val = |name: &str| *x.get(name).unwrap_or_else(|| panic!("no value for {name}"));
    let mut worst: f64 = 0.0;
    for (_, terms, sense, rhs) in &lp.rows {
        let lhs: f64 = terms.iter().map(|(n, c)| c * val(n)).sum();
        let v = match sense.as_str() {
            "<=" => lhs - rhs,
            ">=" => rhs - lhs,
            "=" => (lhs - rhs).abs(),
            s => panic!("unknown sense {s}"),
        };
        worst = worst.max(v);
    }
    for (name, &(lo, hi)) in &lp.bounds {
        let v = val(name);
        worst = worst.max(lo - v).max(v - hi);
    }
    for name in &lp.binaries {
        let v = val(name);
        worst = worst.max((v - v.round()).abs()).max(-v).max(v - 1.0);
    }
    for name in lp.variable_names() {
        if !lp.bounds.contains_key(&name) && !lp.binaries.contains(&name) {
            worst = worst.max(-val(&name));
        }
    }
    let objective = lp.objective.iter().map(|(n, c)| c * val(n)).sum();
    (worst, objective)
}
