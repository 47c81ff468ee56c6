//! Mixed-integer linear model of the grouping problem for a fixed group
//! count, with LP and free-MPS writers and an LP reader for round trips.
//!
//! Nodes are numbered by lexicographic id order and variable names use
//! those numbers; the header comment of every file maps numbers to ids.
//! Facilitators are not modelled.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{tie_transition, PostTie, PreTie};
use crate::model::{
    feasible_group_counts, Behavior, Instance, ModelError, ModelParams, NodeId, Partition, SocialNetwork,
};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("{s} groups is not feasible; feasible counts are {feasible:?}")]
    InfeasibleS { s: usize, feasible: Vec<usize> },
    #[error("cannot write model: {0}")]
    SinkUnwritable(#[from] std::io::Error),
    #[error("LP parse error at token {position}: {message}")]
    Parse { position: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// (variable index, coefficient), no duplicate indices.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpMetadata {
    /// FNV-1a digest of the network in canonical order.
    pub instance_hash: String,
    pub group_count: usize,
    /// Node ids by model number.
    pub node_ids: Vec<NodeId>,
    pub params: ModelParams,
}

/// Maximization model. The objective's constant part is carried by the
/// variable `obj_const`, fixed to 1, so every format can express it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub metadata: MilpMetadata,
}

impl MilpModel {
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * x[v]).sum()
    }

    /// Largest violation of any row or bound at `x`; 0 when feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v]).sum();
            match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self.variables.iter().zip(x).map(|(v, &val)| {
            let integral = match v.kind {
                VarKind::Binary => (val - val.round()).abs(),
                VarKind::Continuous => 0.0,
            };
            (v.lower - val).max(val - v.upper).max(integral).max(0.0)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

struct Builder {
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let k = self.variables.len();
        self.index.insert(name.clone(), k);
        self.variables.push(Variable { name, kind, lower, upper });
        k
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint { name, terms, sense, rhs });
    }
}

/// Variable layout shared by the builder and [`partition_point`].
struct Layout {
    n: usize,
    order: Vec<usize>,
}

impl Layout {
    fn new(inst: &Instance) -> Self {
        let mut order: Vec<usize> = (0..inst.len()).collect();
        order.sort_by(|&a, &b| inst.id(a).cmp(inst.id(b)));
        Layout { n: inst.len(), order }
    }

    fn z(&self, i: usize, j: usize) -> String {
        format!("z_{}_{}", i.min(j), i.max(j))
    }
}

fn digest(inst: &Instance, order: &[usize]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for &i in order {
        eat(inst.id(i).0.as_bytes());
        eat(&[0, inst.behavior(i) as u8]);
    }
    for &i in order {
        for &j in order {
            eat(&[inst.pre_tie(i, j) as u8]);
        }
    }
    format!("{h:016x}")
}

/// Post-intervention tie indicators as affine functions of co-membership:
/// with z = 1 when i and j share a group, the strong indicator equals
/// `strong(separate) + (strong(same) - strong(separate)) * z`, and the weak
/// one likewise. Behaviors and the prior tie are data, so the products of z
/// with those constants are linear.
fn affine(bi: Behavior, bj: Behavior, pre: PreTie) -> ((f64, f64), (f64, f64)) {
    let same = tie_transition(bi, bj, pre, true);
    let sep = tie_transition(bi, bj, pre, false);
    let ind = |t: PostTie, want: PostTie| if t == want { 1.0 } else { 0.0 };
    (
        (ind(sep, PostTie::Strong), ind(same, PostTie::Strong) - ind(sep, PostTie::Strong)),
        (ind(sep, PostTie::Weak), ind(same, PostTie::Weak) - ind(sep, PostTie::Weak)),
    )
}

pub fn build_milp(net: &SocialNetwork, params: &ModelParams, s: usize) -> Result<MilpModel, MilpError> {
    params.validate()?;
    let inst = Instance::new(net)?;
    let feasible = feasible_group_counts(inst.len(), params.capacity);
    if !feasible.contains(&s) {
        return Err(MilpError::InfeasibleS { s, feasible });
    }
    let lay = Layout::new(&inst);
    let n = lay.n;
    let node = |m: usize| lay.order[m];
    let (ws, ww) = (params.weight_strong, params.weight_weak);
    let mut b = Builder {
        variables: Vec::new(),
        index: HashMap::new(),
        constraints: Vec::new(),
    };

    let one = b.var("obj_const".into(), VarKind::Continuous, 1.0, 1.0);
    for i in 0..n {
        for j in i + 1..n {
            b.var(lay.z(i, j), VarKind::Binary, 0.0, 1.0);
        }
    }
    for j in 0..n {
        b.var(format!("r_{j}"), VarKind::Binary, 0.0, 1.0);
    }
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            b.var(format!("xs_{i}_{j}"), VarKind::Binary, 0.0, 1.0);
            b.var(format!("xw_{i}_{j}"), VarKind::Binary, 0.0, 1.0);
            b.var(format!("x0_{i}_{j}"), VarKind::Binary, 0.0, 1.0);
            b.var(format!("w_{i}_{j}"), VarKind::Continuous, 0.0, 1.0);
        }
    }
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            for i2 in (0..n).filter(|&i2| i2 != j) {
                b.var(format!("qs_{i2}_{i}_{j}"), VarKind::Continuous, 0.0, 1.0);
                b.var(format!("qw_{i2}_{i}_{j}"), VarKind::Continuous, 0.0, 1.0);
            }
        }
    }
    let v = |b: &Builder, name: &str| b.index[name];

    // capacity: each node's group holds itself plus its co-members
    let (lo, hi) = (params.capacity.lo() as f64, params.capacity.hi() as f64);
    for j in 0..n {
        let terms: Vec<_> = (0..n).filter(|&i| i != j).map(|i| (v(&b, &lay.z(i, j)), 1.0)).collect();
        b.row(format!("cap_lo_{j}"), terms.clone(), Sense::Ge, lo - 1.0);
        b.row(format!("cap_hi_{j}"), terms, Sense::Le, hi - 1.0);
    }
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for k in (0..n).filter(|&k| k != i && k != j) {
                let terms = vec![
                    (v(&b, &lay.z(i, j)), 1.0),
                    (v(&b, &lay.z(j, k)), 1.0),
                    (v(&b, &lay.z(i, k)), -1.0),
                ];
                b.row(format!("tri_{i}_{j}_{k}"), terms, Sense::Le, 1.0);
            }
        }
    }
    // exactly s groups: r_j marks the lowest-numbered member of each group
    for j in 0..n {
        let mut terms = vec![(v(&b, &format!("r_{j}")), 1.0)];
        terms.extend((0..j).map(|i| (v(&b, &lay.z(i, j)), 1.0)));
        b.row(format!("rep_lo_{j}"), terms, Sense::Ge, 1.0);
        for i in 0..j {
            let terms = vec![(v(&b, &format!("r_{j}")), 1.0), (v(&b, &lay.z(i, j)), 1.0)];
            b.row(format!("rep_{i}_{j}"), terms, Sense::Le, 1.0);
        }
    }
    let reps = (0..n).map(|j| (v(&b, &format!("r_{j}")), 1.0)).collect();
    b.row("rep_count".into(), reps, Sense::Eq, s as f64);

    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let ((s0, s1), (w0, w1)) = affine(inst.behavior(node(i)), inst.behavior(node(j)), inst.pre_tie(node(i), node(j)));
            let (xs, xw, x0, w) = (
                v(&b, &format!("xs_{i}_{j}")),
                v(&b, &format!("xw_{i}_{j}")),
                v(&b, &format!("x0_{i}_{j}")),
                v(&b, &format!("w_{i}_{j}")),
            );
            let z = v(&b, &lay.z(i, j));
            let with_z = |x: usize, c: f64| if c == 0.0 { vec![(x, 1.0)] } else { vec![(x, 1.0), (z, -c)] };
            b.row(format!("strong_{i}_{j}"), with_z(xs, s1), Sense::Eq, s0);
            b.row(format!("weak_{i}_{j}"), with_z(xw, w1), Sense::Eq, w0);
            b.row(format!("onehot_{i}_{j}"), vec![(x0, 1.0), (xw, 1.0), (xs, 1.0)], Sense::Eq, 1.0);
            // no surviving tie means no influence weight
            b.row(format!("wcap_{i}_{j}"), vec![(w, 1.0), (xs, -1.0), (xw, -1.0)], Sense::Le, 0.0);
        }
    }
    // w_ij * sum_i2 W(x_i2j) = W(x_ij), with q = w * x linearized exactly
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            let w = v(&b, &format!("w_{i}_{j}"));
            let mut norm = Vec::with_capacity(2 * n);
            for i2 in (0..n).filter(|&i2| i2 != j) {
                for (tag, weight) in [("s", ws), ("w", ww)] {
                    let q = v(&b, &format!("q{tag}_{i2}_{i}_{j}"));
                    let x = v(&b, &format!("x{tag}_{i2}_{j}"));
                    norm.push((q, weight));
                    b.row(format!("q{tag}x_{i2}_{i}_{j}"), vec![(q, 1.0), (x, -1.0)], Sense::Le, 0.0);
                    b.row(format!("q{tag}w_{i2}_{i}_{j}"), vec![(q, 1.0), (w, -1.0)], Sense::Le, 0.0);
                    b.row(format!("q{tag}l_{i2}_{i}_{j}"), vec![(q, 1.0), (w, -1.0), (x, -1.0)], Sense::Ge, -1.0);
                }
            }
            norm.push((v(&b, &format!("xs_{i}_{j}")), -ws));
            norm.push((v(&b, &format!("xw_{i}_{j}")), -ww));
            b.row(format!("norm_{i}_{j}"), norm, Sense::Eq, 0.0);
        }
    }

    let mut objective = Vec::new();
    let nonusers = (0..n).filter(|&j| inst.behavior(node(j)) == Behavior::NonUser).count();
    objective.push((one, nonusers as f64));
    for j in 0..n {
        let bj = inst.behavior(node(j));
        for i in (0..n).filter(|&i| i != j && inst.behavior(node(i)) != bj) {
            let c = match bj {
                Behavior::NonUser => -params.omega_user_given_non,
                Behavior::User => params.omega_non_given_user,
            };
            objective.push((v(&b, &format!("w_{i}_{j}")), c));
        }
    }

    Ok(MilpModel {
        variables: b.variables,
        constraints: b.constraints,
        objective,
        metadata: MilpMetadata {
            instance_hash: digest(&inst, &lay.order),
            group_count: s,
            node_ids: lay.order.iter().map(|&i| inst.id(i).clone()).collect(),
            params: ModelParams {
                include_facilitator: false,
                ..*params
            },
        },
    })
}

/// Values of every model variable induced by `p` (facilitators off).
pub fn partition_point(model: &MilpModel, net: &SocialNetwork, p: &Partition) -> Result<Vec<f64>, MilpError> {
    let inst = Instance::new(net)?;
    let params = &model.metadata.params;
    let dense = inst.dense_assignment(p, params.capacity)?;
    let lay = Layout::new(&inst);
    let n = lay.n;
    let node = |m: usize| lay.order[m];
    let same = |i: usize, j: usize| dense[node(i)] == dense[node(j)];
    let mut vals: HashMap<String, f64> = HashMap::new();
    vals.insert("obj_const".into(), 1.0);
    for j in 0..n {
        vals.insert(format!("r_{j}"), if (0..j).any(|i| same(i, j)) { 0.0 } else { 1.0 });
        for i in (0..n).filter(|&i| i != j) {
            vals.insert(lay.z(i, j), if same(i, j) { 1.0 } else { 0.0 });
        }
    }
    let post = |i: usize, j: usize| {
        tie_transition(inst.behavior(node(i)), inst.behavior(node(j)), inst.pre_tie(node(i), node(j)), same(i, j))
    };
    let weight = |t: PostTie| crate::dynamics::raw_weight(t, params);
    for j in 0..n {
        let total: f64 = (0..n).filter(|&i| i != j).map(|i| weight(post(i, j))).sum();
        for i in (0..n).filter(|&i| i != j) {
            let t = post(i, j);
            vals.insert(format!("xs_{i}_{j}"), f64::from(t == PostTie::Strong));
            vals.insert(format!("xw_{i}_{j}"), f64::from(t == PostTie::Weak));
            vals.insert(format!("x0_{i}_{j}"), f64::from(t == PostTie::None));
            let w = if total > 0.0 { weight(t) / total } else { 0.0 };
            vals.insert(format!("w_{i}_{j}"), w);
            for i2 in (0..n).filter(|&i2| i2 != j) {
                let t2 = post(i2, j);
                vals.insert(format!("qs_{i2}_{i}_{j}"), if t2 == PostTie::Strong { w } else { 0.0 });
                vals.insert(format!("qw_{i2}_{i}_{j}"), if t2 == PostTie::Weak { w } else { 0.0 });
            }
        }
    }
    Ok(model.variables.iter().map(|v| vals.get(&v.name).copied().unwrap_or(0.0)).collect())
}

/// Shortest form for integers, otherwise 17 significant digits.
fn num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.16e}")
    }
}

fn expression(out: &mut String, model: &MilpModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0 obj_const");
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n  ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(c.abs()), model.variables[v].name);
    }
}

/// Writes the model in LP text format.
pub fn write_lp(model: &MilpModel, mut sink: impl Write) -> Result<(), MilpError> {
    let mut out = String::new();
    let meta = &model.metadata;
    let _ = writeln!(out, "\\ group partition model");
    let _ = writeln!(out, "\\ instance {} groups {}", meta.instance_hash, meta.group_count);
    for (k, id) in meta.node_ids.iter().enumerate() {
        let _ = writeln!(out, "\\ node {k} = {}", id.0.replace('\n', " "));
    }
    out.push_str("Maximize\n obj:");
    expression(&mut out, model, &model.objective);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        expression(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    out.push_str("Binary\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    sink.write_all(out.as_bytes())?;
    sink.flush()?;
    Ok(())
}

/// Writes the model in free-format MPS.
pub fn write_mps(model: &MilpModel, mut sink: impl Write) -> Result<(), MilpError> {
    let mut out = String::new();
    let _ = writeln!(out, "NAME groups_{}_{}", model.metadata.instance_hash, model.metadata.group_count);
    out.push_str("OBJSENSE\n    MAX\nROWS\n N obj\n");
    for c in &model.constraints {
        let t = match c.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {t} {}", c.name);
    }
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.variables.len()];
    for &(v, c) in &model.objective {
        columns[v].push(("obj", c));
    }
    for row in &model.constraints {
        for &(v, c) in &row.terms {
            columns[v].push((&row.name, c));
        }
    }
    out.push_str("COLUMNS\n");
    let mut integer = false;
    for (var, col) in model.variables.iter().zip(&columns) {
        let binary = var.kind == VarKind::Binary;
        if binary != integer {
            let tag = if binary { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER 'MARKER' '{tag}'");
            integer = binary;
        }
        for &(row, c) in col {
            let _ = writeln!(out, "    {} {row} {}", var.name, num(c));
        }
        if col.is_empty() {
            let _ = writeln!(out, "    {} obj 0", var.name);
        }
    }
    if integer {
        out.push_str("    MARKER 'MARKER' 'INTEND'\n");
    }
    out.push_str("RHS\n");
    for c in model.constraints.iter().filter(|c| c.rhs != 0.0) {
        let _ = writeln!(out, "    rhs {} {}", c.name, num(c.rhs));
    }
    out.push_str("BOUNDS\n");
    for v in &model.variables {
        match v.kind {
            VarKind::Binary => {
                let _ = writeln!(out, " BV bnd {}", v.name);
            }
            VarKind::Continuous if v.lower == v.upper => {
                let _ = writeln!(out, " FX bnd {} {}", v.name, num(v.lower));
            }
            VarKind::Continuous => {
                let _ = writeln!(out, " LO bnd {} {}", v.name, num(v.lower));
                let _ = writeln!(out, " UP bnd {} {}", v.name, num(v.upper));
            }
        }
    }
    out.push_str("ENDATA\n");
    sink.write_all(out.as_bytes())?;
    sink.flush()?;
    Ok(())
}

/// Contents of an LP file as written by [`write_lp`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpText {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
}

/// Parses the subset of the LP format that [`write_lp`] produces. Variables
/// are numbered in order of first appearance.
pub fn read_lp(text: &str) -> Result<LpText, MilpError> {
    let tokens: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('\\'))
        .flat_map(str::split_whitespace)
        .collect();
    let mut p = LpParser {
        tokens,
        pos: 0,
        index: HashMap::new(),
        variables: Vec::new(),
    };
    p.expect("Maximize")?;
    p.expect("obj:")?;
    let objective = p.terms()?;
    p.expect("Subject")?;
    p.expect("To")?;
    let mut constraints = Vec::new();
    while p.peek() != Some("Bounds") {
        let label = p.next()?;
        let Some(name) = label.strip_suffix(':') else {
            return Err(p.error(format!("expected a row label, found `{label}`")));
        };
        let terms = p.terms()?;
        let sense = match p.next()? {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            "=" => Sense::Eq,
            other => return Err(p.error(format!("expected a sense, found `{other}`"))),
        };
        let rhs = p.number()?;
        constraints.push(Constraint {
            name: name.to_string(),
            terms,
            sense,
            rhs,
        });
    }
    p.expect("Bounds")?;
    while p.peek() != Some("Binary") {
        let first = p.next()?;
        if let Ok(lower) = first.parse::<f64>() {
            p.expect("<=")?;
            let name = p.next()?;
            p.expect("<=")?;
            let upper = p.number()?;
            let k = p.var(name);
            p.variables[k].lower = lower;
            p.variables[k].upper = upper;
        } else {
            p.expect("=")?;
            let value = p.number()?;
            let k = p.var(first);
            p.variables[k].lower = value;
            p.variables[k].upper = value;
        }
    }
    p.expect("Binary")?;
    while p.peek() != Some("End") {
        let name = p.next()?;
        let k = p.var(name);
        p.variables[k].kind = VarKind::Binary;
        p.variables[k].lower = 0.0;
        p.variables[k].upper = 1.0;
    }
    p.expect("End")?;
    Ok(LpText {
        variables: p.variables,
        constraints,
        objective,
    })
}

struct LpParser<'a> {
    tokens: Vec<&'a str>,
    pos: usize,
    index: HashMap<String, usize>,
    variables: Vec<Variable>,
}

impl<'a> LpParser<'a> {
    fn error(&self, message: String) -> MilpError {
        MilpError::Parse {
            position: self.pos,
            message,
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self) -> Result<&'a str, MilpError> {
        let t = self.peek().ok_or_else(|| self.error("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &str) -> Result<(), MilpError> {
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(self.error(format!("expected `{want}`, found `{got}`")))
        }
    }

    fn number(&mut self) -> Result<f64, MilpError> {
        let t = self.next()?;
        t.parse().map_err(|_| self.error(format!("expected a number, found `{t}`")))
    }

    fn var(&mut self, name: &str) -> usize {
        if let Some(&k) = self.index.get(name) {
            return k;
        }
        let k = self.variables.len();
        self.index.insert(name.to_string(), k);
        self.variables.push(Variable {
            name: name.to_string(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        k
    }

    /// `(+|-) coef name` repeated until a sense or section keyword.
    fn terms(&mut self) -> Result<Vec<(usize, f64)>, MilpError> {
        let mut out = Vec::new();
        while let Some(sign) = self.peek().filter(|t| *t == "+" || *t == "-") {
            self.pos += 1;
            let c = self.number()?;
            let name = self.next()?;
            let k = self.var(name);
            out.push((k, if sign == "-" { -c } else { c }));
        }
        // an empty expression is written as `0 obj_const`
        if out.is_empty() && self.peek() == Some("0") {
            self.pos += 1;
            let name = self.next()?;
            self.var(name);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CapacityBounds, Node, Tie, TieStrength};

    fn pair() -> SocialNetwork {
        SocialNetwork::new(
            vec![
                Node { id: "u".into(), behavior: Behavior::User },
                Node { id: "n".into(), behavior: Behavior::NonUser },
            ],
            vec![],
        )
    }

    fn params(lo: usize, hi: usize) -> ModelParams {
        ModelParams {
            capacity: CapacityBounds::new(lo, hi).unwrap(),
            include_facilitator: false,
            ..ModelParams::default()
        }
    }

    #[test]
    fn triangle_rows_cover_ordered_triples() {
        let nodes = (0..4)
            .map(|i| Node { id: NodeId(format!("a{i}")), behavior: Behavior::NonUser })
            .collect();
        let m = build_milp(&SocialNetwork::new(nodes, vec![]), &params(2, 2), 2).unwrap();
        assert_eq!(m.constraints.iter().filter(|c| c.name.starts_with("tri_")).count(), 4 * 3 * 2);
    }

    #[test]
    fn pair_in_one_group_scores_point_eight() {
        let net = pair();
        let m = build_milp(&net, &params(1, 2), 1).unwrap();
        let p = Partition::from_groups([vec!["u", "n"]]);
        let x = partition_point(&m, &net, &p).unwrap();
        assert!(m.max_violation(&x) < 1e-9);
        assert!((m.objective_value(&x) - 0.8).abs() < 1e-12);
        // node 0 is "n", node 1 is "u"
        assert_eq!(m.metadata.node_ids, vec![NodeId::from("n"), NodeId::from("u")]);
    }

    #[test]
    fn wrong_group_count_violates_the_count_row() {
        let net = pair();
        let m = build_milp(&net, &params(1, 2), 1).unwrap();
        let apart = Partition::from_groups([vec!["u"], vec!["n"]]);
        let x = partition_point(&m, &net, &apart).unwrap();
        assert!(m.max_violation(&x) > 0.5);
        assert!(matches!(build_milp(&net, &params(1, 2), 3), Err(MilpError::InfeasibleS { .. })));
    }

    #[test]
    fn lp_round_trip_and_determinism() {
        let net = SocialNetwork::new(
            pair().nodes,
            vec![Tie { from: "u".into(), to: "n".into(), strength: TieStrength::Weak }],
        );
        let m = build_milp(&net, &params(1, 2), 1).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_lp(&m, &mut a).unwrap();
        write_lp(&m, &mut b).unwrap();
        assert_eq!(a, b);
        let parsed = read_lp(std::str::from_utf8(&a).unwrap()).unwrap();
        let mut names: Vec<_> = parsed.variables.iter().map(|v| v.name.clone()).collect();
        let mut declared: Vec<_> = m.variables.iter().map(|v| v.name.clone()).collect();
        names.sort();
        declared.sort();
        assert_eq!(names, declared);
        assert_eq!(parsed.constraints.len(), m.constraints.len());
    }

    #[test]
    fn empty_constraint_model_writes_objective_only() {
        let m = MilpModel {
            variables: vec![Variable { name: "obj_const".into(), kind: VarKind::Continuous, lower: 1.0, upper: 1.0 }],
            constraints: vec![],
            objective: vec![(0, 2.0)],
            metadata: MilpMetadata {
                instance_hash: "0".into(),
                group_count: 0,
                node_ids: vec![],
                params: ModelParams::default(),
            },
        };
        let mut out = Vec::new();
        write_lp(&m, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("Subject To\nBounds"));
        let parsed = read_lp(&text).unwrap();
        assert_eq!(parsed.objective, vec![(0, 2.0)]);
        assert!(parsed.constraints.is_empty());
    }

    #[test]
    fn numbers_use_seventeen_digits() {
        assert_eq!(num(3.0), "3");
        assert_eq!(num(-0.8), "-8.0000000000000004e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn mps_has_all_sections() {
        let m = build_milp(&pair(), &params(1, 2), 2).unwrap();
        let mut out = Vec::new();
        write_mps(&m, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.contains(section));
        }
        assert!(text.contains("FX bnd obj_const 1"));
    }
}
