//! Command line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cohort_core::instance::{decorate, generate_ws, DecorationParams, InstanceError, WsParams};
use cohort_core::milp::{build_milp, write_lp, write_mps, MilpError};
use cohort_core::{
    apply_intervention, evaluate_partition, feasible_group_counts, simulate, Algorithm, CapacityBounds, ModelError,
    ModelParams, SocialNetwork, SolveConstraints, SolveError, SolveResult,
};
use serde_json::json;

use crate::bench::{run_benchmark, write_report, BenchConfig, BenchError};
use crate::formats::{self, FormatError};
use crate::solve::{run_solve, SolveOptions};
use crate::store::{RosterStore, StoreError};

#[derive(Debug, Parser)]
#[command(name = "cohort", version, about = "Plan intervention groups that steer peer influence toward healthy behavior")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a small-world network with behaviors and tie strengths.
    Generate(GenerateArgs),
    /// Partition a network into groups.
    Solve(SolveArgs),
    /// Score a given partition.
    Evaluate(EvaluateArgs),
    /// Monte Carlo estimate of the post-intervention non-user count.
    Simulate(SimulateArgs),
    /// Write the mixed-integer model for one or every feasible group count.
    ExportMilp(ExportArgs),
    /// Run the benchmark described by a TOML config.
    Benchmark(BenchArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// JSON file with model parameters; flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Chance a User adopts non-use once a Non-User influence exceeds its threshold.
    #[arg(long)]
    omega_user_given_non: Option<f64>,
    /// Chance a Non-User adopts use once User influence exceeds its threshold.
    #[arg(long)]
    omega_non_given_user: Option<f64>,
    /// Smallest allowed group.
    #[arg(long)]
    min_group: Option<usize>,
    /// Largest allowed group.
    #[arg(long)]
    max_group: Option<usize>,
    /// Leave the facilitator out of the influence model.
    #[arg(long)]
    no_facilitator: bool,
}

impl ParamArgs {
    fn resolve(&self) -> Result<ModelParams, CliError> {
        let mut p: ModelParams = match &self.params {
            Some(path) => formats::read_json(path)?,
            None => ModelParams::default(),
        };
        if let Some(v) = self.omega_user_given_non {
            p.omega_user_given_non = v;
        }
        if let Some(v) = self.omega_non_given_user {
            p.omega_non_given_user = v;
        }
        if self.min_group.is_some() || self.max_group.is_some() {
            let lo = self.min_group.unwrap_or(p.capacity.lo());
            let hi = self.max_group.unwrap_or(p.capacity.hi());
            p.capacity = CapacityBounds::new(lo, hi).map_err(CliError::input)?;
        }
        if self.no_facilitator {
            p.include_facilitator = false;
        }
        p.validate().map_err(CliError::input)?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, short)]
    n: usize,
    /// Ring degree before rewiring.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Rewiring probability.
    #[arg(long, default_value_t = 0.25)]
    p: f64,
    #[arg(long, env = "COHORT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.68)]
    user_ratio: f64,
    #[arg(long, default_value_t = 0.5)]
    strong_ratio: f64,
    /// Chance each edge also gets its reverse arc.
    #[arg(long, default_value_t = 1.0)]
    reciprocity: f64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Network JSON.
    network: PathBuf,
    #[arg(long, default_value = "lns")]
    algo: Algorithm,
    #[arg(long, env = "COHORT_SEED", default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    stall_limit: Option<usize>,
    /// JSON file with pins, must-link, cannot-link and frozen groups.
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    /// Result file to write.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Keep wall-clock timings in the result file (makes it run-dependent).
    #[arg(long)]
    keep_timings: bool,
    /// Print the result JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    network: PathBuf,
    /// Partition JSON, or a result file.
    partition: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    network: PathBuf,
    partition: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, env = "COHORT_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    network: PathBuf,
    /// Group count; every feasible count when omitted.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Write free-format MPS instead of LP.
    #[arg(long)]
    mps: bool,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "COHORT_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long, env = "COHORT_DATA_DIR", default_value = "cohort-data")]
    data_dir: PathBuf,
    /// Concurrent solves.
    #[arg(long, env = "COHORT_WORKERS", default_value_t = 2)]
    workers: usize,
}

/// A failure with its exit status and a machine-readable kind.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: &'static str,
    pub message: String,
}

pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BAD_INPUT: i32 = 3;
pub const EXIT_CONSTRAINTS: i32 = 4;

impl CliError {
    fn new(exit_code: i32, kind: &'static str, message: impl ToString) -> Self {
        CliError {
            exit_code,
            kind,
            message: message.to_string(),
        }
    }

    fn input(e: impl ToString) -> Self {
        Self::new(EXIT_BAD_INPUT, "bad_input", e)
    }

    fn other(e: impl ToString) -> Self {
        Self::new(1, "error", e)
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.exit_code }).to_string()
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::input(e)
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InfeasibleBounds { .. } | SolveError::NoFeasibleSplit => {
                CliError::new(EXIT_INFEASIBLE, "infeasible", e)
            }
            SolveError::UnsatisfiableConstraints(_) => CliError::new(EXIT_CONSTRAINTS, "constraint_conflict", e),
            SolveError::Model(_)
            | SolveError::InstanceTooLarge { .. }
            | SolveError::TimeBudgetZero
            | SolveError::InvalidConfig(_)
            | SolveError::ConstraintsUnsupported(_) => CliError::input(e),
            SolveError::Cancelled | SolveError::Influence(_) => CliError::other(e),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::input(e)
    }
}

impl From<MilpError> for CliError {
    fn from(e: MilpError) -> Self {
        match e {
            MilpError::InfeasibleS { .. } => CliError::new(EXIT_INFEASIBLE, "infeasible", e),
            MilpError::Model(_) | MilpError::Parse { .. } => CliError::input(e),
            MilpError::SinkUnwritable(_) => CliError::other(e),
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        CliError::input(e)
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Solve { source, .. } => source.into(),
            BenchError::Config(_) | BenchError::Instance(_) => CliError::input(e),
            BenchError::Io { .. } => CliError::other(e),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::other(e)
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::other(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(CliError::other),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::ExportMilp(a) => export(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Serve(a) => serve(a),
    }
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let g = generate_ws(&WsParams {
        n: a.n,
        k: a.k,
        p: a.p,
        seed: a.seed,
    })?;
    let net = decorate(
        &g,
        &DecorationParams {
            user_ratio: a.user_ratio,
            strong_ratio: a.strong_ratio,
            reciprocity: a.reciprocity,
            seed: a.seed,
        },
    );
    write_out(a.out.as_deref(), &formats::to_json(&net))
}

/// Options shared with the HTTP service, so both run the same solve.
pub fn solve_options(a: &SolveArgs) -> Result<SolveOptions, CliError> {
    let constraints: SolveConstraints = match &a.constraints {
        Some(p) => formats::read_json(p)?,
        None => SolveConstraints::default(),
    };
    let time_limit_ms = match a.time_limit {
        Some(t) if !(t.is_finite() && t > 0.0) => return Err(CliError::input("--time-limit must be positive")),
        Some(t) => Some((t * 1e3).ceil() as u64),
        None => None,
    };
    Ok(SolveOptions {
        algo: a.algo,
        seed: a.seed,
        time_limit_ms,
        restarts: a.restarts,
        stall_limit: a.stall_limit,
        params: a.params.resolve()?,
        constraints,
    })
}

pub fn result_table(net: &SocialNetwork, r: &SolveResult) -> String {
    let mut s = String::new();
    let ev = &r.evaluation;
    s += &format!("algorithm          {}\n", r.algorithm);
    s += &format!("participants       {} ({} users)\n", net.len(), net.user_count());
    s += &format!("groups             {}\n", r.partition.group_count());
    s += &format!(
        "expected non-users {:.4} (now {})\n",
        ev.expected_nonusers,
        net.nonuser_count()
    );
    s += &format!("success            {:.4}\n", ev.success);
    if ev.success < 0.0 {
        s += "WARNING            this grouping is expected to increase use (deviancy training)\n";
    }
    s += &format!("restarts           {}\n\n", r.restarts_completed);
    s += "group  member     behavior   p(become user)  p(become non-user)\n";
    for (g, members) in r.partition.groups().iter().enumerate() {
        for id in members {
            let b = net.node(id).map_or("?", |n| if n.behavior.is_user() { "user" } else { "non_user" });
            let f = ev.flips.get(id);
            s += &format!(
                "{g:<6} {:<10} {b:<10} {:>14.4}  {:>18.4}\n",
                id.as_str(),
                f.map_or(0.0, |f| f.become_user),
                f.map_or(0.0, |f| f.become_nonuser)
            );
        }
    }
    s
}

fn solve(a: SolveArgs) -> Result<(), CliError> {
    let net = formats::load_network(&a.network)?;
    let opts = solve_options(&a)?;
    let mut result = run_solve(&net, &opts, None)?;
    if !a.keep_timings {
        result = result.without_timings();
    }
    let json = formats::to_json(&result);
    if let Some(out) = &a.out {
        write_out(Some(out), &json)?;
    }
    if a.json {
        write_out(None, &json)
    } else {
        write_out(None, &result_table(&net, &result))
    }
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let net = formats::load_network(&a.network)?;
    let partition = formats::load_partition(&a.partition)?;
    let ev = evaluate_partition(&net, &partition, &a.params.resolve()?)?;
    let out = json!({
        "expected_nonusers": ev.expected_nonusers,
        "success": ev.success,
        "deviancy_warning": ev.success < 0.0,
        "flips": ev.flips,
    });
    write_out(None, &formats::to_json(&out))
}

fn simulate_cmd(a: SimulateArgs) -> Result<(), CliError> {
    let net = formats::load_network(&a.network)?;
    let partition = formats::load_partition(&a.partition)?;
    let params = a.params.resolve()?;
    let ev = evaluate_partition(&net, &partition, &params)?;
    let wnet = apply_intervention(&net, &partition, &params)?;
    let sim = simulate(&wnet, &params, a.samples, a.seed).map_err(CliError::input)?;
    let gap = (sim.mean - ev.expected_nonusers).abs();
    let out = json!({
        "closed_form": ev.expected_nonusers,
        "mean": sim.mean,
        "std_error": sim.std_error,
        "samples": sim.samples,
        "within_4_std_errors": gap <= 4.0 * sim.std_error,
    });
    write_out(None, &formats::to_json(&out))
}

fn export(a: ExportArgs) -> Result<(), CliError> {
    let net = formats::load_network(&a.network)?;
    let params = a.params.resolve()?;
    let counts = match a.s {
        Some(s) => vec![s],
        None => feasible_group_counts(net.len(), params.capacity),
    };
    if counts.is_empty() {
        return Err(CliError::new(
            EXIT_INFEASIBLE,
            "infeasible",
            format!("{} participants cannot be split into groups of {:?}", net.len(), params.capacity),
        ));
    }
    std::fs::create_dir_all(&a.out_dir).map_err(CliError::other)?;
    let stem = a.network.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    for s in counts {
        let model = build_milp(&net, &params, s)?;
        let path = a.out_dir.join(format!("{stem}.{s}.{}", if a.mps { "mps" } else { "lp" }));
        let file = std::fs::File::create(&path).map_err(|e| CliError::other(format!("{}: {e}", path.display())))?;
        let sink = std::io::BufWriter::new(file);
        if a.mps {
            write_mps(&model, sink)?;
        } else {
            write_lp(&model, sink)?;
        }
        println!("{}", path.display());
    }
    Ok(())
}

fn benchmark(a: BenchArgs) -> Result<(), CliError> {
    let cfg: BenchConfig = formats::read_toml(&a.config)?;
    let report = run_benchmark(&cfg, |msg| eprintln!("{msg}"))?;
    write_report(&report, &a.out_dir)?;
    let mut table = String::from("algorithm  mean success  std    mean expected non-users\n");
    for agg in report.aggregates.iter().filter(|g| g.n.is_none()) {
        table += &format!(
            "{:<10} {:>12.4}  {:.4} {:>12.4}\n",
            agg.algo.as_str(),
            agg.mean_success,
            agg.std_success,
            agg.mean_expected_nonusers
        );
    }
    if let Some(e) = report.scaling_exponent {
        table += &format!("scaling exponent {e:.2}\n");
    }
    table += &format!("written to {}\n", a.out_dir.display());
    write_out(None, &table)
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let store = RosterStore::open(&a.data_dir)?;
    let state = crate::api::AppState::new(store, a.workers);
    let rt = tokio::runtime::Runtime::new().map_err(CliError::other)?;
    rt.block_on(crate::api::serve(state, &a.bind)).map_err(CliError::other)
}
