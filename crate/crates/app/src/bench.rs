//! Benchmark harness: algorithm comparison on generated instances, the
//! Omega-ratio sweep and LNS scaling, with CSV output for plotting.

use std::fs;
use std::path::Path;

use cohort_core::instance::{decorate, generate_ws, DecorationParams, InstanceError, WsParams};
use cohort_core::{evaluate_partition, Algorithm, ModelParams, SocialNetwork, SolveError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solve::{run_solve, SolveOptions};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("{algo} on n={n}, seed {seed}: {source}")]
    Solve {
        algo: Algorithm,
        n: usize,
        seed: u64,
        #[source]
        source: SolveError,
    },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid benchmark config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmegaSweep {
    pub n: usize,
    pub instances: usize,
    pub omega_user_given_non: Vec<f64>,
    pub omega_non_given_user: f64,
    pub algorithm: Algorithm,
}

impl Default for OmegaSweep {
    fn default() -> Self {
        OmegaSweep {
            n: 12,
            instances: 5,
            omega_user_given_non: vec![0.25, 0.5, 0.75, 1.0],
            omega_non_given_user: 0.8,
            algorithm: Algorithm::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingRun {
    pub sizes: Vec<usize>,
    pub instances: usize,
}

impl Default for ScalingRun {
    fn default() -> Self {
        ScalingRun {
            sizes: vec![20, 40, 60],
            instances: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Instances per size; instance `i` uses seed `seed + i`.
    pub instances: usize,
    pub sizes: Vec<usize>,
    pub user_ratio: f64,
    pub seed: u64,
    pub restarts: usize,
    /// LNS budget per instance. Local search gets whatever LNS used.
    pub time_limit_ms: u64,
    pub algorithms: Vec<Algorithm>,
    pub params: ModelParams,
    /// Empty `omega_user_given_non` or `sizes` skip the sweep or scaling run.
    pub omega: OmegaSweep,
    pub scaling: ScalingRun,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            instances: 25,
            sizes: vec![20, 30, 40],
            user_ratio: 0.68,
            seed: 0,
            restarts: 50,
            time_limit_ms: 300_000,
            algorithms: vec![Algorithm::Lns, Algorithm::Local, Algorithm::Random, Algorithm::Network, Algorithm::Even],
            params: ModelParams::default(),
            omega: OmegaSweep::default(),
            scaling: ScalingRun::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algo: Algorithm,
    pub instance_seed: u64,
    pub n: usize,
    pub success: f64,
    pub expected_nonusers: f64,
    pub wall_ms: f64,
    /// Same partition scored with the facilitator left out.
    pub success_without_facilitator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algo: Algorithm,
    pub n: Option<usize>,
    pub count: usize,
    pub mean_success: f64,
    pub std_success: f64,
    pub mean_expected_nonusers: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaRow {
    pub instance_seed: u64,
    pub omega_user_given_non: f64,
    pub omega_non_given_user: f64,
    pub success: f64,
    pub expected_nonusers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub instance_seed: u64,
    pub restart_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<Aggregate>,
    pub omega: Vec<OmegaRow>,
    pub scaling: Vec<ScalingRow>,
    /// Log-log slope of median single-restart time against n.
    pub scaling_exponent: Option<f64>,
}

pub fn bench_instance(n: usize, user_ratio: f64, seed: u64) -> Result<SocialNetwork, InstanceError> {
    let g = generate_ws(&WsParams::new(n, seed))?;
    Ok(decorate(
        &g,
        &DecorationParams {
            user_ratio,
            seed,
            ..DecorationParams::default()
        },
    ))
}

fn solve_err(algo: Algorithm, n: usize, seed: u64) -> impl FnOnce(SolveError) -> BenchError {
    move |source| BenchError::Solve { algo, n, seed, source }
}

impl BenchConfig {
    fn check(&self) -> Result<(), BenchError> {
        if self.algorithms.contains(&Algorithm::Exact) {
            return Err(BenchError::Config("exact is only available in the omega sweep".into()));
        }
        if self.time_limit_ms == 0 {
            return Err(BenchError::Config("time_limit_ms must be positive".into()));
        }
        self.params.validate().map_err(|e| BenchError::Config(e.to_string()))
    }
}

/// Runs every configured algorithm on one instance. LNS goes first so that
/// local search can be held to the same wall time.
pub fn compare_on_instance(cfg: &BenchConfig, n: usize, seed: u64) -> Result<Vec<BenchRow>, BenchError> {
    let net = bench_instance(n, cfg.user_ratio, seed)?;
    let mut order = cfg.algorithms.clone();
    order.sort_by_key(|a| *a != Algorithm::Lns);
    let mut lns_ms = None;
    let mut rows = Vec::new();
    for algo in order {
        let budget = match algo {
            Algorithm::Local => lns_ms.map_or(cfg.time_limit_ms, |ms: f64| ms.ceil().max(1.0) as u64),
            _ => cfg.time_limit_ms,
        };
        let opts = SolveOptions {
            algo,
            seed,
            time_limit_ms: Some(budget),
            restarts: Some(cfg.restarts),
            params: cfg.params,
            ..SolveOptions::default()
        };
        let r = run_solve(&net, &opts, None).map_err(solve_err(algo, n, seed))?;
        if algo == Algorithm::Lns {
            lns_ms = Some(r.wall_time_ms);
        }
        let plain = ModelParams {
            include_facilitator: false,
            ..cfg.params
        };
        let alt = evaluate_partition(&net, &r.partition, &plain).map_err(solve_err(algo, n, seed))?;
        rows.push(BenchRow {
            algo,
            instance_seed: seed,
            n,
            success: r.evaluation.success,
            expected_nonusers: r.evaluation.expected_nonusers,
            wall_ms: r.wall_time_ms,
            success_without_facilitator: alt.success,
        });
    }
    Ok(rows)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn aggregate(rows: &[&BenchRow], algo: Algorithm, n: Option<usize>) -> Aggregate {
    let s: Vec<f64> = rows.iter().map(|r| r.success).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.expected_nonusers).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.wall_ms).collect();
    Aggregate {
        algo,
        n,
        count: rows.len(),
        mean_success: mean(&s),
        std_success: std_dev(&s),
        mean_expected_nonusers: mean(&e),
        mean_wall_ms: mean(&w),
    }
}

pub fn aggregates(rows: &[BenchRow], algorithms: &[Algorithm], sizes: &[usize]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &algo in algorithms {
        let all: Vec<&BenchRow> = rows.iter().filter(|r| r.algo == algo).collect();
        if all.is_empty() {
            continue;
        }
        out.push(aggregate(&all, algo, None));
        for &n in sizes {
            let some: Vec<&BenchRow> = all.iter().copied().filter(|r| r.n == n).collect();
            if !some.is_empty() {
                out.push(aggregate(&some, algo, Some(n)));
            }
        }
    }
    out
}

pub fn omega_sweep(cfg: &BenchConfig) -> Result<Vec<OmegaRow>, BenchError> {
    let sw = &cfg.omega;
    let mut rows = Vec::new();
    for i in 0..sw.instances as u64 {
        let seed = cfg.seed + i;
        let net = bench_instance(sw.n, cfg.user_ratio, seed)?;
        for &w in &sw.omega_user_given_non {
            let opts = SolveOptions {
                algo: sw.algorithm,
                seed,
                time_limit_ms: Some(cfg.time_limit_ms),
                restarts: Some(cfg.restarts),
                params: ModelParams {
                    omega_user_given_non: w,
                    omega_non_given_user: sw.omega_non_given_user,
                    ..cfg.params
                },
                ..SolveOptions::default()
            };
            let r = run_solve(&net, &opts, None).map_err(solve_err(sw.algorithm, sw.n, seed))?;
            rows.push(OmegaRow {
                instance_seed: seed,
                omega_user_given_non: w,
                omega_non_given_user: sw.omega_non_given_user,
                success: r.evaluation.success,
                expected_nonusers: r.evaluation.expected_nonusers,
            });
        }
    }
    Ok(rows)
}

/// Single-restart LNS timings.
pub fn scaling_run(cfg: &BenchConfig) -> Result<Vec<ScalingRow>, BenchError> {
    let mut rows = Vec::new();
    for &n in &cfg.scaling.sizes {
        for i in 0..cfg.scaling.instances as u64 {
            let seed = cfg.seed + i;
            let net = bench_instance(n, cfg.user_ratio, seed)?;
            let opts = SolveOptions {
                algo: Algorithm::Lns,
                seed,
                time_limit_ms: Some(cfg.time_limit_ms),
                restarts: Some(1),
                params: cfg.params,
                ..SolveOptions::default()
            };
            let r = run_solve(&net, &opts, None).map_err(solve_err(Algorithm::Lns, n, seed))?;
            rows.push(ScalingRow {
                n,
                instance_seed: seed,
                restart_ms: r.wall_time_ms,
            });
        }
    }
    Ok(rows)
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn scaling_exponent(rows: &[ScalingRow]) -> Option<f64> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let points: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let mut t: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.restart_ms).collect();
            (n as f64, median(&mut t))
        })
        .collect();
    log_log_slope(&points)
}

pub fn run_benchmark(cfg: &BenchConfig, mut progress: impl FnMut(&str)) -> Result<BenchmarkReport, BenchError> {
    cfg.check()?;
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        for i in 0..cfg.instances as u64 {
            rows.extend(compare_on_instance(cfg, n, cfg.seed + i)?);
        }
        progress(&format!("n={n}: {} instances done", cfg.instances));
    }
    let omega = omega_sweep(cfg)?;
    if !omega.is_empty() {
        progress("omega sweep done");
    }
    let scaling = scaling_run(cfg)?;
    if !scaling.is_empty() {
        progress("scaling run done");
    }
    Ok(BenchmarkReport {
        aggregates: aggregates(&rows, &cfg.algorithms, &cfg.sizes),
        scaling_exponent: scaling_exponent(&scaling),
        config: cfg.clone(),
        rows,
        omega,
        scaling,
    })
}

fn write_csv<R: Serialize>(dir: &Path, name: &str, header: Option<&[&str]>, rows: impl IntoIterator<Item = R>) -> Result<(), BenchError> {
    let path = dir.join(name);
    let io = |e: std::io::Error| BenchError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_path(&path)
        .map_err(|e| io(e.into()))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| io(e.into()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize)]
struct SmallVsLarge {
    n: usize,
    instance_seed: u64,
    budget_ms: f64,
    lns_expected_nonusers: f64,
    local_expected_nonusers: f64,
    lns_success: f64,
    local_success: f64,
}

/// Writes `report.json`, `benchmark.csv` and one CSV per figure.
pub fn write_report(report: &BenchmarkReport, dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|e| BenchError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let json = crate::formats::to_json(report);
    let path = dir.join("report.json");
    fs::write(&path, json).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_csv(
        dir,
        "benchmark.csv",
        Some(&["algo", "instance_seed", "n", "success", "expected_nonusers", "wall_ms"]),
        report
            .rows
            .iter()
            .map(|r| (r.algo, r.instance_seed, r.n, r.success, r.expected_nonusers, r.wall_ms)),
    )?;
    let find = |algo, r: &BenchRow| {
        report
            .rows
            .iter()
            .find(|x| x.algo == algo && x.n == r.n && x.instance_seed == r.instance_seed)
            .cloned()
    };
    let pairs = report.rows.iter().filter(|r| r.algo == Algorithm::Lns).filter_map(|l| {
        find(Algorithm::Local, l).map(|s| SmallVsLarge {
            n: l.n,
            instance_seed: l.instance_seed,
            budget_ms: l.wall_ms,
            lns_expected_nonusers: l.expected_nonusers,
            local_expected_nonusers: s.expected_nonusers,
            lns_success: l.success,
            local_success: s.success,
        })
    });
    write_csv(dir, "small_vs_large.csv", None, pairs)?;
    write_csv(dir, "baselines.csv", None, report.aggregates.iter().filter(|a| a.n.is_some()))?;
    write_csv(dir, "omega.csv", None, &report.omega)?;
    write_csv(dir, "scaling.csv", None, &report.scaling)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        BenchConfig {
            instances: 2,
            sizes: vec![12],
            restarts: 2,
            time_limit_ms: 5_000,
            omega: OmegaSweep {
                n: 8,
                instances: 1,
                ..OmegaSweep::default()
            },
            scaling: ScalingRun {
                sizes: vec![12, 16],
                instances: 1,
            },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn report_shape_and_csv_rows() {
        let cfg = tiny();
        let report = run_benchmark(&cfg, |_| {}).unwrap();
        assert_eq!(report.rows.len(), cfg.algorithms.len() * cfg.instances * cfg.sizes.len());
        assert!(report.rows.iter().all(|r| r.success.is_finite() && r.expected_nonusers.is_finite()));
        assert_eq!(report.omega.len(), 4);
        assert_eq!(report.scaling.len(), 2);

        let dir = tempfile::tempdir().unwrap();
        write_report(&report, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("algo,instance_seed,n,success,expected_nonusers,wall_ms"));
        assert_eq!(lines.count(), report.rows.len());
        assert!(!csv.contains("NaN"));
        for f in ["small_vs_large.csv", "baselines.csv", "omega.csv", "scaling.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let back: BenchmarkReport = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back.rows.len(), report.rows.len());
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg: BenchConfig = toml::from_str("instances = 3\nsizes = [30]\nalgorithms = [\"lns\", \"even\"]\n[omega]\nn = 10\n").unwrap();
        assert_eq!(cfg.instances, 3);
        assert_eq!(cfg.algorithms, vec![Algorithm::Lns, Algorithm::Even]);
        assert_eq!(cfg.omega.n, 10);
        assert_eq!(cfg.omega.instances, 5);
        assert!(toml::from_str::<BenchConfig>("instance = 3").is_err());
    }

    #[test]
    fn slope_of_a_cubic() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&x: &f64| (x, 2.0 * x.powi(3))).collect();
        assert!((log_log_slope(&pts).unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
