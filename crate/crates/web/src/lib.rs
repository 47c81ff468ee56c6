//! WebAssembly bindings for the browser demo. Every entry point takes and
//! returns JSON strings; the `*_json` functions hold the logic so they can
//! be tested natively.

use std::collections::BTreeMap;
use std::time::Duration;

use cohort_core::instance::ws_instance;
use cohort_core::solvers::baselines::{baseline_even_users, baseline_network, baseline_random};
use cohort_core::{
    evaluate_partition, solve_exact, solve_lns, Algorithm, LnsConfig, ModelParams, Partition, SocialNetwork,
    SolveConstraints,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest roster the sweep solves exactly; bigger ones use LNS.
const EXACT_SWEEP_LIMIT: usize = 12;

#[derive(Serialize)]
struct Scored {
    algorithm: Algorithm,
    expected_nonusers: f64,
    success: f64,
    groups: BTreeMap<String, usize>,
}

fn parse_network(json: &str) -> Result<SocialNetwork, String> {
    serde_json::from_str(json).map_err(|e| format!("bad network: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn lns_config(seed: u64, restarts: usize) -> LnsConfig {
    LnsConfig {
        restarts: restarts.max(1),
        time_limit: Duration::from_secs(20),
        seed,
        ..LnsConfig::default()
    }
}

fn scored(net: &SocialNetwork, algorithm: Algorithm, p: Partition, params: &ModelParams) -> Result<Scored, String> {
    let ev = evaluate_partition(net, &p, params).map_err(|e| e.to_string())?;
    Ok(Scored {
        algorithm,
        expected_nonusers: ev.expected_nonusers,
        success: ev.success,
        groups: p.assignment.into_iter().map(|(k, v)| (k.0, v)).collect(),
    })
}

fn run(net: &SocialNetwork, algo: Algorithm, seed: u64, restarts: usize, params: &ModelParams) -> Result<Scored, String> {
    let none = SolveConstraints::default();
    let p = match algo {
        Algorithm::Lns => solve_lns(net, params, &lns_config(seed, restarts), &none).map(|r| r.partition),
        Algorithm::Exact => solve_exact(net, params, &none).map(|r| r.partition),
        Algorithm::Local => cohort_core::solve_local_search(net, params, &lns_config(seed, restarts), &none).map(|r| r.partition),
        Algorithm::Random => baseline_random(net, params, seed),
        Algorithm::Network => baseline_network(net, params, seed),
        Algorithm::Even => baseline_even_users(net, params, seed),
    }
    .map_err(|e| e.to_string())?;
    scored(net, algo, p, params)
}

/// Small-world roster with default decoration.
pub fn generate_json(n: usize, seed: u64) -> Result<String, String> {
    let net = ws_instance(n, seed).map_err(|e| e.to_string())?;
    to_json(&net)
}

/// Groups from one algorithm (`lns`, `local`, `exact`, `random`, `network`, `even`).
pub fn solve_json(network: &str, algo: &str, seed: u64, restarts: usize) -> Result<String, String> {
    let net = parse_network(network)?;
    let algo: Algorithm = algo.parse()?;
    to_json(&run(&net, algo, seed, restarts, &ModelParams::default())?)
}

/// LNS next to the three baselines, same instance and seed.
pub fn compare_json(network: &str, seed: u64, restarts: usize) -> Result<String, String> {
    let net = parse_network(network)?;
    let params = ModelParams::default();
    let out = [Algorithm::Lns, Algorithm::Random, Algorithm::Network, Algorithm::Even]
        .into_iter()
        .map(|a| run(&net, a, seed, restarts, &params))
        .collect::<Result<Vec<_>, _>>()?;
    to_json(&out)
}

#[derive(Serialize)]
struct SweepPoint {
    omega_user_given_non: f64,
    success: f64,
    expected_nonusers: f64,
}

/// Best success as the chance of adopting use varies, other parameters at
/// their defaults.
pub fn omega_sweep_json(network: &str, values: &[f64], seed: u64) -> Result<String, String> {
    let net = parse_network(network)?;
    let algo = if net.len() <= EXACT_SWEEP_LIMIT { Algorithm::Exact } else { Algorithm::Lns };
    let mut out = Vec::new();
    for &w in values {
        let params = ModelParams {
            omega_user_given_non: w,
            ..ModelParams::default()
        };
        let s = run(&net, algo, seed, 10, &params)?;
        out.push(SweepPoint {
            omega_user_given_non: w,
            success: s.success,
            expected_nonusers: s.expected_nonusers,
        });
    }
    to_json(&out)
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn generate(n: usize, seed: u32) -> Result<String, JsValue> {
    js(generate_json(n, seed.into()))
}

#[wasm_bindgen]
pub fn solve(network: &str, algo: &str, seed: u32, restarts: usize) -> Result<String, JsValue> {
    js(solve_json(network, algo, seed.into(), restarts))
}

#[wasm_bindgen]
pub fn compare(network: &str, seed: u32, restarts: usize) -> Result<String, JsValue> {
    js(compare_json(network, seed.into(), restarts))
}

#[wasm_bindgen]
pub fn omega_sweep(network: &str, values: Vec<f64>, seed: u32) -> Result<String, JsValue> {
    js(omega_sweep_json(network, &values, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn generate_then_compare() {
        let net = generate_json(20, 3).unwrap();
        let v: Value = serde_json::from_str(&compare_json(&net, 1, 5).unwrap()).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0]["algorithm"], "lns");
        let best = rows[0]["success"].as_f64().unwrap();
        assert!(rows[1..].iter().all(|r| r["success"].as_f64().unwrap() <= best));
        assert_eq!(rows[0]["groups"].as_object().unwrap().len(), 20);
    }

    #[test]
    fn sweep_is_non_increasing_on_small_rosters() {
        let net = generate_json(10, 2).unwrap();
        let v: Value = serde_json::from_str(&omega_sweep_json(&net, &[0.25, 0.5, 1.0], 0).unwrap()).unwrap();
        let s: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["success"].as_f64().unwrap()).collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{s:?}");
    }

    #[test]
    fn errors_are_messages() {
        assert!(solve_json("{", "lns", 0, 1).unwrap_err().starts_with("bad network"));
        let net = generate_json(12, 0).unwrap();
        assert!(solve_json(&net, "greedy", 0, 1).unwrap_err().contains("unknown algorithm"));
        assert!(generate_json(3, 0).is_err());
    }
}
