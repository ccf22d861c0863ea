//! Browser bindings for the horizon sweep, a scalar-plant explorer and the
//! instability witness. Each export returns a JSON string; the plain Rust
//! functions underneath are what the tests exercise.

use drc_lqr::bounds::{instability_witness, random_policy};
use drc_lqr::io::{bundled, parse_system};
use drc_lqr::prestabilize::default_prestabilizer;
use drc_lqr::sweep::{run_sweep, SweepOptions, SweepReport};
use drc_lqr::LqrSystem;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn finite(x: f64) -> Value {
    // JSON has no NaN / inf
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn report_json(rep: &SweepReport) -> Value {
    let rows: Vec<Value> = rep
        .rows
        .iter()
        .map(|r| {
            json!({
                "h": r.h,
                "err": finite(r.err_l1_k),
                "bound": finite(r.bound_thm1),
                "gap": finite(r.cost_gap),
                "gap_bound": finite(r.bound_perf),
            })
        })
        .collect();
    json!({
        "rows": rows,
        "slope": finite(rep.slope),
        "rho": rep.cert.rho,
        "tau": rep.cert.tau,
        "k_star": rep.k_star.iter().copied().map(finite).collect::<Vec<_>>(),
        "optimal_cost": finite(rep.optimal_cost),
        "prestabilized": rep.prestabilized,
    })
}

fn sweep_opts() -> SweepOptions {
    SweepOptions {
        timing: false,
        ..SweepOptions::default()
    }
}

/// Sweep of a system document; an empty string selects the bundled 3x3
/// example.
pub fn sweep(system: &str, h_max: usize) -> Result<Value, String> {
    let file = if system.trim().is_empty() {
        bundled("paper3x3").expect("bundled system")
    } else {
        parse_system(system, true).map_err(|e| e.to_string())?
    };
    let rep = run_sweep(&file.system, h_max, file.k0.as_ref(), sweep_opts())
        .map_err(|e| e.to_string())?;
    Ok(report_json(&rep))
}

/// Sweep of a scalar plant; unstable ones are pre-stabilized with the
/// unit-weight LQR gain.
pub fn scalar(a: f64, b: f64, q: f64, r: f64, s: f64, h_max: usize) -> Result<Value, String> {
    let sys = LqrSystem::scalar(a, b, q, r, s).map_err(|e| e.to_string())?;
    let k0 = if sys.is_open_loop_stable() {
        None
    } else {
        Some(default_prestabilizer(&sys).map_err(|e| e.to_string())?)
    };
    let rep = run_sweep(&sys, h_max, k0.as_ref(), sweep_opts()).map_err(|e| e.to_string())?;
    let mut v = report_json(&rep);
    v["k0"] = k0.map_or(Value::Null, |k| json!(k[(0, 0)]));
    Ok(v)
}

/// Covariance trace against the lower-bound trace for `t = h..=t_max`
/// under a seeded random policy on the Jordan plant.
pub fn witness(n: usize, h: usize, t_max: usize, seed: u64) -> Result<Value, String> {
    let policy = random_policy(n, h, 5.0, seed).map_err(|e| e.to_string())?;
    let mut points = Vec::new();
    for t in h..=t_max {
        let w = instability_witness(n, h, &policy, t).map_err(|e| e.to_string())?;
        points.push(json!({
            "t": t,
            "cov_trace": finite(w.covariance.trace()),
            "bound_trace": finite(w.lower_bound.trace()),
            "gap_lambda_min": finite(w.gap_lambda_min),
            "holds": w.holds,
        }));
    }
    Ok(json!({ "points": points }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep_json(system: &str, h_max: u32) -> Result<String, JsValue> {
    to_js(sweep(system, h_max as usize))
}

#[wasm_bindgen]
pub fn scalar_json(a: f64, b: f64, q: f64, r: f64, s: f64, h_max: u32) -> Result<String, JsValue> {
    to_js(scalar(a, b, q, r, s, h_max as usize))
}

#[wasm_bindgen]
pub fn witness_json(n: u32, h: u32, t_max: u32, seed: u32) -> Result<String, JsValue> {
    to_js(witness(n as usize, h as usize, t_max as usize, seed as u64))
}
