//! Browser bindings: analytical AVAR curves, a short seeded simulation per
//! mode, and the tracking-gain objective over the stability triangle.
//!
//! Every export returns a JSON string; errors become JS exceptions.

use std::cell::RefCell;
use std::collections::HashMap;

use chronoens::avar::{avar_analytical, avar_ensemble_mean, avar_statistical};
use chronoens::clock::ClockParams;
use chronoens::control::h2_objective;
use chronoens::design::{design, Design, DesignOptions};
use chronoens::presets;
use chronoens::scenario::{Mode, Scenario};
use chronoens::sim::{run_simulation, SimOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

thread_local! {
    static DESIGNS: RefCell<HashMap<String, Design>> = RefCell::new(HashMap::new());
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn preset(name: &str) -> Result<Scenario, JsValue> {
    match name {
        "desk_scale" => Ok(presets::desk_scale()),
        "paper_fig4" => Ok(presets::paper_fig4()),
        _ => Err(err(format!("unknown preset {name:?}"))),
    }
}

fn parse_mode(name: &str) -> Result<Mode, JsValue> {
    Mode::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| err(format!("unknown mode {name:?}")))
}

fn with_design<T>(name: &str, f: impl FnOnce(&Scenario, &Design) -> Result<T, JsValue>) -> Result<T, JsValue> {
    let sc = preset(name)?;
    DESIGNS.with(|cell| {
        let mut map = cell.borrow_mut();
        if !map.contains_key(name) {
            let d = design(&sc, &DesignOptions::default()).map_err(err)?;
            map.insert(name.to_string(), d);
        }
        f(&sc, &map[name])
    })
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points.max(2) - 1) as f64))
        .collect()
}

/// Analytical AVAR of each clock and of their equal-weight mean on a
/// log-spaced grid of averaging times.
#[wasm_bindgen]
pub fn avar_curves(sigma1_sq: &[f64], sigma2_sq: &[f64], tau_min: f64, tau_max: f64, points: usize) -> Result<String, JsValue> {
    if sigma1_sq.len() != sigma2_sq.len() || sigma1_sq.is_empty() {
        return Err(err("need one sigma2_sq per sigma1_sq"));
    }
    if !(tau_min > 0.0 && tau_max > tau_min) || points < 2 {
        return Err(err("need 0 < tau_min < tau_max and at least 2 points"));
    }
    let clocks: Vec<ClockParams> = sigma1_sq.iter().zip(sigma2_sq).map(|(&a, &b)| ClockParams::new(a, b)).collect();
    let taus = log_grid(tau_min, tau_max, points);
    let q = vec![1.0 / clocks.len() as f64; clocks.len()];
    let mut curves = Vec::new();
    for (i, c) in clocks.iter().enumerate() {
        let v = taus.iter().map(|&t| avar_analytical(c, t)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        curves.push(json!({"entity": format!("clock{}", i + 1), "avar": v}));
    }
    let m = taus
        .iter()
        .map(|&t| avar_ensemble_mean(&clocks, t, &q))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    curves.push(json!({"entity": "ensemble", "avar": m}));
    Ok(json!({"taus": taus, "curves": curves}).to_string())
}

/// Simulates a preset in one mode and returns MAC and mean-GAC phases
/// (every `stride` steps) plus the mean-over-MACs statistical AVAR at
/// power-of-two windows.
#[wasm_bindgen]
pub fn simulate(preset_name: &str, mode: &str, seed: u64, horizon: usize, stride: usize) -> Result<String, JsValue> {
    let mode = parse_mode(mode)?;
    if horizon < 8 {
        return Err(err("horizon must be at least 8"));
    }
    let stride = stride.max(1);
    with_design(preset_name, |base, d| {
        let mut sc = base.clone();
        sc.mode = mode;
        sc.seed = seed;
        sc.horizon = horizon;
        let gains = mode.synchronizes().then_some(&d.gains);
        let t = run_simulation(&sc, gains, SimOptions::default()).map_err(err)?;
        let ks: Vec<usize> = (0..=horizon).step_by(stride).collect();
        let pick = |v: &[f64]| ks.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let macs: Vec<Value> = (0..t.n).map(|i| json!(pick(&t.mac_phase(i)))).collect();
        let mut taus = Vec::new();
        let mut avar = Vec::new();
        let mut w = 1;
        while 2 * w < horizon {
            let mut acc = 0.0;
            for i in 0..t.n {
                acc += avar_statistical(&t.mac_phase(i), t.tau, w).map_err(err)? / t.n as f64;
            }
            taus.push(w as f64 * t.tau);
            avar.push(acc);
            w *= 2;
        }
        Ok(json!({
            "k": ks,
            "mac_phase": macs,
            "gac_mean_phase": pick(&t.gac_mean_phase()),
            "avar_taus": taus,
            "avar": avar,
        })
        .to_string())
    })
}

/// Tracking objective over a `grid × grid` lattice of `(f_b1 τ s, f_b2)` in
/// `[0, 4] × [0, 2]`; points outside the stability triangle are `null`.
#[wasm_bindgen]
pub fn tracking_heatmap(preset_name: &str, grid: usize) -> Result<String, JsValue> {
    if !(2..=200).contains(&grid) {
        return Err(err("grid must be between 2 and 200"));
    }
    with_design(preset_name, |sc, d| {
        let scale = sc.tau * sc.broadcast_period as f64;
        let mut rows = Vec::with_capacity(grid);
        for j in 0..grid {
            let b = 2.0 * (j as f64 + 0.5) / grid as f64;
            let row: Vec<Option<f64>> = (0..grid)
                .map(|i| {
                    let a = 4.0 * (i as f64 + 0.5) / grid as f64;
                    if a + 2.0 * b < 4.0 {
                        h2_objective(a / scale, b, &d.context).ok()
                    } else {
                        None
                    }
                })
                .collect();
            rows.push(row);
        }
        let fb = d.gains.f_b;
        Ok(json!({
            "x_label": "f_b1 τ s",
            "y_label": "f_b2",
            "x_max": 4.0,
            "y_max": 2.0,
            "values": rows,
            "chosen": [fb[0] * scale, fb[1]],
        })
        .to_string())
    })
}
