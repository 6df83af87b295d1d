//! wasm-bindgen entry points for the static page in `www/`.
//!
//! Every function returns a JSON string so the page needs no glue beyond
//! `JSON.parse`.

use gigsim::agents::IntentionLabel;
use gigsim::analysis::{density_heatmap, stage_flow_matrix, IntentionLog};
use gigsim::experiment::{emergence_probability, EmergenceTree, Level};
use gigsim::metrics::{classify_involution, gini, involution_index, welfare};
use gigsim::RunConfig;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Browser runs stay small enough to finish in a second or two.
const MAX_RIDERS: usize = 200;
const MAX_DAYS: u32 = 30;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn config(
    n_riders: usize,
    days: u32,
    volume: f64,
    interaction: &str,
    intelligence: &str,
) -> Result<RunConfig, JsError> {
    if n_riders == 0 || n_riders > MAX_RIDERS {
        return Err(js(format!("riders must be in 1..={MAX_RIDERS}")));
    }
    if days == 0 || days > MAX_DAYS {
        return Err(js(format!("days must be in 1..={MAX_DAYS}")));
    }
    let mut cfg = RunConfig::default();
    cfg.world.n_riders = n_riders;
    cfg.world.horizon = days * cfg.world.steps_per_day;
    cfg.orders.volume_multiplier = volume;
    cfg.apply_factor("interaction", &Level::Label(interaction.to_string())).map_err(js)?;
    cfg.apply_factor("intelligence", &Level::Label(intelligence.to_string())).map_err(js)?;
    cfg.validate().map_err(js)?;
    Ok(cfg)
}

fn index_json(index: Option<f64>) -> Value {
    match index {
        Some(x) => json!({ "value": x, "level": classify_involution(x).as_str() }),
        None => Value::Null,
    }
}

/// One run: final index, per-day index, a whole-run density heatmap and the
/// daily risk-avoidant share.
#[wasm_bindgen]
pub fn simulate(
    n_riders: usize,
    days: u32,
    volume: f64,
    interaction: &str,
    intelligence: &str,
    seed: u64,
) -> Result<String, JsError> {
    let cfg = config(n_riders, days, volume, interaction, intelligence)?;
    let trace = gigsim::run(&cfg, seed).map_err(js)?;
    let w = &cfg.world;
    let heat = density_heatmap(&trace, w.width, w.height, w.horizon).map_err(js)?;
    let flows = stage_flow_matrix(&IntentionLog::from_trace(&trace), w.steps_per_day).map_err(js)?;
    let s = &trace.summary;
    let body = json!({
        "index": index_json(s.involution_index),
        "note": s.involution_note,
        "daily_index": s.daily_index,
        "risk_avoidant_share": flows.share_series(IntentionLabel::RiskAvoidant),
        "orders": { "created": s.orders_created, "delivered": s.orders_delivered, "expired": s.orders_expired },
        "heatmap": { "width": w.width, "height": w.height, "cells": heat.grids[0] },
    });
    Ok(body.to_string())
}

/// Median index per volume level over common seeds `0..seeds`.
#[wasm_bindgen]
pub fn volume_sweep(
    levels: &[f64],
    seeds: u64,
    n_riders: usize,
    days: u32,
    interaction: &str,
) -> Result<String, JsError> {
    if levels.is_empty() || seeds == 0 {
        return Err(js("need at least one level and one seed"));
    }
    let mut points = Vec::new();
    for &v in levels {
        let cfg = config(n_riders, days, v, interaction, "medium")?;
        let mut finite = Vec::new();
        for seed in 0..seeds {
            if let Some(x) = gigsim::run_summary(&cfg, seed).map_err(js)?.involution_index {
                finite.push(x);
            }
        }
        finite.sort_by(f64::total_cmp);
        let undefined = seeds as usize - finite.len();
        // Undefined runs count as unbounded, so they sit above every finite value.
        let n = seeds as usize;
        let at = |i: usize| finite.get(i).copied().unwrap_or(f64::INFINITY);
        let median = if n % 2 == 1 { at(n / 2) } else { 0.5 * (at(n / 2 - 1) + at(n / 2)) };
        points.push(json!({
            "volume": v,
            "median": if median.is_finite() { json!(median) } else { Value::Null },
            "undefined": undefined,
            "values": finite,
        }));
    }
    Ok(Value::Array(points).to_string())
}

/// Welfare and involution index of a hand-entered income vector, with utilities
/// given separately.
#[wasm_bindgen]
pub fn welfare_of(incomes: &[f64], utilities: &[f64]) -> Result<String, JsError> {
    let w = welfare(incomes).map_err(js)?;
    let g = gini(incomes).map_err(js)?;
    let index = involution_index(w.swf, utilities).ok();
    Ok(json!({ "gini": g, "eq": w.eq, "prod": w.prod, "swf": w.swf, "index": index_json(index) }).to_string())
}

#[wasm_bindgen]
pub fn emergence(p_e: f64, p_d: f64, p_a: f64, p_w: f64) -> Result<String, JsError> {
    let o = emergence_probability(EmergenceTree { p_e, p_d, p_a, p_w }).map_err(js)?;
    Ok(json!({ "p_c": o.p_c, "fail_decide": o.p_e_fail, "fail_act": o.p_e_star, "fail_feedback": o.p_e_star2 })
        .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_simulation_serializes() {
        let v: Value = serde_json::from_str(&simulate(10, 2, 1.0, "global", "high", 3).unwrap()).unwrap();
        let cells: u64 = v["heatmap"]["cells"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(cells, 10 * 2 * RunConfig::default().world.steps_per_day as u64);
        assert_eq!(v["daily_index"].as_array().unwrap().len(), 2);
        assert_eq!(v["risk_avoidant_share"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn sweep_has_one_point_per_level() {
        let v: Value = serde_json::from_str(&volume_sweep(&[0.75, 1.25], 2, 10, 1, "none").unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert_eq!(v[1]["volume"], 1.25);
    }

    #[test]
    fn calculators() {
        let v: Value = serde_json::from_str(&welfare_of(&[3.0, 1.0], &[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(v["swf"], 2.0);
        assert_eq!(v["index"]["value"], 2.0);
        assert_eq!(v["index"]["level"], "low");
        let v: Value = serde_json::from_str(&emergence(1.0, 0.5, 0.5, 0.5).unwrap()).unwrap();
        assert_eq!(v["p_c"], 0.125);
        assert_eq!(v["fail_decide"], 0.5);
    }
}
