//! Browser bindings. Every export takes and returns JSON text.

use robustfsm::harness::{run_grid, run_single, ExperimentConfig, GridConfig};
use robustfsm::robust::weiszfeld;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Mean normalized quality per round for every cell of a grid config.
pub fn scenario_curves(grid_json: &str) -> Result<Value, String> {
    let grid = GridConfig::from_json(grid_json).map_err(|e| e.to_string())?;
    let summaries = run_grid(&grid).map_err(|e| e.to_string())?;
    Ok(summaries
        .iter()
        .map(|s| {
            json!({
                "scenario": s.scenario,
                "mean_final": s.mean_final,
                "std_final": s.std_final,
                "curve": s.curve().iter().map(|&(r, m, sd)| json!([r, m, sd])).collect::<Vec<_>>(),
            })
        })
        .collect())
}

/// Coreset membership per round of a single run.
pub fn coreset_trace(config_json: &str) -> Result<Value, String> {
    let config = ExperimentConfig::from_json(config_json).map_err(|e| e.to_string())?;
    let run = run_single(&config, config.seed).map_err(|e| e.to_string())?;
    let members = |d: &Option<robustfsm::harness::experiment::CoresetDiagnostics>| {
        d.as_ref().map(|d| json!({ "members": d.members, "bad_fraction": d.bad_fraction }))
    };
    let rounds: Vec<Value> = run
        .rows
        .iter()
        .map(|row| {
            json!({
                "round": row.round,
                "quality": row.normalized.unwrap_or(row.raw),
                "adopted": row.adopted.map(|c| format!("{c:?}").to_lowercase()),
                "sim": members(&row.sim),
                "div": members(&row.div),
            })
        })
        .collect();
    Ok(json!({
        "n_clients": config.n_clients,
        "malicious": run.malicious,
        "rounds": rounds,
        "warnings": run.warnings,
    }))
}

/// Coordinate mean and geometric median of a point cloud given as `[[x, y], ...]`.
pub fn median_vs_mean(points_json: &str) -> Result<Value, String> {
    let points: Vec<Vec<f64>> = serde_json::from_str(points_json).map_err(|e| e.to_string())?;
    let run = weiszfeld(&points, 1e-9, 1000).map_err(|e| e.to_string())?;
    let k = points.len() as f64;
    let mean: Vec<f64> = (0..run.point.len()).map(|d| points.iter().map(|p| p[d]).sum::<f64>() / k).collect();
    Ok(json!({ "mean": mean, "median": run.point, "iterations": run.iterations }))
}

#[wasm_bindgen(js_name = scenarioCurves)]
pub fn scenario_curves_js(grid_json: &str) -> Result<String, JsError> {
    to_js(scenario_curves(grid_json))
}

#[wasm_bindgen(js_name = coresetTrace)]
pub fn coreset_trace_js(config_json: &str) -> Result<String, JsError> {
    to_js(coreset_trace(config_json))
}

#[wasm_bindgen(js_name = medianVsMean)]
pub fn median_vs_mean_js(points_json: &str) -> Result<String, JsError> {
    to_js(median_vs_mean(points_json))
}
