//! Browser bindings: truncation ladders, drift regions and percolation
//! clusters, each returned as a JSON string.

use std::sync::Arc;

use serde_json::json;
use wasm_bindgen::prelude::*;

use brwlab::coupling::{find_drift_region, DriftGrid};
use brwlab::graph::FamilyDescriptor;
use brwlab::random_env::{clusters, lambda_s_on_cluster, percolate};
use brwlab::spectral::{truncation_ladder, LadderOptions};
use brwlab::WeightedGraph;

/// Ladder `nR` for radii `1..=max_radius` of the graph described by
/// `family_json` (the `[graph]` table of a config, as JSON).
pub fn ladder_json(family_json: &str, max_radius: u32) -> Result<String, String> {
    if !(1..=60).contains(&max_radius) {
        return Err(format!("radius must lie in 1..=60, got {max_radius}"));
    }
    let desc: FamilyDescriptor = serde_json::from_str(family_json).map_err(|e| e.to_string())?;
    let graph = desc.build().map_err(|e| e.to_string())?;
    let radii: Vec<usize> = (1..=max_radius as usize).collect();
    let ladder = truncation_ladder(&graph, &graph.origin(), &radii, &LadderOptions::default()).map_err(|e| e.to_string())?;
    let rows: Vec<_> = ladder
        .entries
        .iter()
        .map(|e| json!({"radius": e.radius, "vertices": e.vertices as f64, "nR": e.estimate.n_r}))
        .collect();
    Ok(json!({"graph": graph.name(), "rows": rows, "limit": ladder.limit}).to_string())
}

/// Values of `g_λ` on the admissible grid and the selected drift integers.
pub fn drift_json(p: f64, q: f64, lambda: f64) -> Result<String, String> {
    let a = find_drift_region(p, q, lambda, &DriftGrid::default()).map_err(|e| e.to_string())?;
    let cells: Vec<[f64; 3]> = a.cells.iter().map(|c| [c.alpha, c.beta, c.g]).collect();
    Ok(json!({
        "alpha": [a.alpha.0, a.alpha.1],
        "beta": [a.beta.0, a.beta.1],
        "n": a.n,
        "d": [a.d1, a.d2, a.d3],
        "anchor_error": a.anchor_error,
        "cells": cells,
    })
    .to_string())
}

/// Bond percolation on the `side × side` box: open edges, cluster label per
/// vertex (row-major) and `λ_s` of the largest cluster.
pub fn percolation_json(side: u32, p: f64, seed: u64) -> Result<String, String> {
    if !(2..=40).contains(&side) {
        return Err(format!("side must lie in 2..=40, got {side}"));
    }
    let graph = Arc::new(WeightedGraph::zd_box(2, side as usize).map_err(|e| e.to_string())?);
    let sample = percolate(graph, p, seed).map_err(|e| e.to_string())?;
    let set = clusters(&sample);
    let lambda_s = if set.components[0].len() > 1 {
        Some(lambda_s_on_cluster(&sample, &set, 0).map_err(|e| e.to_string())?.n_r)
    } else {
        None
    };
    let coords: Vec<Vec<i64>> = sample
        .vertices
        .iter()
        .map(|v| v.as_lattice().map(<[i64]>::to_vec).unwrap_or_default())
        .collect();
    let open: Vec<[usize; 2]> = sample
        .edges
        .iter()
        .zip(&sample.open)
        .filter(|(_, &o)| o)
        .map(|(&(a, b), _)| [a, b])
        .collect();
    Ok(json!({
        "side": side,
        "coords": coords,
        "open": open,
        "labels": set.labels,
        "theta": set.theta(),
        "largest": set.components[0].len(),
        "lambda_s_largest": lambda_s,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn ladder(family_json: &str, max_radius: u32) -> Result<String, JsValue> {
    ladder_json(family_json, max_radius).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn drift_region(p: f64, q: f64, lambda: f64) -> Result<String, JsValue> {
    drift_json(p, q, lambda).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn percolation(side: u32, p: f64, seed: u32) -> Result<String, JsValue> {
    percolation_json(side, p, seed as u64).map_err(|e| JsValue::from_str(&e))
}
