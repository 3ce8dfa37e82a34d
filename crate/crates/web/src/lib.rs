//! Browser bindings for the demo page. Every export returns a JSON string; the
//! work is done by the plain functions in [`demo`], which native tests call
//! directly.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// User graph of a synthetic thread cut off after `cutoff_minutes`
/// (negative or non-finite keeps the whole thread).
#[wasm_bindgen]
pub fn explore_thread(kind: &str, n_users: u32, seed: u32, cutoff_minutes: f64) -> Result<String, JsError> {
    js(demo::explore_thread(kind, n_users as usize, seed as u64, cutoff_minutes))
}

/// Hub output of one attention layer as the hub gains identical neighbours,
/// with and without cardinality scaling.
#[wasm_bindgen]
pub fn cardinality_curve(max_neighbours: u32, seed: u32) -> Result<String, JsError> {
    js(demo::cardinality_curve(max_neighbours as usize, seed as u64))
}

/// Per-epoch loss and accuracy of a small model trained on synthetic threads.
#[wasm_bindgen]
pub fn train_curve(family: &str, per_kind: u32, n_users: u32, epochs: u32, seed: u32) -> Result<String, JsError> {
    js(demo::train_curve(family, per_kind as usize, n_users as usize, epochs as usize, seed as u64))
}
