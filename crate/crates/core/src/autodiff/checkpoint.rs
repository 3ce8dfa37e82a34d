//! Parameter checkpoints: a JSON manifest `{name: {rows, cols}}` next to a raw
//! little-endian `f64` payload holding the tensors concatenated in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::{ParamStore, Tensor};

#[derive(Debug, Serialize, Deserialize)]
struct Shape {
    rows: usize,
    cols: usize,
}

/// Paths of the manifest and payload files for a checkpoint stem.
pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

pub fn encode_checkpoint(params: &ParamStore) -> Result<(String, Vec<u8>)> {
    let mut manifest = Map::new();
    let mut payload = Vec::with_capacity(params.scalar_count() * 8);
    for (name, t) in params.iter() {
        if manifest.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        manifest.insert(
            name.to_string(),
            serde_json::to_value(Shape {
                rows: t.rows(),
                cols: t.cols(),
            })?,
        );
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = serde_json::to_string_pretty(&Value::Object(manifest))?;
    Ok((manifest, payload))
}

pub fn decode_checkpoint(manifest: &str, payload: &[u8]) -> Result<ParamStore> {
    let manifest: Map<String, Value> = serde_json::from_str(manifest)?;
    let mut params = ParamStore::new();
    let mut offset = 0usize;
    for (name, shape) in manifest {
        let shape: Shape = serde_json::from_value(shape)?;
        let count = shape.rows * shape.cols;
        let end = offset + count * 8;
        if end > payload.len() {
            return Err(Error::Format(format!(
                "checkpoint payload truncated in tensor `{name}`"
            )));
        }
        let data = payload[offset..end]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        offset = end;
        params.add(name, Tensor::new(shape.rows, shape.cols, data)?);
    }
    if offset != payload.len() {
        return Err(Error::Format(format!(
            "checkpoint payload has {} trailing bytes",
            payload.len() - offset
        )));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ParamStore, stem: &Path) -> Result<()> {
    let (manifest, payload) = encode_checkpoint(params)?;
    let (mpath, ppath) = checkpoint_paths(stem);
    fs::write(mpath, manifest)?;
    fs::write(ppath, payload)?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path) -> Result<ParamStore> {
    let (mpath, ppath) = checkpoint_paths(stem);
    let manifest = fs::read_to_string(mpath)?;
    let payload = fs::read(ppath)?;
    decode_checkpoint(&manifest, &payload)
}
