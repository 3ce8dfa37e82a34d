//! File plumbing shared by the verbs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use controversy_core::autodiff::{checkpoint_paths, load_checkpoint, save_checkpoint, Tensor};
use controversy_core::features::FeatureMatrix;
use controversy_core::ingest::{parse_threads, Thread, UserGraph, UserGraphRecord};
use controversy_core::models::{Model, ModelConfig};
use controversy_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG: &str = "run_config.json";
pub const MODEL_CONFIG: &str = "model_config.json";
pub const CHECKPOINT_STEM: &str = "checkpoint";
pub const METRICS: &str = "metrics.csv";

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_threads(path: &Path) -> Result<Vec<Thread>> {
    let file = File::open(path).map_err(|e| with_path(path, e))?;
    parse_threads(BufReader::new(file))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| with_path(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| with_path(path, e))?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| with_path(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// The resolved-configuration file for an output: inside it when the output is
/// a directory, beside it (`<file>.run_config.json`) otherwise.
pub fn run_config_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join(RUN_CONFIG)
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".");
        name.push(RUN_CONFIG);
        out.with_file_name(name)
    }
}

/// File stem for a post id: characters outside `[A-Za-z0-9_-]` become `_`.
pub fn file_stem(post_id: &str) -> String {
    post_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn write_features(path: &Path, x: &FeatureMatrix) -> Result<()> {
    let t = x.as_tensor();
    write_json(
        path,
        &MatrixFile {
            rows: t.rows(),
            cols: t.cols(),
            data: t.data().to_vec(),
        },
    )
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let m: MatrixFile = read_json(path)?;
    let t = Tensor::new(m.rows, m.cols, m.data)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    FeatureMatrix::new(t)
}

/// Every `*.json` graph record in `dir`, sorted by file name. Feature files and
/// the run configuration are skipped.
pub fn read_graph_dir(dir: &Path) -> Result<Vec<UserGraph>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| with_path(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| with_path(dir, e)))
        .collect::<Result<_>>()?;
    paths.retain(|p| {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        name.ends_with(".json") && !name.ends_with(".features.json") && name != RUN_CONFIG
    });
    paths.sort();
    let mut graphs = Vec::with_capacity(paths.len());
    for path in paths {
        let record: UserGraphRecord = read_json(&path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let features_ref = record.features_ref.clone();
        let mut graph = record.into_graph()?;
        if let Some(r) = features_ref {
            let x = read_features(&dir.join(r))?;
            if x.rows() != graph.node_count() {
                return Err(Error::Structural(format!(
                    "graph {}: {} feature rows for {} users",
                    graph.post_id,
                    x.rows(),
                    graph.node_count()
                )));
            }
            graph.features = Some(x);
        }
        graphs.push(graph);
    }
    Ok(graphs)
}

pub fn save_model(dir: &Path, model: &Model) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| with_path(dir, e))?;
    save_checkpoint(model.params(), &dir.join(CHECKPOINT_STEM))?;
    write_json(&dir.join(MODEL_CONFIG), model.config())
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let config: ModelConfig = read_json(&dir.join(MODEL_CONFIG))?;
    let stem = dir.join(CHECKPOINT_STEM);
    let (manifest, _) = checkpoint_paths(&stem);
    if !manifest.exists() {
        return Err(Error::Format(format!("no checkpoint at {}", manifest.display())));
    }
    let params = load_checkpoint(&stem)?;
    Model::from_parts(config, &params)
}
