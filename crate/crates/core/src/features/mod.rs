//! Node features: message cleaning, the embedding store, per-user aggregation,
//! and assembly of the node-feature matrix with structural fallbacks.

mod clean;
mod store;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::ingest::UserGraph;

pub use clean::clean_message;
pub use store::{EmbeddingStore, STORE_MAGIC, STORE_VERSION};

/// Node-feature matrix; row `i` belongs to `users[i]` of its graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Tensor);

impl FeatureMatrix {
    pub fn new(values: Tensor) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::Numeric("feature matrix".into()));
        }
        Ok(FeatureMatrix(values))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn permute_rows(&self, perm: &[usize]) -> FeatureMatrix {
        FeatureMatrix(self.0.permute_rows(perm))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    #[default]
    Max,
    Mean,
    Sum,
}

/// Feature used for users without any resolvable message vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Fallback {
    /// The 1-dimensional all-ones feature.
    #[default]
    ConstantOne,
    /// One-hot of `min(degree, cap)`, length `cap + 1`.
    DegreeOneHot { cap: usize },
}

impl Fallback {
    pub fn width(self) -> usize {
        match self {
            Fallback::ConstantOne => 1,
            Fallback::DegreeOneHot { cap } => cap + 1,
        }
    }

    /// The fallback row for a node of the given degree, padded with zeros (or,
    /// for the constant feature, filled with ones) to `width`.
    pub fn vector(self, degree: usize, width: usize) -> Vec<f64> {
        match self {
            Fallback::ConstantOne => vec![1.0; width],
            Fallback::DegreeOneHot { cap } => {
                let mut v = vec![0.0; width];
                v[degree.min(cap)] = 1.0;
                v
            }
        }
    }
}

/// Element-wise aggregate of equally long message vectors.
pub fn aggregate_user(vectors: &[&[f64]], mode: AggregateMode) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Argument("aggregate_user needs at least one vector".into()))?;
    let dim = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::Argument(format!(
            "aggregate_user: vector of length {} among length {dim}",
            bad.len()
        )));
    }
    let mut out = first.to_vec();
    for v in &vectors[1..] {
        for (o, &x) in out.iter_mut().zip(v.iter()) {
            match mode {
                // f64::max would silently drop a NaN; keep it so the matrix check sees it.
                AggregateMode::Max if x > *o || x.is_nan() => *o = x,
                AggregateMode::Max => {}
                AggregateMode::Mean | AggregateMode::Sum => *o += x,
            }
        }
    }
    if mode == AggregateMode::Mean {
        let m = vectors.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
    }
    Ok(out)
}

/// How node features are produced for a graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub fallback: Fallback,
    pub mode: AggregateMode,
    /// Width the caller expects; checked against the store when one is used.
    pub expected_dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AssemblyReport {
    pub fallback_rows: usize,
    pub unresolved_messages: usize,
}

/// Builds `X` for `graph`: aggregated message vectors where available, the
/// fallback row otherwise.
///
/// Without a store every row is a fallback row of width `fallback.width()`.
/// With a store the width is `store.dim()`, and fallback rows are laid out in
/// that width.
pub fn assemble_features(
    graph: &UserGraph,
    store: Option<&EmbeddingStore>,
    messages: &HashMap<String, Vec<String>>,
    spec: &FeatureSpec,
) -> Result<(FeatureMatrix, AssemblyReport)> {
    let width = match store {
        Some(s) => s.dim(),
        None => spec.fallback.width(),
    };
    if let Some(expected) = spec.expected_dim {
        if expected != width {
            return Err(Error::Config(format!(
                "declared feature dim {expected} does not match actual {width}"
            )));
        }
    }
    if store.is_some() && spec.fallback.width() > width && spec.fallback != Fallback::ConstantOne {
        return Err(Error::Config(format!(
            "fallback of width {} does not fit store dim {width}",
            spec.fallback.width()
        )));
    }

    let degrees = graph.degrees();
    let mut report = AssemblyReport::default();
    let mut x = Tensor::zeros(graph.users.len(), width);
    for (i, user) in graph.users.iter().enumerate() {
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        if let Some(store) = store {
            for id in messages.get(user).map(Vec::as_slice).unwrap_or(&[]) {
                match store.get(id) {
                    Some(v) => vectors.push(v.iter().map(|&f| f as f64).collect()),
                    None => report.unresolved_messages += 1,
                }
            }
        }
        let row = if vectors.is_empty() {
            report.fallback_rows += 1;
            spec.fallback.vector(degrees[i], width)
        } else {
            let refs: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
            aggregate_user(&refs, spec.mode)?
        };
        x.row_mut(i).copy_from_slice(&row);
    }
    Ok((FeatureMatrix::new(x)?, report))
}
