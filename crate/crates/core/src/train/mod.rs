//! Balanced splitting, the mini-batch training loop, accuracy and time-sliced
//! evaluation.

mod pipeline;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, AdamConfig, AdamState, Tensor};
use crate::error::{Error, Result};
use crate::features::{AggregateMode, Fallback};
use crate::ingest::{AdjacencyMode, Label, UserGraph};
use crate::models::{AuxWeights, GraphInput, Model, ModelConfig, DEFAULT_CLUSTER_RATIO};

pub use pipeline::{
    prepare_thread, prepare_threads, timeslice_curve, write_curve_csv, CurvePoint,
    FeaturePipeline, DEFAULT_MIN_NODES,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub split_fraction: f64,
    pub adjacency_mode: AdjacencyMode,
    pub fallback: Fallback,
    pub aggregate_mode: AggregateMode,
    pub cluster_ratio: f64,
    pub aux_loss_weights: AuxWeights,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lr: 0.01,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            split_fraction: 0.8,
            adjacency_mode: AdjacencyMode::Binary,
            fallback: Fallback::ConstantOne,
            aggregate_mode: AggregateMode::Max,
            cluster_ratio: DEFAULT_CLUSTER_RATIO,
            aux_loss_weights: AuxWeights::default(),
        }
    }
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.cluster_ratio > 0.0 && self.cluster_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "cluster_ratio must lie in (0, 1], got {}",
                self.cluster_ratio
            )));
        }
        Ok(())
    }
}

/// A prepared graph with the id used in diagnostics.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub input: GraphInput,
}

impl Sample {
    pub fn from_graph(graph: &UserGraph, mode: AdjacencyMode) -> Result<Self> {
        Ok(Sample {
            id: graph.post_id.clone(),
            input: GraphInput::new(graph, mode)?,
        })
    }

    pub fn label(&self) -> Label {
        self.input.label
    }
}

#[derive(Clone, Debug)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    /// Majority-class items removed to balance the labels.
    pub dropped: usize,
}

/// Seeded balanced split: both labels are truncated to the minority count,
/// then `fraction` of each goes to training.
pub fn split_balanced<T>(
    items: Vec<T>,
    label: impl Fn(&T) -> Label,
    fraction: f64,
    seed: u64,
) -> Result<Split<T>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut by_label: [Vec<T>; 2] = [Vec::new(), Vec::new()];
    for item in items {
        let k = label(&item).index();
        by_label[k].push(item);
    }
    if by_label.iter().any(Vec::is_empty) {
        return Err(Error::Dataset(format!(
            "balanced split needs both labels (got {} non-controversial, {} controversial)",
            by_label[0].len(),
            by_label[1].len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = by_label[0].len().min(by_label[1].len());
    let n_train = ((fraction * keep as f64).round() as usize).clamp(1, keep);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        dropped: 0,
    };
    for mut group in by_label {
        group.shuffle(&mut rng);
        split.dropped += group.len() - keep;
        group.truncate(keep);
        let val = group.split_off(n_train);
        split.train.extend(group);
        split.val.extend(val);
    }
    Ok(split)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    /// Mean of the per-graph losses seen during each epoch.
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
}

impl History {
    pub fn len(&self) -> usize {
        self.train_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_loss.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,train_loss,train_acc,val_acc")?;
        for e in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                e + 1,
                self.train_loss[e],
                self.train_acc[e],
                self.val_acc[e]
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation accuracy (the
    /// initialization when no epoch ran).
    pub model: Model,
    pub history: History,
    /// 1-based epoch the retained parameters come from.
    pub best_epoch: Option<usize>,
}

/// Class 1 only when it is strictly more likely.
pub fn argmax_label(scores: [f64; 2]) -> Label {
    if scores[1] > scores[0] {
        Label::Controversial
    } else {
        Label::NonControversial
    }
}

pub fn accuracy(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Argument("accuracy of an empty set".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predicted.len() as f64)
}

pub fn predict_labels(model: &Model, set: &[Sample]) -> Result<Vec<Label>> {
    par_map(set, |s| model.logits(&s.input).map(argmax_label))
}

/// Fraction of graphs whose most probable class equals the label.
pub fn evaluate(model: &Model, set: &[Sample]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Argument("evaluation set is empty".into()));
    }
    let predicted = predict_labels(model, set)?;
    let truth: Vec<Label> = set.iter().map(Sample::label).collect();
    accuracy(&predicted, &truth)
}

/// Mean training loss and accuracy of `model` on `set`.
pub fn loss_and_accuracy(model: &Model, set: &[Sample]) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Argument("evaluation set is empty".into()));
    }
    let scored = par_map(set, |s| model.loss(&s.input))?;
    let loss = scored.iter().map(|(l, _)| l).sum::<f64>() / set.len() as f64;
    let predicted: Vec<Label> = scored.iter().map(|(_, l)| argmax_label(*l)).collect();
    let truth: Vec<Label> = set.iter().map(Sample::label).collect();
    Ok((loss, accuracy(&predicted, &truth)?))
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> Result<R>) -> Result<Vec<R>> {
    items.iter().map(f).collect()
}

/// Builds the model from `model_cfg`, seeded by `run.seed`, and trains it.
pub fn train(
    train_set: &[Sample],
    val_set: &[Sample],
    model_cfg: &ModelConfig,
    run: &RunConfig,
) -> Result<TrainOutcome> {
    run.validate()?;
    let model = Model::new(model_cfg.clone(), run.seed)?;
    train_model(model, train_set, val_set, run)
}

/// Trains an already initialized model. Per-graph gradients are summed in
/// batch order and averaged before each optimizer step.
pub fn train_model(
    mut model: Model,
    train_set: &[Sample],
    val_set: &[Sample],
    run: &RunConfig,
) -> Result<TrainOutcome> {
    run.validate()?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Argument("validation set is empty".into()));
    }
    let adam = AdamConfig {
        lr: run.lr,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(model.params().tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed ^ 0x5eed_7a11);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 1..=run.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(run.batch_size) {
            let results = par_map(batch, |&i| model.loss_and_grads(&train_set[i].input));
            let results = match results {
                Ok(r) if r.iter().all(|(l, _)| l.is_finite()) => r,
                Ok(_) | Err(Error::Numeric(_)) => {
                    let ids: Vec<&str> = batch.iter().map(|&i| train_set[i].id.as_str()).collect();
                    let cause = match results {
                        Err(Error::Numeric(m)) => m,
                        _ => "non-finite loss".into(),
                    };
                    return Err(Error::Numeric(format!(
                        "epoch {epoch}: {cause}; batch [{}]",
                        ids.join(", ")
                    )));
                }
                Err(e) => return Err(e),
            };
            let mut sum: Vec<Tensor> = model
                .params()
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect();
            for (loss, grads) in &results {
                loss_sum += loss;
                for (acc, g) in sum.iter_mut().zip(grads) {
                    acc.add_assign(g);
                }
            }
            let inv = 1.0 / batch.len() as f64;
            let mean: Vec<Tensor> = sum.iter().map(|g| g.scale(inv)).collect();
            adam_step(model.params_mut().tensors_mut(), &mean, &mut state, &adam)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let train_acc = evaluate(&model, train_set)?;
        let val_acc = evaluate(&model, val_set)?;
        history.train_loss.push(train_loss);
        history.train_acc.push(train_acc);
        history.val_acc.push(val_acc);
        log::info!("epoch {epoch}: loss {train_loss:.4} train_acc {train_acc:.4} val_acc {val_acc:.4}");
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, model.clone()));
        }
    }

    Ok(match best {
        Some((_, epoch, best_model)) => TrainOutcome {
            model: best_model,
            history,
            best_epoch: Some(epoch),
        },
        None => TrainOutcome {
            model,
            history,
            best_epoch: None,
        },
    })
}
