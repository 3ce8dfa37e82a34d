use std::io::Write;

use crate::error::{Error, Result};
use crate::features::{assemble_features, AssemblyReport, EmbeddingStore, FeatureSpec};
use crate::ingest::{build_user_graph, message_index, time_slice, AdjacencyMode, Thread, UserGraph};
use crate::models::Model;

use super::{evaluate, Sample};

/// Graphs smaller than this are skipped by time-sliced evaluation.
pub const DEFAULT_MIN_NODES: usize = 2;

/// Everything needed to turn a thread into a model input.
#[derive(Clone, Copy, Debug)]
pub struct FeaturePipeline<'a> {
    pub adjacency_mode: AdjacencyMode,
    pub spec: FeatureSpec,
    pub store: Option<&'a EmbeddingStore>,
    /// Whether the post body counts as one of its author's messages.
    pub include_post: bool,
    pub min_nodes: usize,
}

impl Default for FeaturePipeline<'_> {
    fn default() -> Self {
        FeaturePipeline {
            adjacency_mode: AdjacencyMode::Binary,
            spec: FeatureSpec::default(),
            store: None,
            include_post: true,
            min_nodes: DEFAULT_MIN_NODES,
        }
    }
}

/// Builds the user graph of `thread` and attaches its node features.
pub fn prepare_thread(thread: &Thread, pipeline: &FeaturePipeline) -> Result<(UserGraph, AssemblyReport)> {
    let mut graph = build_user_graph(thread);
    let messages = message_index(thread, pipeline.include_post);
    let (x, report) = assemble_features(&graph, pipeline.store, &messages, &pipeline.spec)?;
    graph.features = Some(x);
    Ok((graph, report))
}

pub fn prepare_threads(
    threads: &[Thread],
    pipeline: &FeaturePipeline,
) -> Result<(Vec<Sample>, AssemblyReport)> {
    let mut total = AssemblyReport::default();
    let mut samples = Vec::with_capacity(threads.len());
    for thread in threads {
        let (graph, report) = prepare_thread(thread, pipeline)?;
        total.fallback_rows += report.fallback_rows;
        total.unresolved_messages += report.unresolved_messages;
        samples.push(Sample::from_graph(&graph, pipeline.adjacency_mode)?);
    }
    Ok((samples, total))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    /// `None` keeps the whole thread.
    pub cutoff_minutes: Option<u64>,
    /// `None` when every graph was skipped.
    pub accuracy: Option<f64>,
    pub skipped_graphs: usize,
}

fn cutoff_key(c: Option<u64>) -> (bool, u64) {
    match c {
        Some(m) => (false, m),
        None => (true, 0),
    }
}

/// Accuracy of `model` on graphs rebuilt from each thread cut off after the
/// given number of minutes.
pub fn timeslice_curve(
    model: &Model,
    threads: &[Thread],
    cutoffs: &[Option<u64>],
    pipeline: &FeaturePipeline,
) -> Result<Vec<CurvePoint>> {
    if cutoffs.windows(2).any(|w| cutoff_key(w[0]) > cutoff_key(w[1])) {
        return Err(Error::Argument("cutoffs must be ascending".into()));
    }
    let mut curve = Vec::with_capacity(cutoffs.len());
    for &cutoff in cutoffs {
        let mut samples = Vec::new();
        let mut skipped = 0;
        for thread in threads {
            let sliced = match cutoff {
                Some(m) => time_slice(thread, m),
                None => thread.clone(),
            };
            let (graph, _) = prepare_thread(&sliced, pipeline)?;
            if graph.node_count() < pipeline.min_nodes.max(1) {
                skipped += 1;
                continue;
            }
            samples.push(Sample::from_graph(&graph, pipeline.adjacency_mode)?);
        }
        let accuracy = if samples.is_empty() {
            None
        } else {
            Some(evaluate(model, &samples)?)
        };
        log::info!("cutoff {cutoff:?}: accuracy {accuracy:?}, skipped {skipped}");
        curve.push(CurvePoint {
            cutoff_minutes: cutoff,
            accuracy,
            skipped_graphs: skipped,
        });
    }
    Ok(curve)
}

/// Unbounded cutoffs are written as `inf`, missing accuracies as `nan`.
pub fn write_curve_csv<W: Write>(mut w: W, curve: &[CurvePoint]) -> Result<()> {
    writeln!(w, "cutoff_minutes,accuracy,skipped_graphs")?;
    for p in curve {
        let cutoff = p.cutoff_minutes.map_or("inf".to_string(), |m| m.to_string());
        let acc = p.accuracy.map_or("nan".to_string(), |a| a.to_string());
        writeln!(w, "{cutoff},{acc},{}", p.skipped_graphs)?;
    }
    Ok(())
}
