use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use controversy_core::features::{assemble_features, EmbeddingStore, FeatureSpec};
use controversy_core::ingest::{
    dataset_stats, filter_min_comments, generate_synthetic, whitespace_token_counts, write_threads,
    AdjacencyMode, TokenSource, UserGraphRecord,
};
use controversy_core::models::{cluster_counts_for, AuxWeights, ModelConfig, ModelFamily};
use controversy_core::train::{
    argmax_label, evaluate, prepare_thread, split_balanced, timeslice_curve, train,
    write_curve_csv, FeaturePipeline, RunConfig, Sample,
};
use controversy_core::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::io::{self, file_stem, run_config_path, write_json};
use crate::{
    BuildGraphsArgs, EvalArgs, FeatureArgs, FeatureSource, GraphSource, PredictArgs, StatsArgs,
    SynthArgs, TimesliceArgs, TrainArgs, Verb,
};

/// Report line on stdout. A closed pipe is not an error for a batch tool.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

pub(crate) fn dispatch(verb: Verb) -> Result<()> {
    match verb {
        Verb::BuildGraphs(a) => build_graphs(&a),
        Verb::Stats(a) => stats(&a),
        Verb::Train(a) => train_cmd(&a),
        Verb::Eval(a) => eval(&a),
        Verb::Predict(a) => predict(&a),
        Verb::Synth(a) => synth(&a),
        Verb::Timeslice(a) => timeslice(&a),
    }
}

fn record_run<A: Serialize>(out: &Path, is_dir: bool, verb: &str, args: &A, extra: serde_json::Value) -> Result<()> {
    let mut value = json!({ "verb": verb, "args": args });
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.extend(more);
    }
    write_json(&run_config_path(out, is_dir), &value)
}

fn load_store(features: &FeatureArgs) -> Result<Option<EmbeddingStore>> {
    match &features.features {
        FeatureSource::None => Ok(None),
        FeatureSource::Store(path) => {
            let store = EmbeddingStore::load(path)?;
            log::info!("embedding store {}: {} vectors of dim {}", path.display(), store.len(), store.dim());
            Ok(Some(store))
        }
    }
}

fn pipeline<'a>(features: &FeatureArgs, store: Option<&'a EmbeddingStore>, mode: AdjacencyMode) -> FeaturePipeline<'a> {
    FeaturePipeline {
        adjacency_mode: mode,
        spec: FeatureSpec {
            fallback: features.fallback,
            mode: features.aggregate.into(),
            expected_dim: None,
        },
        store,
        include_post: !features.exclude_post,
        ..FeaturePipeline::default()
    }
}

fn read_filtered(path: &Path, min_comments: usize) -> Result<Vec<controversy_core::ingest::Thread>> {
    let threads = io::read_threads(path)?;
    let total = threads.len();
    let kept: Vec<_> = threads.into_iter().filter(|t| filter_min_comments(t, min_comments)).collect();
    log::info!("{}: kept {} of {total} threads (min comments {min_comments})", path.display(), kept.len());
    Ok(kept)
}

/// Samples from either a graph directory or a thread file. Graphs from a
/// directory carry their own features or get the fallback.
fn load_samples(
    source: &GraphSource,
    min_comments: usize,
    features: &FeatureArgs,
    mode: AdjacencyMode,
) -> Result<Vec<Sample>> {
    if let Some(dir) = &source.graphs {
        if features.features != FeatureSource::None {
            return Err(Error::Usage(
                "--features applies to --input; graph directories carry features from build-graphs".into(),
            ));
        }
        let spec = FeatureSpec {
            fallback: features.fallback,
            mode: features.aggregate.into(),
            expected_dim: None,
        };
        let mut samples = Vec::new();
        for mut g in io::read_graph_dir(dir)? {
            if g.features.is_none() {
                let (x, _) = assemble_features(&g, None, &HashMap::new(), &spec)?;
                g.features = Some(x);
            }
            samples.push(Sample::from_graph(&g, mode)?);
        }
        return Ok(samples);
    }
    let input = source.input.as_deref().ok_or_else(|| Error::Usage("need --graphs or --input".into()))?;
    let threads = read_filtered(input, min_comments)?;
    let store = load_store(features)?;
    let p = pipeline(features, store.as_ref(), mode);
    let mut samples = Vec::with_capacity(threads.len());
    let mut fallback_rows = 0;
    for t in &threads {
        let (g, report) = prepare_thread(t, &p)?;
        fallback_rows += report.fallback_rows;
        samples.push(Sample::from_graph(&g, mode)?);
    }
    log::info!("{} graphs, {fallback_rows} fallback feature rows", samples.len());
    Ok(samples)
}

fn feature_width(samples: &[Sample]) -> Result<usize> {
    let width = samples
        .first()
        .ok_or_else(|| Error::Dataset("no graphs to work on".into()))?
        .input
        .features
        .cols();
    if let Some(bad) = samples.iter().find(|s| s.input.features.cols() != width) {
        return Err(Error::Structural(format!(
            "graph {} has feature width {} but others have {width}",
            bad.id,
            bad.input.features.cols()
        )));
    }
    Ok(width)
}

fn check_width(samples: &[Sample], config: &ModelConfig) -> Result<()> {
    let width = feature_width(samples)?;
    if width != config.input_dim {
        return Err(Error::Config(format!(
            "features have width {width} but the model expects {}",
            config.input_dim
        )));
    }
    Ok(())
}

fn build_graphs(a: &BuildGraphsArgs) -> Result<()> {
    let threads = io::read_threads(&a.input)?;
    let total = threads.len();
    let store = load_store(&a.features)?;
    let p = pipeline(&a.features, store.as_ref(), AdjacencyMode::Binary);
    std::fs::create_dir_all(&a.out)?;
    let mut used = HashMap::new();
    let mut retained = 0;
    for t in threads.iter().filter(|t| filter_min_comments(t, a.min_comments)) {
        let stem = file_stem(&t.post_id);
        if let Some(prev) = used.insert(stem.clone(), t.post_id.clone()) {
            return Err(Error::Dataset(format!(
                "post ids `{prev}` and `{}` map to the same file name",
                t.post_id
            )));
        }
        let (graph, features_ref) = if store.is_some() {
            let (g, _) = prepare_thread(t, &p)?;
            let name = format!("{stem}.features.json");
            io::write_features(&a.out.join(&name), g.features.as_ref().expect("features attached"))?;
            (g, Some(name))
        } else {
            (controversy_core::ingest::build_user_graph(t), None)
        };
        write_json(&a.out.join(format!("{stem}.json")), &UserGraphRecord::from_graph(&graph, features_ref))?;
        retained += 1;
    }
    record_run(&a.out, true, "build-graphs", a, json!({}))?;
    say(&format!("retained {retained} dropped {}", total - retained));
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let threads = read_filtered(&a.input, a.min_comments)?;
    let items: Vec<_> = threads
        .into_iter()
        .map(|t| {
            let tokens = whitespace_token_counts(&t);
            (t, tokens)
        })
        .collect();
    let s = dataset_stats(&items, TokenSource::Whitespace);
    say(&serde_json::to_string_pretty(&s)?);
    if let Some(out) = &a.out {
        write_json(out, &s)?;
        record_run(out, false, "stats", a, json!({}))?;
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut threads = Vec::with_capacity(a.count);
    for k in 0..a.count {
        let seed = a.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        threads.push(generate_synthetic(a.kind.kind_at(k), a.n, seed)?);
    }
    let mut w = io::create(&a.out)?;
    write_threads(&mut w, &threads)?;
    w.flush()?;
    record_run(&a.out, false, "synth", a, json!({}))?;
    say(&format!("wrote {} threads to {}", threads.len(), a.out.display()));
    Ok(())
}

fn model_config(a: &TrainArgs, input_dim: usize, n_max: usize) -> ModelConfig {
    let family: ModelFamily = a.model.into();
    let mut cfg = match family {
        ModelFamily::HrlGcn => {
            let mut c = ModelConfig::hrl_gcn(input_dim, a.pool_layers, n_max);
            c.cluster_counts = cluster_counts_for(n_max, a.pool_layers, a.cluster_ratio);
            c
        }
        ModelFamily::ArlGat => ModelConfig::arl_gat(input_dim, a.att_layers, a.readout.into()),
    }
    .with_hidden(a.hidden)
    .with_mlp_hidden(a.mlp_hidden);
    cfg.adjacency_mode = a.adjacency.into();
    cfg.aux_loss_weights = AuxWeights {
        link: a.link_weight,
        entropy: a.entropy_weight,
    };
    cfg
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let run = RunConfig {
        lr: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        split_fraction: a.split,
        adjacency_mode: a.adjacency.into(),
        fallback: a.features.fallback,
        aggregate_mode: a.features.aggregate.into(),
        cluster_ratio: a.cluster_ratio,
        aux_loss_weights: AuxWeights {
            link: a.link_weight,
            entropy: a.entropy_weight,
        },
    };
    run.validate()?;
    let samples = load_samples(&a.source, a.min_comments, &a.features, run.adjacency_mode)?;
    let input_dim = feature_width(&samples)?;
    let split = split_balanced(samples, Sample::label, run.split_fraction, run.seed)?;
    log::info!(
        "split: {} train, {} val, {} dropped for balance",
        split.train.len(),
        split.val.len(),
        split.dropped
    );
    if split.val.is_empty() {
        return Err(Error::Dataset("validation split is empty; add graphs or lower --split".into()));
    }
    let n_max = split.train.iter().map(|s| s.input.node_count()).max().unwrap_or(1);
    let cfg = model_config(a, input_dim, n_max);
    cfg.validate()?;

    let outcome = train(&split.train, &split.val, &cfg, &run)?;
    std::fs::create_dir_all(&a.out)?;
    let mut w = io::create(&a.out.join(io::METRICS))?;
    outcome.history.write_csv(&mut w)?;
    w.flush()?;
    io::save_model(&a.out, &outcome.model)?;
    record_run(&a.out, true, "train", a, json!({ "run": run, "model": cfg }))?;

    let best_val = outcome.best_epoch.map(|e| outcome.history.val_acc[e - 1]);
    let summary = json!({
        "train_graphs": split.train.len(),
        "val_graphs": split.val.len(),
        "dropped": split.dropped,
        "best_epoch": outcome.best_epoch,
        "best_val_acc": best_val,
    });
    write_json(&a.out.join("summary.json"), &summary)?;
    say(&serde_json::to_string(&summary)?);
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = io::load_model(&a.run)?;
    let samples = load_samples(&a.source, a.min_comments, &a.features, model.config().adjacency_mode)?;
    check_width(&samples, model.config())?;
    let acc = evaluate(&model, &samples)?;
    let result = json!({ "graphs": samples.len(), "accuracy": acc });
    write_json(&a.out, &result)?;
    record_run(&a.out, false, "eval", a, json!({}))?;
    say(&serde_json::to_string(&result)?);
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let model = io::load_model(&a.run)?;
    let samples = load_samples(&a.source, a.min_comments, &a.features, model.config().adjacency_mode)?;
    check_width(&samples, model.config())?;
    let mut w = io::create(&a.out)?;
    writeln!(w, "post_id,label,p_non_controversial,p_controversial,predicted")?;
    for s in &samples {
        let p = model.predict(&s.input)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            s.id,
            s.label().index(),
            p[0],
            p[1],
            argmax_label(p).index()
        )?;
    }
    w.flush()?;
    record_run(&a.out, false, "predict", a, json!({}))?;
    say(&format!("wrote {} predictions to {}", samples.len(), a.out.display()));
    Ok(())
}

fn timeslice(a: &TimesliceArgs) -> Result<()> {
    let model = io::load_model(&a.run)?;
    let threads = read_filtered(&a.input, a.min_comments)?;
    let store = load_store(&a.features)?;
    let mut p = pipeline(&a.features, store.as_ref(), model.config().adjacency_mode);
    p.min_nodes = a.min_nodes;
    let want = model.config().input_dim;
    let got = store.as_ref().map_or(a.features.fallback.width(), EmbeddingStore::dim);
    if got != want {
        return Err(Error::Config(format!("features have width {got} but the model expects {want}")));
    }
    let curve = timeslice_curve(&model, &threads, &a.cutoffs.0, &p)?;
    let mut w = io::create(&a.out)?;
    write_curve_csv(&mut w, &curve)?;
    w.flush()?;
    record_run(&a.out, false, "timeslice", a, json!({}))?;
    say(&format!("wrote {} curve points to {}", curve.len(), a.out.display()));
    Ok(())
}
