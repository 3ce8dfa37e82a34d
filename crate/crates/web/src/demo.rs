use controversy_core::autodiff::{ParamStore, Tape, Tensor};
use controversy_core::ingest::{
    build_user_graph, generate_synthetic, polarized_split, synthetic_corpus, time_slice, SynthKind,
};
use controversy_core::layers::{attention_neighborhood, Activation, CardinalityScale, GatGcLayer, ReadoutMode};
use controversy_core::models::{ModelConfig, ModelFamily};
use controversy_core::train::{prepare_threads, split_balanced, train, FeaturePipeline, RunConfig, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const MAX_USERS: usize = 80;
pub const MAX_NEIGHBOURS: usize = 64;
pub const MAX_PER_KIND: usize = 60;
pub const MAX_EPOCHS: usize = 200;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Debug, Serialize)]
pub struct Explored {
    pub post_id: String,
    pub label: usize,
    pub users: Vec<String>,
    /// 0 or 1 for the two camps of a polarized thread; 0 for everyone otherwise.
    pub community: Vec<usize>,
    pub edges: Vec<(usize, usize, u32)>,
    /// Edges joining the two camps.
    pub cross_edges: usize,
    pub comments_kept: usize,
    pub comments_total: usize,
    /// Minutes from the post to its last comment.
    pub span_minutes: i64,
}

pub fn explore(kind: &str, n_users: usize, seed: u64, cutoff_minutes: f64) -> Result<Explored, String> {
    let kind: SynthKind = kind.parse().map_err(err)?;
    if n_users > MAX_USERS {
        return Err(format!("at most {MAX_USERS} users"));
    }
    let full = generate_synthetic(kind, n_users, seed).map_err(err)?;
    let thread = if cutoff_minutes.is_finite() && cutoff_minutes >= 0.0 {
        time_slice(&full, cutoff_minutes.floor() as u64)
    } else {
        full.clone()
    };
    let g = build_user_graph(&thread);
    let split = polarized_split(n_users);
    let community: Vec<usize> = g
        .users
        .iter()
        .map(|u| match (kind, u.strip_prefix('u').and_then(|k| k.parse::<usize>().ok())) {
            (SynthKind::Polarized, Some(k)) if k >= split => 1,
            _ => 0,
        })
        .collect();
    let cross_edges = g.edges.iter().filter(|e| community[e.i] != community[e.j]).count();
    let last = full.comments.iter().map(|c| c.created_utc).max().unwrap_or(full.created_utc);
    Ok(Explored {
        post_id: g.post_id.clone(),
        label: g.label.index(),
        users: g.users.clone(),
        community,
        edges: g.edges.iter().map(|e| (e.i, e.j, e.w)).collect(),
        cross_edges,
        comments_kept: thread.comments.len(),
        comments_total: full.comments.len(),
        span_minutes: (last - full.created_utc) / 60,
    })
}

pub fn explore_thread(kind: &str, n_users: usize, seed: u64, cutoff_minutes: f64) -> Result<String, String> {
    serde_json::to_string(&explore(kind, n_users, seed, cutoff_minutes)?).map_err(err)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct CardinalityPoint {
    pub neighbours: usize,
    /// Euclidean norm of the hub's output.
    pub scaled: f64,
    pub unscaled: f64,
}

/// A hub joined to `k` leaves, every node carrying the same feature, so the
/// neighbourhood is a multiset of one repeated vector.
pub fn cardinality_points(max_neighbours: usize, seed: u64) -> Result<Vec<CardinalityPoint>, String> {
    if !(1..=MAX_NEIGHBOURS).contains(&max_neighbours) {
        return Err(format!("neighbour count must be in 1..={MAX_NEIGHBOURS}"));
    }
    let mut params = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = GatGcLayer::new(&mut params, "gat", 2, 4, Activation::Elu, &mut rng);
    let hub_norm = |layer: &GatGcLayer, k: usize| -> Result<f64, String> {
        let n = k + 1;
        let mut a = Tensor::zeros(n, n);
        for j in 1..n {
            a.set(0, j, 1.0);
            a.set(j, 0, 1.0);
        }
        let nb = attention_neighborhood(&a);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(Tensor::from_rows(&vec![[1.0, -0.5]; n]));
        let out = layer.forward(&mut tape, &bound, &nb, x).map_err(err)?;
        Ok(tape.value(out).row(0).iter().map(|v| v * v).sum::<f64>().sqrt())
    };
    let mut points = Vec::with_capacity(max_neighbours);
    for k in 1..=max_neighbours {
        layer.scale = CardinalityScale::NeighborhoodSize;
        let scaled = hub_norm(&layer, k)?;
        layer.scale = CardinalityScale::Off;
        let unscaled = hub_norm(&layer, k)?;
        points.push(CardinalityPoint {
            neighbours: k,
            scaled,
            unscaled,
        });
    }
    Ok(points)
}

pub fn cardinality_curve(max_neighbours: usize, seed: u64) -> Result<String, String> {
    serde_json::to_string(&cardinality_points(max_neighbours, seed)?).map_err(err)
}

#[derive(Debug, Serialize)]
pub struct TrainCurve {
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub train_graphs: usize,
    pub val_graphs: usize,
}

/// Structure-only training on a fresh synthetic corpus with small widths.
pub fn run_training(
    family: &str,
    per_kind: usize,
    n_users: usize,
    epochs: usize,
    seed: u64,
) -> Result<TrainCurve, String> {
    let family: ModelFamily = family.parse().map_err(err)?;
    if !(2..=MAX_PER_KIND).contains(&per_kind) {
        return Err(format!("threads per kind must be in 2..={MAX_PER_KIND}"));
    }
    if n_users > MAX_USERS || epochs > MAX_EPOCHS {
        return Err(format!("at most {MAX_USERS} users and {MAX_EPOCHS} epochs"));
    }
    let threads = synthetic_corpus(per_kind, n_users, seed).map_err(err)?;
    let (samples, _) = prepare_threads(&threads, &FeaturePipeline::default()).map_err(err)?;
    let run = RunConfig::default().with_seed(seed).with_epochs(epochs);
    let split = split_balanced(samples, Sample::label, run.split_fraction, seed).map_err(err)?;
    let n_max = split.train.iter().map(|s| s.input.node_count()).max().unwrap_or(1);
    let cfg = match family {
        ModelFamily::HrlGcn => ModelConfig::hrl_gcn(1, 1, n_max),
        ModelFamily::ArlGat => ModelConfig::arl_gat(1, 2, ReadoutMode::Sum),
    }
    .with_hidden(16)
    .with_mlp_hidden(16);
    let outcome = train(&split.train, &split.val, &cfg, &run).map_err(err)?;
    Ok(TrainCurve {
        train_loss: outcome.history.train_loss,
        train_acc: outcome.history.train_acc,
        val_acc: outcome.history.val_acc,
        best_epoch: outcome.best_epoch,
        train_graphs: split.train.len(),
        val_graphs: split.val.len(),
    })
}

pub fn train_curve(family: &str, per_kind: usize, n_users: usize, epochs: usize, seed: u64) -> Result<String, String> {
    serde_json::to_string(&run_training(family, per_kind, n_users, epochs, seed)?).map_err(err)
}
