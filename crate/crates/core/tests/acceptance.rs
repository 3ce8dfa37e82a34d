//! End-to-end acceptance checks. Runs without the test harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use controversy_core::autodiff::{Bound, ParamStore, Tape, Tensor, Var};
use controversy_core::ingest::{
    build_user_graph, dataset_stats, generate_synthetic, parse_threads, synthetic_corpus,
    whitespace_token_counts, AdjacencyMode, Comment, Label, SynthKind, Thread, DELETED,
};
use controversy_core::layers::{
    attention_neighborhood, pool_with_assignment, pooling_losses,
    readout_concat, Activation, CardinalityScale, DiffPoolLayer, GatGcLayer, GcnLayer,
    ReadoutMode,
};
use controversy_core::models::{GraphInput, Model, ModelConfig};
use controversy_core::train::{
    evaluate, prepare_threads, split_balanced, timeslice_curve, train, FeaturePipeline,
    RunConfig, Sample,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

fn random_adjacency(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Tensor {
    let mut a = Tensor::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
    }
    a
}

fn random_input(rng: &mut ChaCha8Rng, n: usize, e: usize) -> GraphInput {
    let a = random_adjacency(rng, n, 0.4);
    let x = random_tensor(rng, n, e, 1.0);
    let label = if rng.gen_bool(0.5) {
        Label::Controversial
    } else {
        Label::NonControversial
    };
    GraphInput::from_parts(a, x, label, AdjacencyMode::Binary).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

/// Sum of `y ∘ W` for a fixed random `W`, so every output entry matters.
fn probe(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let (r, c) = tape.shape(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    let w = tape.constant(random_tensor(&mut rng, r, c, 1.0));
    let prod = tape.mul(y, w).unwrap();
    tape.sum(prod).unwrap()
}

const FD_STEP: f64 = 1e-5;

/// Worst relative error between the tape gradient and central differences, over
/// every entry of every tensor in `params`.
fn fd_params(params: &ParamStore, f: &dyn Fn(&mut Tape, &Bound) -> Var) -> f64 {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = f(&mut tape, &bound);
    let mut grads = tape.backward(loss).unwrap();
    let analytic = bound.collect(params, &mut grads);

    let eval = |p: &ParamStore| {
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let out = f(&mut tape, &bound);
        tape.value(out).get(0, 0)
    };
    let centre = eval(params);
    let mut probe_store = params.clone();
    let mut worst: f64 = 0.0;
    let ids: Vec<_> = params.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        for idx in 0..params.get(id).len() {
            let orig = params.get(id).data()[idx];
            probe_store.get_mut(id).data_mut()[idx] = orig + FD_STEP;
            let plus = eval(&probe_store);
            probe_store.get_mut(id).data_mut()[idx] = orig - FD_STEP;
            let minus = eval(&probe_store);
            probe_store.get_mut(id).data_mut()[idx] = orig;
            let a = analytic[k].data()[idx];
            let mut err = rel_err(a, (plus - minus) / (2.0 * FD_STEP));
            // A relu kink inside the stencil shows up as disagreeing one-sided
            // slopes; the tape gradient must then match one of them.
            let right = (plus - centre) / FD_STEP;
            let left = (centre - minus) / FD_STEP;
            if rel_err(left, right) > KINK_GAP {
                err = err.min(rel_err(a, left).min(rel_err(a, right)));
            }
            worst = worst.max(err);
        }
    }
    worst
}

/// One-sided slopes further apart than this mean the stencil straddles a kink.
const KINK_GAP: f64 = 1e-3;

fn single(name: &str, t: Tensor) -> ParamStore {
    let mut p = ParamStore::new();
    p.add(name, t);
    p
}

/// Worst error of each primitive op at one seed.
fn primitive_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.gen_range(1..=6);
    let c = rng.gen_range(1..=6);
    let k = rng.gen_range(1..=6);
    let mut out = Vec::new();
    let ps = random_tensor(&mut rng, r, c, 1.5);
    let other = random_tensor(&mut rng, r, c, 1.5);
    let right = random_tensor(&mut rng, c, k, 1.5);
    let row = random_tensor(&mut rng, 1, c, 1.5);
    let factors: Vec<f64> = (0..r).map(|_| rng.gen_range(0.5..4.0)).collect();
    let mask = {
        let mut m = random_adjacency(&mut rng, r.max(c), 0.5);
        for i in 0..m.rows() {
            m.set(i, i, 1.0);
        }
        m
    };
    let square = {
        let mut s = random_tensor(&mut rng, r, r, 1.0).map(f64::abs);
        s = s.add(&s.transpose()).unwrap();
        for i in 0..r {
            s.set(i, i, 0.0);
        }
        s
    };
    let labels: Vec<usize> = (0..r).map(|_| rng.gen_range(0..2)).collect();

    type Unary = fn(&mut Tape, Var) -> Var;
    let unary: [(&'static str, Unary); 13] = [
        ("relu", |t, x| t.relu(x).unwrap()),
        ("leaky_relu", |t, x| t.leaky_relu(x, 0.2).unwrap()),
        ("elu", |t, x| t.elu(x).unwrap()),
        ("sigmoid", |t, x| t.sigmoid(x).unwrap()),
        ("tanh", |t, x| t.tanh(x).unwrap()),
        ("row_softmax", |t, x| t.row_softmax(x).unwrap()),
        ("reduce_sum_rows", |t, x| t.reduce_sum_rows(x).unwrap()),
        ("reduce_mean_rows", |t, x| t.reduce_mean_rows(x).unwrap()),
        ("transpose", |t, x| t.transpose(x).unwrap()),
        ("frobenius_norm", |t, x| t.frobenius_norm(x).unwrap()),
        ("sum", |t, x| t.sum(x).unwrap()),
        ("scale", |t, x| t.scale(x, -1.7).unwrap()),
        ("row_entropy_mean", |t, x| {
            let s = t.row_softmax(x).unwrap();
            t.row_entropy_mean(s).unwrap()
        }),
    ];
    for (name, op) in unary {
        let p = single("x", ps.clone());
        let err = fd_params(&p, &|t, b| {
            let y = op(t, b.var(p.ids().next().unwrap()));
            probe(t, y, seed)
        });
        out.push((name, err));
    }

    let mut pair = ParamStore::new();
    let x = pair.add("x", ps.clone());
    let y = pair.add("y", other);
    for (name, op) in [
        ("add", 0usize),
        ("sub", 1),
        ("mul", 2),
        ("concat_cols", 3),
    ] {
        let err = fd_params(&pair, &|t, b| {
            let (a, bb) = (b.var(x), b.var(y));
            let v = match op {
                0 => t.add(a, bb),
                1 => t.sub(a, bb),
                2 => t.mul(a, bb),
                _ => t.concat_cols(&[a, bb]),
            }
            .unwrap();
            probe(t, v, seed)
        });
        out.push((name, err));
    }

    let mut mm = ParamStore::new();
    let l = mm.add("l", ps.clone());
    let rr = mm.add("r", right);
    out.push((
        "matmul",
        fd_params(&mm, &|t, b| {
            let v = t.matmul(b.var(l), b.var(rr)).unwrap();
            probe(t, v, seed)
        }),
    ));

    let mut ar = ParamStore::new();
    let m = ar.add("m", ps.clone());
    let bias = ar.add("b", row);
    out.push((
        "add_row",
        fd_params(&ar, &|t, b| {
            let v = t.add_row(b.var(m), b.var(bias)).unwrap();
            probe(t, v, seed)
        }),
    ));

    let p = single("x", ps.clone());
    let id = p.ids().next().unwrap();
    out.push((
        "scale_rows",
        fd_params(&p, &|t, b| {
            let v = t.scale_rows(b.var(id), factors.clone()).unwrap();
            probe(t, v, seed)
        }),
    ));
    let start = rng.gen_range(0..r);
    let len = rng.gen_range(1..=r - start);
    out.push((
        "slice_rows",
        fd_params(&p, &|t, b| {
            let v = t.slice_rows(b.var(id), start, len).unwrap();
            probe(t, v, seed)
        }),
    ));
    let sq_mask = Tensor::new(
        r,
        c,
        (0..r * c).map(|q| mask.get(q / c, q % c)).collect(),
    )
    .unwrap();
    let mut sq_mask = sq_mask;
    for i in 0..r {
        // keep at least one live entry per row
        sq_mask.set(i, i % c, 1.0);
    }
    out.push((
        "masked_row_softmax",
        fd_params(&p, &|t, b| {
            let v = t.masked_row_softmax(b.var(id), &sq_mask).unwrap();
            probe(t, v, seed)
        }),
    ));
    let logits = single("z", random_tensor(&mut rng, r, 2, 2.0));
    let zid = logits.ids().next().unwrap();
    out.push((
        "cross_entropy",
        fd_params(&logits, &|t, b| t.cross_entropy(b.var(zid), &labels).unwrap()),
    ));
    let adj = single("a", square);
    let aid = adj.ids().next().unwrap();
    out.push((
        "normalize_adjacency",
        fd_params(&adj, &|t, b| {
            let v = t.normalize_adjacency(b.var(aid)).unwrap();
            probe(t, v, seed)
        }),
    ));
    out
}

fn randomize_biases(params: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let name = params.name(id).to_string();
        if name.ends_with(".bias") || name.starts_with("head.b") {
            for v in params.get_mut(id).data_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }
}

/// Worst error of each layer and of both models on one random ≤ 6-node graph.
fn layer_and_model_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a7e5);
    let n = rng.gen_range(1..=6);
    let e = rng.gen_range(1..=4);
    let input = random_input(&mut rng, n, e);
    let mut out = Vec::new();

    let mut p = ParamStore::new();
    let h = p.add("h", input.features.clone());
    let gcn = GcnLayer::new(&mut p, "gcn", e, 3, Activation::Relu, true, &mut rng);
    randomize_biases(&mut p, &mut rng);
    let a_norm = input.adjacency_norm.clone();
    out.push((
        "gcn_layer",
        fd_params(&p, &|t, b| {
            let a = t.constant(a_norm.clone());
            let y = gcn.forward(t, b, a, b.var(h)).unwrap();
            probe(t, y, seed)
        }),
    ));

    let mut p = ParamStore::new();
    let h = p.add("h", input.features.clone());
    let clusters = rng.gen_range(2..=3);
    let pool = DiffPoolLayer::new(&mut p, "pool", 2, e, 3, clusters, true, &mut rng);
    randomize_biases(&mut p, &mut rng);
    let adjacency = input.adjacency.clone();
    out.push((
        "diffpool_layer",
        fd_params(&p, &|t, b| {
            let a = t.constant(adjacency.clone());
            let an = t.constant(a_norm.clone());
            let o = pool.forward(t, b, a, an, b.var(h)).unwrap();
            let f = probe(t, o.features, seed);
            let g = probe(t, o.adjacency, seed + 1);
            let s = t.add(f, g).unwrap();
            let s = t.add(s, o.link_loss).unwrap();
            t.add(s, o.entropy_loss).unwrap()
        }),
    ));

    let mut p = ParamStore::new();
    let h = p.add("h", input.features.clone());
    let gat = GatGcLayer::new(&mut p, "gat", e, 3, Activation::Elu, &mut rng);
    let nb = input.neighborhood.clone();
    out.push((
        "gat_gc_layer",
        fd_params(&p, &|t, b| {
            let y = gat.forward(t, b, &nb, b.var(h)).unwrap();
            probe(t, y, seed)
        }),
    ));

    let mut p = ParamStore::new();
    let h0 = p.add("h0", input.features.clone());
    let h1 = p.add("h1", random_tensor(&mut rng, n, 2, 1.0));
    for (name, mode) in [("readout_sum", ReadoutMode::Sum), ("readout_mean", ReadoutMode::Mean)] {
        out.push((
            name,
            fd_params(&p, &|t, b| {
                let z = readout_concat(t, &[b.var(h0), b.var(h1)], mode).unwrap();
                probe(t, z, seed)
            }),
        ));
    }

    let pool_layers = rng.gen_range(1..=2);
    let hrl = ModelConfig::hrl_gcn(e, pool_layers, 6).with_hidden(4).with_mlp_hidden(4);
    let arl = ModelConfig::arl_gat(e, 2, ReadoutMode::Sum).with_hidden(4).with_mlp_hidden(4);
    for (name, cfg) in [("hrl_gcn_model", hrl), ("arl_gat_model", arl)] {
        let mut model = Model::new(cfg, seed).unwrap();
        randomize_biases(model.params_mut(), &mut rng);
        let m = model.clone();
        let inp = input.clone();
        out.push((
            name,
            fd_params(model.params(), &|t, b| {
                let o = m.forward(t, b, &inp).unwrap();
                controversy_core::models::total_loss(
                    t,
                    o.logits,
                    inp.label,
                    &o.aux,
                    m.config().aux_loss_weights,
                )
                .unwrap()
            }),
        ));
    }
    out
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst_prim: BTreeMap<&str, f64> = BTreeMap::new();
    let mut worst_layer: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in 0..100 {
        for (name, err) in primitive_errors(seed) {
            let w = worst_prim.entry(name).or_insert(0.0);
            *w = w.max(err);
        }
        for (name, err) in layer_and_model_errors(seed) {
            let w = worst_layer.entry(name).or_insert(0.0);
            *w = w.max(err);
        }
    }
    let elapsed = start.elapsed();
    let bad_prim: Vec<_> = worst_prim.iter().filter(|(_, e)| **e >= 1e-4).collect();
    let bad_layer: Vec<_> = worst_layer.iter().filter(|(_, e)| **e >= 1e-3).collect();
    let prim_max = worst_prim.values().cloned().fold(0.0, f64::max);
    let layer_max = worst_layer.values().cloned().fold(0.0, f64::max);
    outcome(
        bad_prim.is_empty() && bad_layer.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{} primitives worst {prim_max:.2e} (< 1e-4), {} layers/models worst {layer_max:.2e} (< 1e-3), 100 seeds in {:.1}s (< 60s){}",
            worst_prim.len(),
            worst_layer.len(),
            elapsed.as_secs_f64(),
            if bad_prim.is_empty() && bad_layer.is_empty() {
                String::new()
            } else {
                format!("; failing {bad_prim:?} {bad_layer:?}")
            }
        ),
    )
}

fn permute_input(input: &GraphInput, perm: &[usize]) -> GraphInput {
    GraphInput::from_parts(
        input.adjacency.permute_symmetric(perm),
        input.features.permute_rows(perm),
        input.label,
        AdjacencyMode::Binary,
    )
    .unwrap()
}

fn permutation_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst: f64 = 0.0;
    for g in 0..50 {
        let n = rng.gen_range(5..=40);
        let input = random_input(&mut rng, n, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted = permute_input(&input, &perm);
        let configs = [
            ModelConfig::hrl_gcn(4, 1 + g % 2, 40),
            ModelConfig::arl_gat(4, 2, ReadoutMode::Sum),
            ModelConfig::arl_gat(4, 2, ReadoutMode::Mean),
        ];
        for cfg in configs {
            let model = Model::new(cfg, g as u64).unwrap();
            let a = model.logits(&input).unwrap();
            let b = model.logits(&permuted).unwrap();
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
    }
    outcome(
        worst < 1e-6,
        format!("50 graphs of 5-40 nodes, max-abs logit change {worst:.2e} (< 1e-6)"),
    )
}

fn brute_pool(a: &Tensor, s: &Tensor, h: &Tensor) -> (Tensor, Tensor) {
    let (m, c) = s.shape();
    let d = h.cols();
    let mut a_next = Tensor::zeros(c, c);
    for p in 0..c {
        for q in 0..c {
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    acc += s.get(i, p) * a.get(i, j) * s.get(j, q);
                }
            }
            a_next.set(p, q, acc);
        }
    }
    let mut h_next = Tensor::zeros(c, d);
    for p in 0..c {
        for f in 0..d {
            h_next.set(p, f, (0..m).map(|i| s.get(i, p) * h.get(i, f)).sum());
        }
    }
    (a_next, h_next)
}

fn diffpool_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut worst_prod: f64 = 0.0;
    let mut worst_rows: f64 = 0.0;
    let mut entropy_ok = true;
    for _ in 0..200 {
        let m = rng.gen_range(1..=8);
        let c = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=8);
        let mut a = random_tensor(&mut rng, m, m, 2.0).map(f64::abs);
        a = a.add(&a.transpose()).unwrap();
        let logits = random_tensor(&mut rng, m, c, 3.0);
        let h = random_tensor(&mut rng, m, d, 2.0);
        let mut tape = Tape::new();
        let av = tape.constant(a.clone());
        let lv = tape.constant(logits);
        let sv = tape.row_softmax(lv).unwrap();
        let hv = tape.constant(h.clone());
        let (an, hn) = pool_with_assignment(&mut tape, av, sv, hv).unwrap();
        let (_, ent) = pooling_losses(&mut tape, av, sv).unwrap();
        let s = tape.value(sv).clone();
        let (ea, eh) = brute_pool(&a, &s, &h);
        worst_prod = worst_prod
            .max(tape.value(an).max_abs_diff(&ea))
            .max(tape.value(hn).max_abs_diff(&eh));
        for i in 0..m {
            worst_rows = worst_rows.max((s.row(i).iter().sum::<f64>() - 1.0).abs());
        }
        let ent = tape.value(ent).get(0, 0);
        entropy_ok &= ent >= 0.0 && ent <= (c as f64).ln() + 1e-12;
    }
    // Assignments produced by real pooling layers on random graphs.
    for seed in 0..50 {
        let n = rng.gen_range(2..=8);
        let input = random_input(&mut rng, n, 3);
        let c = rng.gen_range(2..=n.max(2));
        let mut params = ParamStore::new();
        let layer = DiffPoolLayer::new(&mut params, "p", 3, 3, 8, c, true, &mut rng);
        randomize_biases(&mut params, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let a = tape.constant(input.adjacency.clone());
        let an = tape.constant(input.adjacency_norm.clone());
        let h = tape.constant(input.features.clone());
        let out = layer.forward(&mut tape, &bound, a, an, h).unwrap();
        let s = tape.value(out.assignment);
        for i in 0..s.rows() {
            worst_rows = worst_rows.max((s.row(i).iter().sum::<f64>() - 1.0).abs());
        }
        let ent = tape.value(out.entropy_loss).get(0, 0);
        entropy_ok &= ent >= 0.0 && ent <= (c as f64).ln() + 1e-12;
    }
    outcome(
        worst_prod <= 1e-12 && worst_rows <= 1e-12 && entropy_ok,
        format!(
            "SᵀAS and SᵀH′ vs brute force max diff {worst_prod:.2e} (<= 1e-12), row-sum error {worst_rows:.2e} (<= 1e-12), entropy within [0, ln c]: {entropy_ok}"
        ),
    )
}

fn cardinality_preservation() -> Outcome {
    // Node 0 next to node 1, with node 2 either isolated or a second identical neighbour.
    let one = Tensor::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
    let two = Tensor::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    let h = Tensor::from_rows(&[[0.3, -0.7], [0.3, -0.7], [0.3, -0.7]]);
    let node0 = |adj: &Tensor, scale: CardinalityScale| {
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = GatGcLayer::new(&mut params, "gat", 2, 4, Activation::Elu, &mut rng);
        layer.scale = scale;
        let nb = attention_neighborhood(adj);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let hv = tape.constant(h.clone());
        let out = layer.forward(&mut tape, &bound, &nb, hv).unwrap();
        tape.value(out).row(0).to_vec()
    };
    let diff = |s| {
        let (a, b) = (node0(&one, s), node0(&two, s));
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let scaled = diff(CardinalityScale::NeighborhoodSize);
    let off = diff(CardinalityScale::Off);
    outcome(
        scaled > 1e-8 && off <= 1e-12,
        format!("duplicate neighbour changes node output by {scaled:.3e} (> 1e-8) with scaling, {off:.1e} without"),
    )
}

/// Unordered author pairs with multiplicities, straight from the comment list.
fn brute_edges(thread: &Thread) -> BTreeMap<(String, String), u32> {
    let key = |k: usize, c: &Comment| {
        if c.author == DELETED || c.body == DELETED {
            format!("deleted#{k}")
        } else {
            c.author.clone()
        }
    };
    let post_author = if thread.author == DELETED {
        "deleted#post".to_string()
    } else {
        thread.author.clone()
    };
    let mut edges = BTreeMap::new();
    for (k, c) in thread.comments.iter().enumerate() {
        let me = key(k, c);
        let parent = if c.parent_id == thread.post_id {
            Some(post_author.clone())
        } else {
            thread
                .comments
                .iter()
                .enumerate()
                .find(|(_, p)| p.comment_id == c.parent_id)
                .map(|(j, p)| key(j, p))
        };
        let Some(other) = parent else { continue };
        if other == me {
            continue;
        }
        let pair = if me < other { (me, other) } else { (other, me) };
        *edges.entry(pair).or_insert(0) += 1;
    }
    edges
}

fn random_thread(rng: &mut ChaCha8Rng, t: usize) -> Thread {
    let post_id = format!("r{t}");
    let authors: Vec<String> = (0..rng.gen_range(1..8)).map(|k| format!("a{k}")).collect();
    let mut comments: Vec<Comment> = Vec::new();
    for k in 0..rng.gen_range(0..40) {
        let parent_id = if comments.is_empty() || rng.gen_bool(0.3) {
            post_id.clone()
        } else {
            comments[rng.gen_range(0..comments.len())].comment_id.clone()
        };
        let author = if rng.gen_bool(0.05) {
            DELETED.to_string()
        } else {
            authors.choose(rng).unwrap().clone()
        };
        let body = if rng.gen_bool(0.05) { DELETED } else { "text" };
        comments.push(Comment {
            comment_id: format!("{post_id}_{k}"),
            parent_id,
            author,
            created_utc: 100 + k as i64,
            body: body.into(),
        });
    }
    comments.shuffle(rng);
    Thread {
        post_id,
        subreddit: "s".into(),
        author: if rng.gen_bool(0.1) {
            DELETED.to_string()
        } else {
            authors[0].clone()
        },
        created_utc: 0,
        title: String::new(),
        selftext: String::new(),
        label: Label::Controversial,
        comments,
    }
}

fn graph_building_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut threads = Vec::new();
    for k in 0..50u64 {
        threads.push(generate_synthetic(SynthKind::Polarized, rng.gen_range(4..30), k).unwrap());
        threads.push(generate_synthetic(SynthKind::Consensus, rng.gen_range(4..30), k).unwrap());
    }
    for t in 0..100 {
        threads.push(random_thread(&mut rng, t));
    }
    let mut mismatches = 0;
    for thread in &threads {
        let g = build_user_graph(thread);
        let mut ours = BTreeMap::new();
        for e in &g.edges {
            let (a, b) = (g.users[e.i].clone(), g.users[e.j].clone());
            ours.insert(if a < b { (a, b) } else { (b, a) }, e.w);
        }
        if ours != brute_edges(thread) || g.validate().is_err() {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{} threads, {mismatches} mismatching edge multisets", threads.len()),
    )
}

fn synthetic_task(seed: u64) -> (Vec<Sample>, Vec<Sample>, usize) {
    let threads = synthetic_corpus(200, 12, seed).unwrap();
    let set = prepare_threads(&threads, &FeaturePipeline::default()).unwrap().0;
    let n_max = set.iter().map(|s| s.input.node_count()).max().unwrap();
    let split = split_balanced(set, Sample::label, 0.8, seed).unwrap();
    (split.train, split.val, n_max)
}

fn synthetic_separability() -> Outcome {
    let (train_set, val_set, n_max) = synthetic_task(7);
    let run = RunConfig::default().with_seed(1);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfg, target) in [
        ("hrl-gcn", ModelConfig::hrl_gcn(1, 1, n_max), 0.90),
        ("arl-gat(sum)", ModelConfig::arl_gat(1, 2, ReadoutMode::Sum), 0.85),
    ] {
        let start = Instant::now();
        let out = train(&train_set, &val_set, &cfg, &run).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let acc = evaluate(&out.model, &val_set).unwrap();
        pass &= acc >= target && secs < 300.0;
        parts.push(format!("{name} val {acc:.3} (>= {target}) in {secs:.1}s"));
    }
    outcome(
        pass,
        format!("{} train / {} val graphs: {}", train_set.len(), val_set.len(), parts.join(", ")),
    )
}

fn overfit() -> Outcome {
    let threads = synthetic_corpus(8, 12, 16).unwrap();
    let set = prepare_threads(&threads, &FeaturePipeline::default()).unwrap().0;
    let n_max = set.iter().map(|s| s.input.node_count()).max().unwrap();
    let run = RunConfig::default().with_seed(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfg) in [
        ("hrl-gcn", ModelConfig::hrl_gcn(1, 1, n_max)),
        ("arl-gat", ModelConfig::arl_gat(1, 2, ReadoutMode::Sum)),
    ] {
        let out = train(&set, &set, &cfg, &run).unwrap();
        let first = out.history.train_acc.iter().position(|&a| a == 1.0);
        pass &= first.is_some();
        parts.push(match first {
            Some(e) => format!("{name} 100% at epoch {}", e + 1),
            None => format!(
                "{name} best {:.3}",
                out.history.train_acc.iter().cloned().fold(0.0, f64::max)
            ),
        });
    }
    outcome(pass, format!("16 graphs: {}", parts.join(", ")))
}

fn timeslice_trend() -> Outcome {
    let mut at_cutoff = 0.0;
    let mut at_full = 0.0;
    let pipeline = FeaturePipeline::default();
    let seeds = 20;
    for seed in 0..seeds {
        let threads = synthetic_corpus(50, 12, 1000 + seed).unwrap();
        let split = split_balanced(threads, |t| t.label, 0.8, seed).unwrap();
        let train_set = prepare_threads(&split.train, &pipeline).unwrap().0;
        let val_set = prepare_threads(&split.val, &pipeline).unwrap().0;
        let n_max = train_set.iter().map(|s| s.input.node_count()).max().unwrap();
        let cfg = ModelConfig::hrl_gcn(1, 1, n_max);
        let run = RunConfig::default().with_epochs(30).with_seed(seed);
        let out = train(&train_set, &val_set, &cfg, &run).unwrap();
        let curve = timeslice_curve(&out.model, &split.val, &[Some(10), None], &pipeline).unwrap();
        at_cutoff += curve[0].accuracy.unwrap_or(0.5);
        at_full += curve[1].accuracy.unwrap();
    }
    at_cutoff /= seeds as f64;
    at_full /= seeds as f64;
    outcome(
        at_full > at_cutoff,
        format!("mean accuracy over {seeds} seeds: full {at_full:.3} > 10 min {at_cutoff:.3}"),
    )
}

fn load_corpus(path: &Path) -> Vec<(Thread, Vec<usize>)> {
    let threads = parse_threads(BufReader::new(File::open(path).unwrap())).unwrap();
    threads
        .into_iter()
        .map(|t| {
            let tokens = whitespace_token_counts(&t);
            (t, tokens)
        })
        .collect()
}

fn corpus_stats() -> Outcome {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stats_fixture.jsonl");
    let s = dataset_stats(&load_corpus(&fixture), Default::default());
    // Frozen from tests/fixtures/stats_oracle.py.
    let expected = (20, 4.7, 6.55, 39.29770992366412, 6.870229007633588);
    let got = (
        s.post_count,
        s.avg_users_per_post,
        s.avg_comments_per_post,
        s.avg_words_per_comment,
        s.pct_comments_tokens_ge_256,
    );
    let mut pass = got == expected;
    let mut detail = format!("fixture {got:?} vs {expected:?}");
    match std::env::var_os("CONTROVERSY_AM_CORPUS") {
        Some(path) => {
            let am = dataset_stats(&load_corpus(Path::new(&path)), Default::default());
            let am_ok = am.post_count == 3305
                && am.avg_users_per_post.round() == 72.0
                && am.avg_comments_per_post.round() == 144.0
                && am.avg_words_per_comment.round() == 41.0
                && (am.pct_comments_tokens_ge_256 * 100.0).round() == 268.0;
            pass &= am_ok;
            detail += &format!("; AM corpus {am:?}");
        }
        None => detail += "; AM corpus not present (set CONTROVERSY_AM_CORPUS), row check skipped",
    }
    outcome(pass, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient oracle", gradient_oracle),
        ("permutation invariance", permutation_invariance),
        ("pooling algebra oracle", diffpool_algebra),
        ("cardinality preservation", cardinality_preservation),
        ("graph-building oracle", graph_building_oracle),
        ("synthetic separability", synthetic_separability),
        ("overfit check", overfit),
        ("time-slice trend", timeslice_trend),
        ("corpus statistics", corpus_stats),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
