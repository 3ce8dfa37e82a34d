//! Whole-graph classifiers: hierarchical pooling (HRL-GCN) and attention with
//! layer-wise readout (ARL-GAT), each topped by an MLP head.

mod config;
mod head;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Bound, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::ingest::{AdjacencyMode, Label, UserGraph};
use crate::layers::{
    attention_neighborhood, normalize_adjacency, readout_concat, DiffPoolLayer, GatGcLayer,
    Neighborhood,
};

pub use config::{cluster_counts_for, AuxWeights, ModelConfig, ModelFamily, DEFAULT_CLUSTER_RATIO};
pub use head::{MlpHead, CLASSES};

/// A graph prepared for the forward pass.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub adjacency: Tensor,
    pub adjacency_norm: Tensor,
    pub neighborhood: Neighborhood,
    pub features: Tensor,
    pub label: Label,
}

impl GraphInput {
    pub fn new(graph: &UserGraph, mode: AdjacencyMode) -> Result<Self> {
        if graph.node_count() == 0 {
            return Err(Error::Argument(format!("graph {} has no nodes", graph.post_id)));
        }
        let features = graph
            .features
            .as_ref()
            .ok_or_else(|| Error::Argument(format!("graph {} has no features", graph.post_id)))?
            .as_tensor()
            .clone();
        Self::from_parts(graph.adjacency(mode), features, graph.label, mode)
    }

    pub fn from_parts(
        adjacency: Tensor,
        features: Tensor,
        label: Label,
        mode: AdjacencyMode,
    ) -> Result<Self> {
        if adjacency.rows() == 0 {
            return Err(Error::Argument("graph has no nodes".into()));
        }
        if features.rows() != adjacency.rows() {
            return Err(Error::shape("graph_input", adjacency.shape(), features.shape()));
        }
        Ok(GraphInput {
            adjacency_norm: normalize_adjacency(&adjacency, mode)?,
            neighborhood: attention_neighborhood(&adjacency),
            adjacency,
            features,
            label,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AuxLoss {
    pub link: Var,
    pub entropy: Var,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub logits: Var,
    /// Whole-graph embedding `z_G`, `1×embedding_dim`.
    pub embedding: Var,
    /// Pooling regularizers, one per learned assignment (empty for ARL-GAT).
    pub aux: Vec<AuxLoss>,
    /// Node count entering each level, ending with the final single node (HRL-GCN).
    pub level_sizes: Vec<usize>,
    /// Assignment matrix of each pooling level (HRL-GCN).
    pub assignments: Vec<Var>,
    pub degenerate_pooling: bool,
}

#[derive(Clone, Debug, PartialEq)]
enum Arch {
    Hrl { pools: Vec<DiffPoolLayer> },
    Arl { layers: Vec<GatGcLayer> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    arch: Arch,
    head: MlpHead,
}

impl Model {
    /// Seeded Glorot initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let hidden = config.hidden_dim;
        let arch = match config.family {
            ModelFamily::HrlGcn => {
                let mut clusters = config.cluster_counts.clone();
                clusters.push(1);
                let pools = clusters
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        let d_in = if k == 0 { config.input_dim } else { hidden };
                        DiffPoolLayer::new(
                            &mut params,
                            &format!("pool{k}"),
                            config.gcn_per_pool,
                            d_in,
                            hidden,
                            c,
                            config.gcn_bias,
                            &mut rng,
                        )
                    })
                    .collect();
                Arch::Hrl { pools }
            }
            ModelFamily::ArlGat => {
                let layers = (0..config.att_layers)
                    .map(|k| {
                        let d_in = if k == 0 { config.input_dim } else { hidden };
                        let mut layer = GatGcLayer::new(
                            &mut params,
                            &format!("gat{k}"),
                            d_in,
                            hidden,
                            config.attention_activation,
                            &mut rng,
                        );
                        layer.slope = config.leaky_slope;
                        layer.scale = config.cardinality_scale;
                        layer
                    })
                    .collect();
                Arch::Arl { layers }
            }
        };
        let head = MlpHead::new(&mut params, config.embedding_dim(), config.mlp_hidden, &mut rng);
        Ok(Model {
            config,
            params,
            arch,
            head,
        })
    }

    /// Rebuilds the architecture for `config` and loads `params` into it.
    pub fn from_parts(config: ModelConfig, params: &ParamStore) -> Result<Self> {
        let mut model = Model::new(config, 0)?;
        model.params.load_from(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn head(&self) -> &MlpHead {
        &self.head
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, input: &GraphInput) -> Result<ForwardOutput> {
        if input.features.cols() != self.config.input_dim {
            return Err(Error::shape(
                "model input",
                input.features.shape(),
                (input.node_count(), self.config.input_dim),
            ));
        }
        match &self.arch {
            Arch::Hrl { pools } => self.hrl_forward(pools, tape, bound, input),
            Arch::Arl { layers } => self.arl_forward(layers, tape, bound, input),
        }
    }

    fn hrl_forward(
        &self,
        pools: &[DiffPoolLayer],
        tape: &mut Tape,
        bound: &Bound,
        input: &GraphInput,
    ) -> Result<ForwardOutput> {
        let mut adj = tape.constant(input.adjacency.clone());
        let mut adj_norm = tape.constant(input.adjacency_norm.clone());
        let mut h = tape.constant(input.features.clone());
        let mut aux = Vec::with_capacity(pools.len());
        let mut level_sizes = vec![input.node_count()];
        let mut degenerate = false;
        let mut assignments = Vec::with_capacity(pools.len());
        for (k, layer) in pools.iter().enumerate() {
            let out = layer.forward(tape, bound, adj, adj_norm, h)?;
            // A single-cluster assignment is fixed, so there is nothing to regularize.
            if layer.pool.is_some() {
                aux.push(AuxLoss {
                    link: out.link_loss,
                    entropy: out.entropy_loss,
                });
            }
            degenerate |= out.degenerate;
            assignments.push(out.assignment);
            adj = out.adjacency;
            h = out.features;
            level_sizes.push(tape.shape(h).0);
            if k + 1 < pools.len() {
                adj_norm = tape.normalize_adjacency(adj)?;
            }
        }
        let logits = self.head.logits(tape, bound, h)?;
        Ok(ForwardOutput {
            logits,
            embedding: h,
            aux,
            level_sizes,
            assignments,
            degenerate_pooling: degenerate,
        })
    }

    fn arl_forward(
        &self,
        layers: &[GatGcLayer],
        tape: &mut Tape,
        bound: &Bound,
        input: &GraphInput,
    ) -> Result<ForwardOutput> {
        let mut h = tape.constant(input.features.clone());
        let mut per_layer = vec![h];
        for layer in layers {
            h = layer.forward(tape, bound, &input.neighborhood, h)?;
            per_layer.push(h);
        }
        let z = readout_concat(tape, &per_layer, self.config.readout_mode)?;
        let logits = self.head.logits(tape, bound, z)?;
        Ok(ForwardOutput {
            logits,
            embedding: z,
            aux: Vec::new(),
            level_sizes: vec![input.node_count()],
            assignments: Vec::new(),
            degenerate_pooling: false,
        })
    }

    /// Class probabilities `[p(non-controversial), p(controversial)]`.
    pub fn predict(&self, input: &GraphInput) -> Result<[f64; 2]> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, input)?;
        let probs = tape.row_softmax(out.logits)?;
        let p = tape.value(probs).data();
        Ok([p[0], p[1]])
    }

    pub fn logits(&self, input: &GraphInput) -> Result<[f64; 2]> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, input)?;
        let l = tape.value(out.logits).data();
        Ok([l[0], l[1]])
    }

    /// Training loss for one graph together with its logits.
    pub fn loss(&self, input: &GraphInput) -> Result<(f64, [f64; 2])> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, input)?;
        let loss = total_loss(
            &mut tape,
            out.logits,
            input.label,
            &out.aux,
            self.config.aux_loss_weights,
        )?;
        let l = tape.value(out.logits).data();
        Ok((tape.value(loss).get(0, 0), [l[0], l[1]]))
    }

    /// Training loss for one graph and its gradient for every parameter tensor.
    pub fn loss_and_grads(&self, input: &GraphInput) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, input)?;
        let loss = total_loss(
            &mut tape,
            out.logits,
            input.label,
            &out.aux,
            self.config.aux_loss_weights,
        )?;
        let value = tape.value(loss).get(0, 0);
        let mut grads = tape.backward(loss)?;
        Ok((value, bound.collect(&self.params, &mut grads)))
    }
}

/// Cross-entropy plus the weighted pooling regularizers.
pub fn total_loss(
    tape: &mut Tape,
    logits: Var,
    label: Label,
    aux: &[AuxLoss],
    weights: AuxWeights,
) -> Result<Var> {
    let mut loss = tape.cross_entropy(logits, &[label.index()])?;
    for term in aux {
        if weights.link != 0.0 {
            let l = tape.scale(term.link, weights.link)?;
            loss = tape.add(loss, l)?;
        }
        if weights.entropy != 0.0 {
            let e = tape.scale(term.entropy, weights.entropy)?;
            loss = tape.add(loss, e)?;
        }
    }
    Ok(loss)
}
