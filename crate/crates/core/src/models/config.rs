use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AdjacencyMode;
use crate::layers::{Activation, CardinalityScale, ReadoutMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Hierarchical soft-cluster pooling over GCN stacks.
    HrlGcn,
    /// Cardinality-preserving attention layers with layer-wise readout.
    ArlGat,
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hrl-gcn" | "hrl_gcn" => Ok(ModelFamily::HrlGcn),
            "arl-gat" | "arl_gat" => Ok(ModelFamily::ArlGat),
            other => Err(Error::Argument(format!("unknown model family `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxWeights {
    pub link: f64,
    pub entropy: f64,
}

impl Default for AuxWeights {
    fn default() -> Self {
        AuxWeights {
            link: 1.0,
            entropy: 1.0,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Fraction of the largest graph's node count used for the first pooling level.
pub const DEFAULT_CLUSTER_RATIO: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    /// Node feature width `e`.
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub mlp_hidden: usize,
    pub adjacency_mode: AdjacencyMode,

    /// Pooling levels before the final single-cluster level (1 or 2).
    pub pool_layers: usize,
    pub gcn_per_pool: usize,
    /// Adds a learned bias to every pooling-stack convolution.
    #[serde(default = "default_true")]
    pub gcn_bias: bool,
    /// Cluster count of each non-final pooling level.
    pub cluster_counts: Vec<usize>,
    pub aux_loss_weights: AuxWeights,

    pub att_layers: usize,
    pub readout_mode: ReadoutMode,
    pub attention_activation: Activation,
    pub cardinality_scale: CardinalityScale,
    pub leaky_slope: f64,
}

/// `c₁ = max(1, ⌈ratio · n_max⌉)`, each further level halving the previous one.
pub fn cluster_counts_for(n_max: usize, pool_layers: usize, ratio: f64) -> Vec<usize> {
    let mut counts = Vec::with_capacity(pool_layers);
    let mut c = ((ratio * n_max as f64).ceil() as usize).max(1);
    for _ in 0..pool_layers {
        counts.push(c);
        c = c.div_ceil(2).max(1);
    }
    counts
}

impl ModelConfig {
    fn base(family: ModelFamily, input_dim: usize) -> Self {
        ModelConfig {
            family,
            input_dim,
            hidden_dim: 64,
            mlp_hidden: 64,
            adjacency_mode: AdjacencyMode::Binary,
            pool_layers: 1,
            gcn_per_pool: 3,
            gcn_bias: true,
            cluster_counts: vec![1],
            aux_loss_weights: AuxWeights::default(),
            att_layers: 2,
            readout_mode: ReadoutMode::Sum,
            attention_activation: Activation::Elu,
            cardinality_scale: CardinalityScale::NeighborhoodSize,
            leaky_slope: 0.2,
        }
    }

    /// Hierarchical pooling model sized for graphs of at most `n_max` nodes.
    pub fn hrl_gcn(input_dim: usize, pool_layers: usize, n_max: usize) -> Self {
        ModelConfig {
            pool_layers,
            cluster_counts: cluster_counts_for(n_max, pool_layers, DEFAULT_CLUSTER_RATIO),
            ..Self::base(ModelFamily::HrlGcn, input_dim)
        }
    }

    pub fn arl_gat(input_dim: usize, att_layers: usize, readout_mode: ReadoutMode) -> Self {
        ModelConfig {
            att_layers,
            readout_mode,
            ..Self::base(ModelFamily::ArlGat, input_dim)
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden_dim = hidden;
        self
    }

    pub fn with_mlp_hidden(mut self, hidden: usize) -> Self {
        self.mlp_hidden = hidden;
        self
    }

    /// Length of the whole-graph embedding fed to the classifier head.
    pub fn embedding_dim(&self) -> usize {
        match self.family {
            ModelFamily::HrlGcn => self.hidden_dim,
            ModelFamily::ArlGat => self.input_dim + self.att_layers * self.hidden_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        match self.family {
            ModelFamily::HrlGcn => {
                if !(1..=2).contains(&self.pool_layers) {
                    return Err(Error::Config(format!(
                        "pool_layers must be 1 or 2, got {}",
                        self.pool_layers
                    )));
                }
                if self.cluster_counts.len() != self.pool_layers {
                    return Err(Error::Config(format!(
                        "{} cluster counts for {} pooling layers",
                        self.cluster_counts.len(),
                        self.pool_layers
                    )));
                }
                if self.cluster_counts.contains(&0) || self.gcn_per_pool == 0 {
                    return Err(Error::Config("cluster counts and GCN depth must be positive".into()));
                }
                let w = self.aux_loss_weights;
                if w.link < 0.0 || w.entropy < 0.0 {
                    return Err(Error::Config("auxiliary loss weights must be non-negative".into()));
                }
            }
            ModelFamily::ArlGat => {
                if self.att_layers == 0 {
                    return Err(Error::Config("att_layers must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_cluster_schedule() {
        assert_eq!(cluster_counts_for(64, 2, 0.25), [16, 8]);
        assert_eq!(cluster_counts_for(3, 2, 0.25), [1, 1]);
        assert_eq!(cluster_counts_for(10, 1, 0.25), [3]);
    }

    #[test]
    fn arl_embedding_dim() {
        let cfg = ModelConfig::arl_gat(4, 2, ReadoutMode::Sum).with_hidden(8);
        assert_eq!(cfg.embedding_dim(), 20);
    }

    #[test]
    fn pool_layer_bounds_are_checked() {
        let mut cfg = ModelConfig::hrl_gcn(1, 2, 64);
        cfg.validate().unwrap();
        cfg.pool_layers = 3;
        assert!(cfg.validate().is_err());
    }
}
