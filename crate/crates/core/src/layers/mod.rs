//! Graph neural network layers on top of the autodiff tape: normalized graph
//! convolution, soft-assignment pooling, cardinality-preserving attention, and
//! layer-wise readout.

mod adjacency;
mod diffpool;
mod gat;
mod gcn;
mod readout;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;

pub use adjacency::{attention_neighborhood, normalize_adjacency, Neighborhood};
pub use diffpool::{pool_with_assignment, pooling_losses, DiffPoolLayer, PoolOutput};
pub use gat::{CardinalityScale, GatGcLayer};
pub use gcn::{GcnLayer, GcnStack};
pub use readout::{readout_concat, ReadoutMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
    None,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Elu => tape.elu(x),
            Activation::None => Ok(x),
        }
    }
}

/// Uniform Glorot initialization: `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(rows, cols, data).expect("shape matches data")
}
