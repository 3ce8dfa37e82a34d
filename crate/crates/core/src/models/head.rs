use rand::Rng;

use crate::autodiff::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::glorot_uniform;

/// One ReLU hidden layer, then a linear map to the two class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpHead {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

pub const CLASSES: usize = 2;

impl MlpHead {
    pub fn new<R: Rng>(params: &mut ParamStore, d_in: usize, hidden: usize, rng: &mut R) -> Self {
        MlpHead {
            w1: params.add("head.w1", glorot_uniform(rng, d_in, hidden)),
            b1: params.add("head.b1", Tensor::zeros(1, hidden)),
            w2: params.add("head.w2", glorot_uniform(rng, hidden, CLASSES)),
            b2: params.add("head.b2", Tensor::zeros(1, CLASSES)),
        }
    }

    pub fn logits(&self, tape: &mut Tape, bound: &Bound, z: Var) -> Result<Var> {
        let (rows, cols) = tape.shape(z);
        let w1 = bound.var(self.w1);
        if cols != tape.shape(w1).0 {
            return Err(Error::shape("mlp_classify", (rows, cols), tape.shape(w1)));
        }
        let hidden = tape.matmul(z, w1)?;
        let hidden = tape.add_row(hidden, bound.var(self.b1))?;
        let hidden = tape.relu(hidden)?;
        let out = tape.matmul(hidden, bound.var(self.w2))?;
        tape.add_row(out, bound.var(self.b2))
    }

    /// Class probabilities for the graph vector `z`.
    pub fn classify(&self, tape: &mut Tape, bound: &Bound, z: Var) -> Result<Var> {
        let logits = self.logits(tape, bound, z)?;
        tape.row_softmax(logits)
    }
}
