use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;

use super::{glorot_uniform, Activation, Neighborhood};

/// Whether the attention-weighted sum is multiplied by the neighbourhood size
/// before the activation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardinalityScale {
    #[default]
    NeighborhoodSize,
    Off,
}

/// Single-head graph attention with cardinality preservation.
///
/// Scores are `leaky_relu(aᵀ [W h_i ‖ W h_j])` over the neighbourhood of `i`
/// (self included), normalized by a masked softmax; the node update is
/// `σ(|Ñ(i)| · Σ_j α_ij W h_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatGcLayer {
    pub weight: ParamId,
    /// Column of length `2·d_out`: the first half scores the centre node, the second the neighbour.
    pub attention: ParamId,
    pub activation: Activation,
    pub slope: f64,
    pub scale: CardinalityScale,
}

impl GatGcLayer {
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let weight = params.add(format!("{name}.weight"), glorot_uniform(rng, d_in, d_out));
        let attention = params.add(format!("{name}.attention"), glorot_uniform(rng, 2 * d_out, 1));
        GatGcLayer {
            weight,
            attention,
            activation,
            slope: 0.2,
            scale: CardinalityScale::NeighborhoodSize,
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, nb: &Neighborhood, h: Var) -> Result<Var> {
        self.forward_with_attention(tape, bound, nb, h).map(|(out, _)| out)
    }

    /// Returns the node outputs and the `n×n` attention matrix.
    pub fn forward_with_attention(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        nb: &Neighborhood,
        h: Var,
    ) -> Result<(Var, Var)> {
        let n = tape.shape(h).0;
        let wh = tape.matmul(h, bound.var(self.weight))?;
        let d = tape.shape(wh).1;

        let a = bound.var(self.attention);
        let a_self = tape.slice_rows(a, 0, d)?;
        let a_neigh = tape.slice_rows(a, d, d)?;
        let src = tape.matmul(wh, a_self)?;
        let dst = tape.matmul(wh, a_neigh)?;

        // scores[i][j] = src[i] + dst[j]
        let ones_row = tape.constant(Tensor::ones(1, n));
        let ones_col = tape.constant(Tensor::ones(n, 1));
        let src_b = tape.matmul(src, ones_row)?;
        let dst_t = tape.transpose(dst)?;
        let dst_b = tape.matmul(ones_col, dst_t)?;
        let raw = tape.add(src_b, dst_b)?;
        let scores = tape.leaky_relu(raw, self.slope)?;

        let alpha = tape.masked_row_softmax(scores, &nb.mask)?;
        let mut agg = tape.matmul(alpha, wh)?;
        if self.scale == CardinalityScale::NeighborhoodSize {
            agg = tape.scale_rows(agg, nb.cardinality.clone())?;
        }
        let out = self.activation.apply(tape, agg)?;
        Ok((out, alpha))
    }
}
