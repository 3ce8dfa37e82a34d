use rand::Rng;

use crate::autodiff::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;

use super::{glorot_uniform, Activation};

/// `activation(Â · H · W + b)`; without a bias this is the plain convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        activation: Activation,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let weight = params.add(format!("{name}.weight"), glorot_uniform(rng, d_in, d_out));
        let bias = bias.then(|| params.add(format!("{name}.bias"), Tensor::zeros(1, d_out)));
        GcnLayer {
            weight,
            bias,
            activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, a_norm: Var, h: Var) -> Result<Var> {
        let hw = tape.matmul(h, bound.var(self.weight))?;
        let mut z = tape.matmul(a_norm, hw)?;
        if let Some(b) = self.bias {
            z = tape.add_row(z, bound.var(b))?;
        }
        self.activation.apply(tape, z)
    }
}

/// Consecutive graph convolutions sharing one adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnStack {
    pub layers: Vec<GcnLayer>,
}

impl GcnStack {
    /// `depth` layers `d_in → hidden → … → d_out`; `last` is the final layer's activation.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        name: &str,
        depth: usize,
        d_in: usize,
        hidden: usize,
        d_out: usize,
        last: Activation,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let layers = (0..depth)
            .map(|k| {
                let din = if k == 0 { d_in } else { hidden };
                let (dout, act) = if k + 1 == depth {
                    (d_out, last)
                } else {
                    (hidden, Activation::Relu)
                };
                GcnLayer::new(params, &format!("{name}.{k}"), din, dout, act, bias, rng)
            })
            .collect();
        GcnStack { layers }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, a_norm: Var, mut h: Var) -> Result<Var> {
        for layer in &self.layers {
            h = layer.forward(tape, bound, a_norm, h)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(a: Tensor, h: Tensor, w: Tensor, act: Activation) -> Tensor {
        let mut params = ParamStore::new();
        let weight = params.add("w", w);
        let layer = GcnLayer {
            weight,
            bias: None,
            activation: act,
        };
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let (a, h) = (tape.constant(a), tape.constant(h));
        let out = layer.forward(&mut tape, &bound, a, h).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn single_node_relu() {
        let out = run(
            Tensor::scalar(1.0),
            Tensor::row_vector(&[-1.0, 2.0]),
            Tensor::identity(2),
            Activation::Relu,
        );
        assert_eq!(out.data(), &[0.0, 2.0]);
    }

    #[test]
    fn zero_features_give_zero_output() {
        let out = run(
            Tensor::filled(2, 2, 0.5),
            Tensor::zeros(2, 3),
            Tensor::ones(3, 4),
            Activation::None,
        );
        assert_eq!(out, Tensor::zeros(2, 4));
    }

    #[test]
    fn two_node_path() {
        let out = run(
            Tensor::filled(2, 2, 0.5),
            Tensor::col_vector(&[1.0, 3.0]),
            Tensor::scalar(2.0),
            Activation::None,
        );
        assert_eq!(out.data(), &[4.0, 4.0]);
    }
}
