use rand::Rng;

use crate::autodiff::{Bound, ParamStore, Tape, Tensor, Var};
use crate::error::Result;

use super::{Activation, GcnStack};

/// One soft-clustering pooling level: an embedding GCN stack, an assignment GCN
/// stack with `clusters` outputs, and the coarsening `Sᵀ A S`, `Sᵀ H′`.
///
/// With a single cluster the assignment is the constant all-ones column, so no
/// assignment stack is built.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffPoolLayer {
    pub embed: GcnStack,
    pub pool: Option<GcnStack>,
    pub clusters: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct PoolOutput {
    /// Coarsened adjacency, `c×c`.
    pub adjacency: Var,
    /// Coarsened features, `c×d′`.
    pub features: Var,
    /// Row-stochastic assignment, `m×c`.
    pub assignment: Var,
    pub link_loss: Var,
    pub entropy_loss: Var,
    /// Set when the layer has at least as many clusters as input nodes.
    pub degenerate: bool,
}

impl DiffPoolLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        name: &str,
        depth: usize,
        d_in: usize,
        hidden: usize,
        clusters: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let embed = GcnStack::new(
            params,
            &format!("{name}.embed"),
            depth,
            d_in,
            hidden,
            hidden,
            Activation::Relu,
            bias,
            rng,
        );
        let pool = (clusters > 1).then(|| {
            GcnStack::new(
                params,
                &format!("{name}.pool"),
                depth,
                d_in,
                hidden,
                clusters,
                Activation::None,
                bias,
                rng,
            )
        });
        DiffPoolLayer {
            embed,
            pool,
            clusters: clusters.max(1),
        }
    }

    pub fn output_dim(&self, params: &ParamStore) -> usize {
        let last = self.embed.layers.last().expect("non-empty embed stack");
        params.get(last.weight).cols()
    }

    /// `adjacency` is the raw level adjacency (pooled and used in the link loss);
    /// `adjacency_norm` is what the convolutions see.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        adjacency: Var,
        adjacency_norm: Var,
        h: Var,
    ) -> Result<PoolOutput> {
        let m = tape.shape(h).0;
        let embedded = self.embed.forward(tape, bound, adjacency_norm, h)?;
        let assignment = match &self.pool {
            Some(pool) => {
                let logits = pool.forward(tape, bound, adjacency_norm, h)?;
                tape.row_softmax(logits)?
            }
            None => tape.constant(Tensor::ones(m, 1)),
        };
        let (adj_next, h_next) = pool_with_assignment(tape, adjacency, assignment, embedded)?;
        let (link_loss, entropy_loss) = pooling_losses(tape, adjacency, assignment)?;
        Ok(PoolOutput {
            adjacency: adj_next,
            features: h_next,
            assignment,
            link_loss,
            entropy_loss,
            degenerate: self.clusters > 1 && self.clusters >= m,
        })
    }
}

/// `(Sᵀ A S, Sᵀ H′)`.
pub fn pool_with_assignment(
    tape: &mut Tape,
    adjacency: Var,
    assignment: Var,
    embedded: Var,
) -> Result<(Var, Var)> {
    let st = tape.transpose(assignment)?;
    let sta = tape.matmul(st, adjacency)?;
    let adj_next = tape.matmul(sta, assignment)?;
    let h_next = tape.matmul(st, embedded)?;
    Ok((adj_next, h_next))
}

/// Link loss `‖A − S Sᵀ‖_F / m²` and mean row entropy of `S`.
pub fn pooling_losses(tape: &mut Tape, adjacency: Var, assignment: Var) -> Result<(Var, Var)> {
    let m = tape.shape(assignment).0 as f64;
    let st = tape.transpose(assignment)?;
    let sst = tape.matmul(assignment, st)?;
    let diff = tape.sub(adjacency, sst)?;
    let norm = tape.frobenius_norm(diff)?;
    let link = tape.scale(norm, 1.0 / (m * m))?;
    let entropy = tape.row_entropy_mean(assignment)?;
    Ok((link, entropy))
}
