//! Dense reverse-mode automatic differentiation, the Adam optimizer, and
//! parameter checkpoints.

mod adam;
mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    checkpoint_paths, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
};
pub use params::{Bound, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::sym_normalize;
