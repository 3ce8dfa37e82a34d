use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    #[default]
    Sum,
    Mean,
}

/// Reduces each layer's node matrix over nodes and concatenates the results in
/// layer order, giving a `1×Σd_l` graph vector.
pub fn readout_concat(tape: &mut Tape, per_layer: &[Var], mode: ReadoutMode) -> Result<Var> {
    let first = per_layer
        .first()
        .ok_or_else(|| Error::Argument("readout over no layers".into()))?;
    let n = tape.shape(*first).0;
    let mut parts = Vec::with_capacity(per_layer.len());
    for &h in per_layer {
        if tape.shape(h).0 != n {
            return Err(Error::shape("readout_concat", tape.shape(*first), tape.shape(h)));
        }
        parts.push(match mode {
            ReadoutMode::Sum => tape.reduce_sum_rows(h)?,
            ReadoutMode::Mean => tape.reduce_mean_rows(h)?,
        });
    }
    tape.concat_cols(&parts)
}
