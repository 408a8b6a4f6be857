//! Network building blocks.
//!
//! Each parameter record (`*Params`) owns plain [`Tensor`]s. Calling
//! `bind` registers them on a [`Tape`] and returns a matching `*Vars`
//! record that the forward functions consume. `bind(.., true)` makes the
//! parameters differentiable leaves; `leaves()` lists them in the same
//! order as [`Parameterized::parameters`].

mod attention;
mod conv;
mod dense;
mod lstm;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

pub use attention::{attention_matrix, sequence_embedding, AttentionParams, AttentionVars};
pub use conv::{
    conv_block_forward, conv_block_forward_batch, conv_block_normalized_batch, global_avg_pool, BatchNormState, ConvBlockParams,
    ConvBlockVars,
};
pub use dense::{dense_forward, dropout_forward, dropout_mask, DenseParams, DenseVars};
pub use lstm::{lstm_forward, lstm_step, LstmParams, LstmStep, LstmVariant, LstmVars};

/// Train or inference behaviour for dropout and batch normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Infer,
}

/// Ordered access to trainable tensors.
pub trait Parameterized<T: Scalar> {
    fn parameters(&self) -> Vec<&Tensor<T>>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}

pub(crate) fn bind_one<'t, T: Scalar>(tape: &'t Tape<T>, t: &Tensor<T>, trainable: bool) -> Var<'t, T> {
    if trainable {
        tape.leaf(t.clone())
    } else {
        tape.constant(t.clone())
    }
}

/// Uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.gen_range(-limit..=limit))).collect();
    Tensor::new(shape, data).expect("positive extents")
}
