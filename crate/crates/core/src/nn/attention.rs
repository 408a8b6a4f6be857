use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

use super::{bind_one, glorot_uniform, Parameterized};

/// Structured self-attention weights: `w1` is `[s, n]` (hidden attention
/// size by LSTM width), `w2` is `[t, s]` (one row per attention hop).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn init(hidden: usize, s: usize, t: usize, rng: &mut impl Rng) -> Self {
        AttentionParams {
            w1: glorot_uniform(&[s, hidden], hidden, s, rng),
            w2: glorot_uniform(&[t, s], s, t, rng),
        }
    }

    pub fn s(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn t(&self) -> usize {
        self.w2.shape()[0]
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> Result<AttentionVars<'t, T>> {
        if self.w2.shape()[1] != self.s() {
            return Err(Error::dim(
                "attention",
                format!("w2 {:?} does not follow w1 {:?}", self.w2.shape(), self.w1.shape()),
            ));
        }
        Ok(AttentionVars {
            w1: bind_one(tape, &self.w1, trainable),
            w2: bind_one(tape, &self.w2, trainable),
        })
    }
}

impl<T: Scalar> Parameterized<T> for AttentionParams<T> {
    fn parameters(&self) -> Vec<&Tensor<T>> {
        vec![&self.w1, &self.w2]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.w1, &mut self.w2]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars<'t, T> {
    pub w1: Var<'t, T>,
    pub w2: Var<'t, T>,
}

impl<'t, T> AttentionVars<'t, T> {
    pub fn leaves(&self) -> [Var<'t, T>; 2] {
        [self.w1, self.w2]
    }
}

/// `A = softmax(W2 tanh(W1 Hᵀ))` with the softmax over time, so each of
/// the `t` rows of the `[t, l]` result is a distribution over timesteps.
pub fn attention_matrix<'t, T: Scalar>(vars: &AttentionVars<'t, T>, h: Var<'t, T>) -> Result<Var<'t, T>> {
    vars.w2.matmul(vars.w1.matmul_nt(h)?.tanh()?)?.softmax(1)
}

/// `Q = A H`: row `j` is the `j`-th attention-weighted sum of hidden states.
pub fn sequence_embedding<'t, T: Scalar>(a: Var<'t, T>, h: Var<'t, T>) -> Result<Var<'t, T>> {
    a.matmul(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_rows() {
        let params = AttentionParams::<f64> {
            w1: Tensor::zeros(&[4, 3]),
            w2: Tensor::full(&[2, 4], 0.5),
        };
        let tape = Tape::new();
        let vars = params.bind(&tape, false).unwrap();
        let h = tape.constant(Tensor::from_f64(&[5, 3], &[0.1; 15]).unwrap());
        let a = attention_matrix(&vars, h).unwrap().value();
        assert_eq!(a.shape(), &[2, 5]);
        for v in a.data() {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_attention_selects_a_hidden_state() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::new(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap());
        let h = tape.constant(Tensor::new(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        assert_eq!(sequence_embedding(a, h).unwrap().value().data(), &[3.0, 4.0]);
    }

    #[test]
    fn uniform_attention_averages_hidden_states() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::full(&[2, 4], 0.25));
        let h = tape.constant(Tensor::new(&[4, 1], vec![1.0, 2.0, 3.0, 6.0]).unwrap());
        assert_eq!(sequence_embedding(a, h).unwrap().value().data(), &[3.0, 3.0]);
    }
}
