use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

use super::{bind_one, glorot_uniform, Parameterized};

/// Which cell-state recurrence the LSTM uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LstmVariant {
    /// `c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t`.
    #[default]
    Standard,
    /// `c_t = f_t ⊙ h_{t-1} + i_t ⊙ g_t`, the cell update carried from the
    /// previous hidden state rather than the previous cell state.
    HiddenCarry,
}

/// Unidirectional LSTM cell weights for hidden size `n` and input size
/// `d_in`. `w_*` are recurrent (`n x n`), `v_*` input projections
/// (`n x d_in`), `b_*` biases (`n`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w_i: Tensor<T>,
    pub w_f: Tensor<T>,
    pub w_o: Tensor<T>,
    pub w_g: Tensor<T>,
    pub v_i: Tensor<T>,
    pub v_f: Tensor<T>,
    pub v_o: Tensor<T>,
    pub v_g: Tensor<T>,
    pub b_i: Tensor<T>,
    pub b_f: Tensor<T>,
    pub b_o: Tensor<T>,
    pub b_g: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    /// Glorot-uniform matrices, forget-gate bias 1, other biases 0.
    pub fn init(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        let mut w = || glorot_uniform(&[hidden, hidden], hidden, hidden, rng);
        let (w_i, w_f, w_o, w_g) = (w(), w(), w(), w());
        let mut v = || glorot_uniform(&[hidden, input], input, hidden, rng);
        let (v_i, v_f, v_o, v_g) = (v(), v(), v(), v());
        LstmParams {
            w_i,
            w_f,
            w_o,
            w_g,
            v_i,
            v_f,
            v_o,
            v_g,
            b_i: Tensor::zeros(&[hidden]),
            b_f: Tensor::ones(&[hidden]),
            b_o: Tensor::zeros(&[hidden]),
            b_g: Tensor::zeros(&[hidden]),
        }
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, hidden]);
        let v = || Tensor::zeros(&[hidden, input]);
        let b = || Tensor::zeros(&[hidden]);
        LstmParams {
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_g: w(),
            v_i: v(),
            v_f: v(),
            v_o: v(),
            v_g: v(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_g: b(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_i.shape()[0]
    }

    pub fn input(&self) -> usize {
        self.v_i.shape()[1]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.hidden(), self.input());
        let ok = [&self.w_i, &self.w_f, &self.w_o, &self.w_g].iter().all(|w| w.shape() == [n, n])
            && [&self.v_i, &self.v_f, &self.v_o, &self.v_g].iter().all(|v| v.shape() == [n, d])
            && [&self.b_i, &self.b_f, &self.b_o, &self.b_g].iter().all(|b| b.shape() == [n]);
        if !ok {
            return Err(Error::dim("lstm", format!("inconsistent parameter shapes for n={n}, d_in={d}")));
        }
        Ok(())
    }

    /// Registers the weights and builds the gate-stacked views used by
    /// [`lstm_step`] (gate order i, f, o, g).
    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> Result<LstmVars<'t, T>> {
        self.validate()?;
        let leaves = self.parameters().into_iter().map(|p| bind_one(tape, p, trainable)).collect();
        LstmVars::from_leaves(leaves)
    }
}

impl<T: Scalar> Parameterized<T> for LstmParams<T> {
    fn parameters(&self) -> Vec<&Tensor<T>> {
        vec![
            &self.w_i, &self.w_f, &self.w_o, &self.w_g, &self.v_i, &self.v_f, &self.v_o, &self.v_g, &self.b_i,
            &self.b_f, &self.b_o, &self.b_g,
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_g,
            &mut self.v_i,
            &mut self.v_f,
            &mut self.v_o,
            &mut self.v_g,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }
}

pub struct LstmVars<'t, T> {
    leaves: Vec<Var<'t, T>>,
    /// `[4n, n]`
    recurrent: Var<'t, T>,
    /// `[4n, d_in]`
    projection: Var<'t, T>,
    /// `[4n]`
    bias: Var<'t, T>,
    hidden: usize,
}

impl<'t, T: Scalar> LstmVars<'t, T> {
    /// Builds the stacked views from the twelve weights in parameter order
    /// (`W`, then `V`, then `b`, each as i, f, o, g).
    pub fn from_leaves(leaves: Vec<Var<'t, T>>) -> Result<Self> {
        if leaves.len() != 12 {
            return Err(Error::Contract(format!("lstm needs 12 weights, got {}", leaves.len())));
        }
        let recurrent = Var::concat(&leaves[0..4], 0)?;
        let projection = Var::concat(&leaves[4..8], 0)?;
        let bias = Var::concat(&leaves[8..12], 0)?;
        let hidden = leaves[0].shape()[0];
        if recurrent.shape() != [4 * hidden, hidden] || bias.shape() != [4 * hidden] {
            return Err(Error::dim("lstm", "inconsistent weight shapes".to_string()));
        }
        Ok(LstmVars {
            leaves,
            recurrent,
            projection,
            bias,
            hidden,
        })
    }

    pub fn leaves(&self) -> &[Var<'t, T>] {
        &self.leaves
    }
}

/// One cell update with its gate activations.
#[derive(Debug, Clone, Copy)]
pub struct LstmStep<'t, T> {
    pub h: Var<'t, T>,
    pub c: Var<'t, T>,
    pub i: Var<'t, T>,
    pub f: Var<'t, T>,
    pub o: Var<'t, T>,
    pub g: Var<'t, T>,
}

/// One LSTM step on row vectors: `x_t` is `[1, d_in]`, `h_prev` and
/// `c_prev` are `[1, n]`.
///
/// Gates `i, f, o = σ(W h_prev + V x_t + b)`, `g = tanh(..)`,
/// `h_t = o ⊙ tanh(c_t)`; the cell update follows `variant`.
pub fn lstm_step<'t, T: Scalar>(
    vars: &LstmVars<'t, T>,
    x_t: Var<'t, T>,
    h_prev: Var<'t, T>,
    c_prev: Var<'t, T>,
    variant: LstmVariant,
) -> Result<LstmStep<'t, T>> {
    let n = vars.hidden;
    for (name, v, width) in [("h_prev", h_prev, n), ("c_prev", c_prev, n)] {
        if v.shape() != [1, width] {
            return Err(Error::dim("lstm_step", format!("{name} must be [1, {width}], got {:?}", v.shape())));
        }
    }
    let z = x_t
        .matmul_nt(vars.projection)?
        .add(h_prev.matmul_nt(vars.recurrent)?)?
        .add_row_bias(vars.bias)?;
    let i = z.slice(1, 0, n)?.sigmoid()?;
    let f = z.slice(1, n, 2 * n)?.sigmoid()?;
    let o = z.slice(1, 2 * n, 3 * n)?.sigmoid()?;
    let g = z.slice(1, 3 * n, 4 * n)?.tanh()?;
    let carried = match variant {
        LstmVariant::Standard => c_prev,
        LstmVariant::HiddenCarry => h_prev,
    };
    let c = f.mul(carried)?.add(i.mul(g)?)?;
    let h = o.mul(c.tanh()?)?;
    Ok(LstmStep { h, c, i, f, o, g })
}

/// Runs the cell left to right over `series` (`[d_in, l]`, one column per
/// timestep) from zero state; returns `H` as `[l, n]`.
pub fn lstm_forward<'t, T: Scalar>(
    vars: &LstmVars<'t, T>,
    series: Var<'t, T>,
    variant: LstmVariant,
) -> Result<Var<'t, T>> {
    let shape = series.shape();
    if shape.len() != 2 {
        return Err(Error::dim("lstm_forward", format!("series must be [d_in, l], got {shape:?}")));
    }
    let steps = series.transpose()?;
    let tape = series.tape();
    let zero = Tensor::zeros(&[1, vars.hidden]);
    let mut h = tape.constant(zero.clone());
    let mut c = tape.constant(zero);
    let mut rows = Vec::with_capacity(shape[1]);
    for t in 0..shape[1] {
        let step = lstm_step(vars, steps.slice(0, t, t + 1)?, h, c, variant)?;
        h = step.h;
        c = step.c;
        rows.push(h);
    }
    Var::concat(&rows, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_give_half_gates_and_zero_state() {
        let params = LstmParams::<f64>::zeros(3, 1);
        let tape = Tape::new();
        let vars = params.bind(&tape, false).unwrap();
        let x = tape.constant(Tensor::new(&[1, 1], vec![0.7]).unwrap());
        let zero = tape.constant(Tensor::zeros(&[1, 3]));
        let s = lstm_step(&vars, x, zero, zero, LstmVariant::Standard).unwrap();
        for gate in [s.i, s.f, s.o] {
            assert_eq!(gate.value().data(), &[0.5; 3]);
        }
        assert_eq!(s.g.value().data(), &[0.0; 3]);
        assert_eq!(s.c.value().data(), &[0.0; 3]);
        assert_eq!(s.h.value().data(), &[0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_carries_memory() {
        let mut params = LstmParams::<f64>::zeros(2, 1);
        params.b_f = Tensor::full(&[2], 40.0);
        params.b_i = Tensor::full(&[2], -40.0);
        let tape = Tape::new();
        let vars = params.bind(&tape, false).unwrap();
        let x = tape.constant(Tensor::new(&[1, 1], vec![0.3]).unwrap());
        let h = tape.constant(Tensor::zeros(&[1, 2]));
        let c = tape.constant(Tensor::new(&[1, 2], vec![0.8, -1.1]).unwrap());
        let s = lstm_step(&vars, x, h, c, LstmVariant::Standard).unwrap();
        for (a, b) in s.c.value().data().iter().zip(c.value().data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_or_bad_state_is_rejected() {
        let params = LstmParams::<f64>::zeros(2, 1);
        let tape = Tape::new();
        let vars = params.bind(&tape, false).unwrap();
        let x = tape.constant(Tensor::new(&[1, 1], vec![0.3]).unwrap());
        let bad = tape.constant(Tensor::zeros(&[1, 3]));
        assert!(lstm_step(&vars, x, bad, bad, LstmVariant::Standard).is_err());
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LstmParams::<f32>::init(4, 1, &mut rng);
        assert_eq!(p.b_f.data(), &[1.0; 4]);
        assert_eq!(p.b_i.data(), &[0.0; 4]);
        assert_eq!(p.num_parameters(), 4 * (16 + 4 + 4));
    }
}
