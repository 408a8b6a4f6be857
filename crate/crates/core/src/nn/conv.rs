use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Padding, Tape, Tensor, Var};

use super::{bind_one, glorot_uniform, Mode, Parameterized};

/// Running batch-norm statistics (not trained by gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: T,
    /// Weight kept on the old running value at each update.
    pub momentum: T,
    /// Number of train-mode updates applied so far.
    pub updates: u64,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Self {
        BatchNormState {
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::ones(&[channels]),
            eps: T::lit(eps),
            momentum: T::lit(momentum),
            updates: 0,
        }
    }

    fn update(&mut self, mean: &Tensor<T>, var: &Tensor<T>) {
        let m = self.momentum;
        let keep = T::one() - m;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(mean.data()) {
            *r = m * *r + keep * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(var.data()) {
            *r = m * *r + keep * b;
        }
        self.updates += 1;
    }
}

/// One temporal convolution block: conv1d, batch normalisation, ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockParams<T> {
    /// `[c_out, width, c_in]`
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub bn: BatchNormState<T>,
    pub padding: Padding,
}

impl<T: Scalar> ConvBlockParams<T> {
    pub fn init(c_in: usize, c_out: usize, width: usize, eps: f64, momentum: f64, rng: &mut impl Rng) -> Self {
        ConvBlockParams {
            kernels: glorot_uniform(&[c_out, width, c_in], width * c_in, width * c_out, rng),
            bias: Tensor::zeros(&[c_out]),
            gamma: Tensor::ones(&[c_out]),
            beta: Tensor::zeros(&[c_out]),
            bn: BatchNormState::new(c_out, eps, momentum),
            padding: Padding::Same,
        }
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> ConvBlockVars<'t, T> {
        ConvBlockVars {
            kernels: bind_one(tape, &self.kernels, trainable),
            bias: bind_one(tape, &self.bias, trainable),
            gamma: bind_one(tape, &self.gamma, trainable),
            beta: bind_one(tape, &self.beta, trainable),
            padding: self.padding,
        }
    }
}

impl<T: Scalar> Parameterized<T> for ConvBlockParams<T> {
    fn parameters(&self) -> Vec<&Tensor<T>> {
        vec![&self.kernels, &self.bias, &self.gamma, &self.beta]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.kernels, &mut self.bias, &mut self.gamma, &mut self.beta]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvBlockVars<'t, T> {
    pub kernels: Var<'t, T>,
    pub bias: Var<'t, T>,
    pub gamma: Var<'t, T>,
    pub beta: Var<'t, T>,
    pub padding: Padding,
}

impl<'t, T> ConvBlockVars<'t, T> {
    pub fn leaves(&self) -> [Var<'t, T>; 4] {
        [self.kernels, self.bias, self.gamma, self.beta]
    }
}

/// Convolution plus batch normalisation (no ReLU) for a batch of
/// `[c_in, T_b]` inputs.
///
/// In train mode the statistics are taken per channel over every timestep
/// of every batch member and the running statistics are updated; in infer
/// mode the running statistics are used.
pub fn conv_block_normalized_batch<'t, T: Scalar>(
    vars: &ConvBlockVars<'t, T>,
    bn: &mut BatchNormState<T>,
    inputs: &[Var<'t, T>],
    mode: Mode,
) -> Result<Vec<Var<'t, T>>> {
    if inputs.is_empty() {
        return Err(Error::Contract("conv block needs at least one input".into()));
    }
    let convolved = inputs
        .iter()
        .map(|x| x.conv1d(vars.kernels, vars.bias, vars.padding))
        .collect::<Result<Vec<_>>>()?;
    match mode {
        Mode::Infer => {
            if bn.updates == 0 {
                return Err(Error::UninitializedStatistics);
            }
            convolved
                .into_iter()
                .map(|c| c.batch_norm_fixed(vars.gamma, vars.beta, &bn.running_mean, &bn.running_var, bn.eps))
                .collect()
        }
        Mode::Train => {
            let lengths: Vec<usize> = convolved.iter().map(|c| c.shape()[1]).collect();
            let joined = if convolved.len() == 1 {
                convolved[0]
            } else {
                Var::concat(&convolved, 1)?
            };
            let (normed, mean, var) = joined.batch_norm(vars.gamma, vars.beta, bn.eps)?;
            bn.update(&mean, &var);
            if lengths.len() == 1 {
                return Ok(vec![normed]);
            }
            let mut start = 0;
            lengths
                .iter()
                .map(|&len| {
                    let part = normed.slice(1, start, start + len);
                    start += len;
                    part
                })
                .collect()
        }
    }
}

/// Full block (conv, batch norm, ReLU) over a batch.
pub fn conv_block_forward_batch<'t, T: Scalar>(
    vars: &ConvBlockVars<'t, T>,
    bn: &mut BatchNormState<T>,
    inputs: &[Var<'t, T>],
    mode: Mode,
) -> Result<Vec<Var<'t, T>>> {
    conv_block_normalized_batch(vars, bn, inputs, mode)?
        .into_iter()
        .map(Var::relu)
        .collect()
}

/// Full block on a single `[c_in, T]` input; returns `[c_out, T]`.
pub fn conv_block_forward<'t, T: Scalar>(
    vars: &ConvBlockVars<'t, T>,
    bn: &mut BatchNormState<T>,
    input: Var<'t, T>,
    mode: Mode,
) -> Result<Var<'t, T>> {
    Ok(conv_block_forward_batch(vars, bn, &[input], mode)?.remove(0))
}

/// Per-channel mean over time: `[c, T] -> [c]`.
pub fn global_avg_pool<'t, T: Scalar>(input: Var<'t, T>) -> Result<Var<'t, T>> {
    if input.shape().len() != 2 {
        return Err(Error::dim("global_avg_pool", format!("expected [c, T], got {:?}", input.shape())));
    }
    input.mean(1)
}
