use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

use super::{bind_one, glorot_uniform, Mode, Parameterized};

/// Fully connected layer: `weight` is `[out, in]`, `bias` is `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        DenseParams {
            weight: glorot_uniform(&[output, input], input, output, rng),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> DenseVars<'t, T> {
        DenseVars {
            weight: bind_one(tape, &self.weight, trainable),
            bias: bind_one(tape, &self.bias, trainable),
        }
    }
}

impl<T: Scalar> Parameterized<T> for DenseParams<T> {
    fn parameters(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DenseVars<'t, T> {
    pub weight: Var<'t, T>,
    pub bias: Var<'t, T>,
}

impl<'t, T> DenseVars<'t, T> {
    pub fn leaves(&self) -> [Var<'t, T>; 2] {
        [self.weight, self.bias]
    }
}

/// `x Wᵀ + b` for a `[batch, in]` input.
pub fn dense_forward<'t, T: Scalar>(vars: &DenseVars<'t, T>, input: Var<'t, T>) -> Result<Var<'t, T>> {
    input.matmul_nt(vars.weight)?.add_row_bias(vars.bias)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(shape: &[usize], rate: f64, rng: &mut impl Rng) -> Result<Tensor<T>> {
    check_rate(rate)?;
    let keep = T::lit(1.0 / (1.0 - rate));
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    Tensor::new(shape, data)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Contract(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Dropout; identity in infer mode or at rate 0.
pub fn dropout_forward<'t, T: Scalar>(
    input: Var<'t, T>,
    rate: f64,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<Var<'t, T>> {
    check_rate(rate)?;
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(input);
    }
    let mask = dropout_mask(&input.shape(), rate, rng)?;
    input.mul_const(&mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_is_affine() {
        let params = DenseParams::<f64> {
            weight: Tensor::new(&[2, 3], vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0]).unwrap(),
            bias: Tensor::new(&[2], vec![0.5, -0.5]).unwrap(),
        };
        let tape = Tape::new();
        let vars = params.bind(&tape, false);
        let x = tape.constant(Tensor::new(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        assert_eq!(dense_forward(&vars, x).unwrap().value().data(), &[7.5, -1.5]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, 4], vec![1.0, -2.0, 3.0, 4.0]).unwrap());
        for mode in [Mode::Train, Mode::Infer] {
            let y = dropout_forward(x, 0.0, mode, &mut rng).unwrap();
            assert_eq!(y.value(), x.value());
        }
        let y = dropout_forward(x, 0.8, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y.value(), x.value());
    }

    #[test]
    fn dropout_rate_must_be_below_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tape = Tape::new();
        let x = tape.constant(Tensor::<f64>::ones(&[1, 4]));
        assert!(matches!(dropout_forward(x, 1.0, Mode::Train, &mut rng), Err(Error::Contract(_))));
        assert!(dropout_forward(x, -0.1, Mode::Infer, &mut rng).is_err());
    }

    #[test]
    fn dropout_keeps_expected_fraction_scaled_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let tape = Tape::new();
        let x = tape.constant(Tensor::<f64>::ones(&[1, 100_000]));
        let y = dropout_forward(x, 0.8, Mode::Train, &mut rng).unwrap().value();
        let survivors: Vec<f64> = y.data().iter().copied().filter(|&v| v != 0.0).collect();
        let fraction = survivors.len() as f64 / 100_000.0;
        assert!((fraction - 0.2).abs() < 0.01, "fraction {fraction}");
        assert!(survivors.iter().all(|&v| (v - 5.0).abs() < 1e-12));
    }
}
