//! Central finite-difference gradient verification.
//!
//! The numeric side only ever evaluates the forward function on constant
//! inputs, so it shares no code with the backward rules it checks.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

/// Denominator floor in the relative error, so coordinates whose true
/// gradient vanishes are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Which coordinates to probe.
#[derive(Debug, Clone)]
pub enum Coords {
    All,
    /// Uniform sample of `ceil(fraction * total)` coordinates (at least one).
    Sample { fraction: f64, seed: u64 },
    /// Explicit `(input index, flat offset)` pairs.
    List(Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub input: usize,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub probes: Vec<Probe>,
}

impl Report {
    pub fn max_relative_error(&self) -> f64 {
        self.probes.iter().map(|p| p.relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares backward gradients of the scalar `f(inputs)` against central
/// differences with the given step.
pub fn check<T, F>(inputs: &[Tensor<T>], step: f64, coords: Coords, f: F) -> Result<Report>
where
    T: Scalar,
    F: for<'t> Fn(&'t Tape<T>, &[Var<'t, T>]) -> Result<Var<'t, T>>,
{
    let analytic = {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
        let loss = f(&tape, &vars)?;
        let mut grads = tape.backward(loss)?;
        vars.iter()
            .map(|&v| grads.take(v).expect("leaf gradient"))
            .collect::<Vec<_>>()
    };

    let offsets: Vec<(usize, usize)> = match coords {
        Coords::All => inputs
            .iter()
            .enumerate()
            .flat_map(|(i, x)| (0..x.len()).map(move |o| (i, o)))
            .collect(),
        Coords::Sample { fraction, seed } => {
            let total: usize = inputs.iter().map(Tensor::len).sum();
            let count = ((fraction * total as f64).ceil() as usize).clamp(1, total);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> = sample(&mut rng, total, count).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|flat| locate(inputs, flat)).collect()
        }
        Coords::List(list) => list,
    };

    let eval = |perturbed: &[Tensor<T>]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = perturbed.iter().map(|x| tape.constant(x.clone())).collect();
        Ok(f(&tape, &vars)?.value().data()[0].to_f64_lossy())
    };

    let mut probes = Vec::with_capacity(offsets.len());
    let mut work: Vec<Tensor<T>> = inputs.to_vec();
    for (input, offset) in offsets {
        let original = work[input].data()[offset];
        work[input].data_mut()[offset] = original + T::lit(step);
        let plus = eval(&work)?;
        work[input].data_mut()[offset] = original - T::lit(step);
        let minus = eval(&work)?;
        work[input].data_mut()[offset] = original;

        let numeric = (plus - minus) / (2.0 * step);
        let analytic = analytic[input].data()[offset].to_f64_lossy();
        probes.push(Probe {
            input,
            offset,
            analytic,
            numeric,
            relative_error: relative_error(analytic, numeric),
        });
    }
    Ok(Report { probes })
}

fn locate<T: Scalar>(inputs: &[Tensor<T>], mut flat: usize) -> (usize, usize) {
    for (i, x) in inputs.iter().enumerate() {
        if flat < x.len() {
            return (i, flat);
        }
        flat -= x.len();
    }
    unreachable!("flat index within total length")
}
