use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bias-corrected Adam moments for an ordered parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let zeros: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update of every parameter in place.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Tensor<T>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "adam tracks {} tensors, got {} params and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::dim(
                    "adam",
                    format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NumericFault { op: "adam" });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let correction1 = T::lit(1.0 - self.beta1.powi(t));
        let correction2 = T::lit(1.0 - self.beta2.powi(t));
        let (lr, eps) = (T::lit(lr), T::lit(self.eps));
        for ((p, g), (m, v)) in params.into_iter().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (k, &gk) in g.data().iter().enumerate() {
                md[k] = b1 * md[k] + c1 * gk;
                vd[k] = b2 * vd[k] + c2 * gk * gk;
                let m_hat = md[k] / correction1;
                let v_hat = vd[k] / correction2;
                pd[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::new(&[1], vec![v]).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = scalar(1.0);
        let mut adam = AdamState::new([&w]);
        adam.step(vec![&mut w], &[scalar(0.3)], 0.01).unwrap();
        let expected = 1.0 - 0.01 * 0.3 / (0.3 + 1e-8);
        assert!((w.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut w = scalar(2.5);
        let mut adam = AdamState::new([&w]);
        for _ in 0..10 {
            adam.step(vec![&mut w], &[scalar(0.0)], 0.1).unwrap();
        }
        assert_eq!(w.data()[0], 2.5);
    }

    #[test]
    fn minimises_a_parabola() {
        let mut w = scalar(1.0);
        let mut adam = AdamState::new([&w]);
        for _ in 0..100 {
            let g = scalar(2.0 * w.data()[0]);
            adam.step(vec![&mut w], &[g], 0.1).unwrap();
        }
        assert!(w.data()[0].abs() < 0.1, "w = {}", w.data()[0]);
    }

    #[test]
    fn nan_gradient_is_a_fault() {
        let mut w = scalar(1.0);
        let mut adam = AdamState::new([&w]);
        let r = adam.step(vec![&mut w], &[scalar(f64::NAN)], 0.1);
        assert!(matches!(r, Err(Error::NumericFault { .. })));
        assert_eq!(adam.step, 0);
    }
}
