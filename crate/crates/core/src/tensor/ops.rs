//! Differentiable operations on [`Var`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::kernels::{self, axis_split, col2im, im2col, same_pad_left};
use super::tape::{BackwardFn, Var};
use super::Tensor;

/// Zero-padding policy for [`Var::conv1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Padding {
    /// Output length equals input length; `width - 1` zeros split between
    /// both ends, the extra one (odd deficit) on the left.
    Same,
    /// No padding; output length `T - width + 1`.
    Valid,
}

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(
            op,
            format!("shapes differ: {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("shape preserved")
}

fn boxed<T: Scalar>(
    f: impl Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>> + 'static,
) -> BackwardFn<T> {
    Box::new(f)
}

impl<'t, T: Scalar> Var<'t, T> {
    fn same_tape(&self, other: &Var<'t, T>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "vars from different tapes"
        );
    }

    // ---- linear algebra -------------------------------------------------

    /// Matrix product `self * rhs`. Backward: `da = g rhs^T`, `db = self^T g`.
    pub fn matmul(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let out = kernels::matmul(&a, false, &b, false)?;
        self.tape.record(
            "matmul",
            out,
            &[self, rhs],
            boxed(move |g, needs| {
                let da = needs[0].then(|| {
                    kernels::matmul(g, false, &b, true)
                        .and_then(|d| d.reshape(a.shape()))
                        .expect("matmul backward")
                });
                let db = needs[1].then(|| {
                    kernels::matmul(&a, true, g, false)
                        .and_then(|d| d.reshape(b.shape()))
                        .expect("matmul backward")
                });
                vec![da, db]
            }),
        )
    }

    /// `self * rhs^T` without materialising the transpose.
    pub fn matmul_nt(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let out = kernels::matmul(&a, false, &b, true)?;
        self.tape.record(
            "matmul_nt",
            out,
            &[self, rhs],
            boxed(move |g, needs| {
                let da = needs[0].then(|| {
                    kernels::matmul(g, false, &b, false)
                        .and_then(|d| d.reshape(a.shape()))
                        .expect("matmul_nt backward")
                });
                let db = needs[1].then(|| {
                    kernels::matmul(g, true, &a, false)
                        .and_then(|d| d.reshape(b.shape()))
                        .expect("matmul_nt backward")
                });
                vec![da, db]
            }),
        )
    }

    pub fn transpose(self) -> Result<Var<'t, T>> {
        let out = kernels::transpose(&self.value())?;
        let shape = self.shape();
        self.tape.record(
            "transpose",
            out,
            &[self],
            boxed(move |g, _| {
                let back = kernels::transpose(g)
                    .and_then(|d| d.reshape(&shape))
                    .expect("transpose backward");
                vec![Some(back)]
            }),
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t, T>> {
        let out = self.value().reshape(shape)?;
        let original = self.shape();
        self.tape.record(
            "reshape",
            out,
            &[self],
            boxed(move |g, _| vec![Some(g.reshape(&original).expect("reshape backward"))]),
        )
    }

    // ---- elementwise ----------------------------------------------------

    pub fn add(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let (a, b) = (self.value(), rhs.value());
        same_shape("add", &a, &b)?;
        self.tape.record(
            "add",
            zip_map(&a, &b, |x, y| x + y),
            &[self, rhs],
            boxed(|g, needs| vec![needs[0].then(|| g.clone()), needs[1].then(|| g.clone())]),
        )
    }

    pub fn sub(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let (a, b) = (self.value(), rhs.value());
        same_shape("sub", &a, &b)?;
        self.tape.record(
            "sub",
            zip_map(&a, &b, |x, y| x - y),
            &[self, rhs],
            boxed(|g, needs| vec![needs[0].then(|| g.clone()), needs[1].then(|| g.map(|v: T| -v))]),
        )
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let (a, b) = (self.value(), rhs.value());
        same_shape("mul", &a, &b)?;
        let out = zip_map(&a, &b, |x, y| x * y);
        self.tape.record(
            "mul",
            out,
            &[self, rhs],
            boxed(move |g, needs| {
                vec![
                    needs[0].then(|| zip_map(g, &b, |u, v| u * v)),
                    needs[1].then(|| zip_map(g, &a, |u, v| u * v)),
                ]
            }),
        )
    }

    /// Multiplies by a fixed tensor that takes no gradient (dropout masks).
    pub fn mul_const(self, mask: &Tensor<T>) -> Result<Var<'t, T>> {
        let a = self.value();
        same_shape("mul_const", &a, mask)?;
        let mask = mask.clone();
        self.tape.record(
            "mul_const",
            zip_map(&a, &mask, |x, y| x * y),
            &[self],
            boxed(move |g, _| vec![Some(zip_map(g, &mask, |u, v| u * v))]),
        )
    }

    pub fn scale(self, factor: T) -> Result<Var<'t, T>> {
        let out = self.value().map(|v| v * factor);
        self.tape.record(
            "scale",
            out,
            &[self],
            boxed(move |g, _| vec![Some(g.map(|v| v * factor))]),
        )
    }

    /// Adds `bias` (length = column count) to every row of a rank-2 input.
    pub fn add_row_bias(self, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&bias);
        let (x, b) = (self.value(), bias.value());
        let (rows, cols) = x.dims2();
        if x.rank() > 2 || b.len() != cols {
            return Err(Error::dim(
                "add_row_bias",
                format!("bias {:?} does not match columns of {:?}", b.shape(), x.shape()),
            ));
        }
        let mut out = x.data().to_vec();
        for row in out.chunks_mut(cols) {
            for (v, &bv) in row.iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        let b_shape = b.shape().to_vec();
        self.tape.record(
            "add_row_bias",
            Tensor::new(x.shape(), out)?,
            &[self, bias],
            boxed(move |g, needs| {
                let db = needs[1].then(|| {
                    let mut acc = vec![T::zero(); cols];
                    for row in g.data().chunks(cols).take(rows) {
                        for (a, &v) in acc.iter_mut().zip(row) {
                            *a += v;
                        }
                    }
                    Tensor::new(&b_shape, acc).expect("bias shape")
                });
                vec![needs[0].then(|| g.clone()), db]
            }),
        )
    }

    /// Adds `bias[r]` to every entry of row `r`: a per-channel
    /// bias broadcast over the time axis of a `[channels, T]` input.
    pub fn add_col_bias(self, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&bias);
        let (x, b) = (self.value(), bias.value());
        let (rows, cols) = x.dims2();
        if x.rank() != 2 || b.len() != rows {
            return Err(Error::dim(
                "add_col_bias",
                format!("bias {:?} does not match rows of {:?}", b.shape(), x.shape()),
            ));
        }
        let mut out = x.data().to_vec();
        for (row, &bv) in out.chunks_mut(cols).zip(b.data()) {
            row.iter_mut().for_each(|v| *v += bv);
        }
        let b_shape = b.shape().to_vec();
        self.tape.record(
            "add_col_bias",
            Tensor::new(x.shape(), out)?,
            &[self, bias],
            boxed(move |g, needs| {
                let db = needs[1].then(|| {
                    let sums = g.data().chunks(cols).map(|r| r.iter().fold(T::zero(), |a, &v| a + v));
                    Tensor::new(&b_shape, sums.collect()).expect("bias shape")
                });
                vec![needs[0].then(|| g.clone()), db]
            }),
        )
    }

    /// `σ(z) = 1 / (1 + e^(-z))`.
    pub fn sigmoid(self) -> Result<Var<'t, T>> {
        let y = self.value().map(|z| T::one() / (T::one() + (-z).exp()));
        let saved = y.clone();
        self.tape.record(
            "sigmoid",
            y,
            &[self],
            boxed(move |g, _| vec![Some(zip_map(g, &saved, |u, s| u * s * (T::one() - s)))]),
        )
    }

    pub fn tanh(self) -> Result<Var<'t, T>> {
        let y = self.value().map(|z| z.tanh());
        let saved = y.clone();
        self.tape.record(
            "tanh",
            y,
            &[self],
            boxed(move |g, _| vec![Some(zip_map(g, &saved, |u, t| u * (T::one() - t * t)))]),
        )
    }

    pub fn relu(self) -> Result<Var<'t, T>> {
        let x = self.value();
        let y = x.map(|z| if z > T::zero() { z } else { T::zero() });
        self.tape.record(
            "relu",
            y,
            &[self],
            boxed(move |g, _| {
                vec![Some(zip_map(g, &x, |u, z| if z > T::zero() { u } else { T::zero() }))]
            }),
        )
    }

    // ---- normalisation and reductions ------------------------------------

    /// Softmax along `axis`, stabilised by max-subtraction.
    pub fn softmax(self, axis: usize) -> Result<Var<'t, T>> {
        let y = kernels::softmax(&self.value(), axis)?;
        let saved = y.clone();
        self.tape.record(
            "softmax",
            y,
            &[self],
            boxed(move |g, _| {
                let (outer, len, inner) = axis_split(saved.shape(), axis);
                let (s, gd) = (saved.data(), g.data());
                let mut dx = vec![T::zero(); s.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |k: usize| (o * len + k) * inner + i;
                        let dot = (0..len).fold(T::zero(), |acc, k| acc + gd[idx(k)] * s[idx(k)]);
                        for k in 0..len {
                            dx[idx(k)] = s[idx(k)] * (gd[idx(k)] - dot);
                        }
                    }
                }
                vec![Some(Tensor::new(saved.shape(), dx).expect("softmax shape"))]
            }),
        )
    }

    /// Sum of all entries, as a `[1]` scalar.
    pub fn sum(self) -> Result<Var<'t, T>> {
        let x = self.value();
        let shape = x.shape().to_vec();
        self.tape.record(
            "sum",
            Tensor::scalar(x.sum()),
            &[self],
            boxed(move |g, _| vec![Some(Tensor::full(&shape, g.data()[0]))]),
        )
    }

    /// Mean along `axis`; the axis is removed from the shape (a rank-1
    /// input reduces to `[1]`).
    pub fn mean(self, axis: usize) -> Result<Var<'t, T>> {
        let x = self.value();
        if axis >= x.rank() {
            return Err(Error::dim("mean", format!("axis {axis} out of range for {:?}", x.shape())));
        }
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let n = T::from_usize(len).expect("length fits scalar");
        let src = x.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..len {
                for i in 0..inner {
                    out[o * inner + i] += src[(o * len + k) * inner + i];
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= n);
        let mut out_shape: Vec<usize> = x.shape().to_vec();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let in_shape = x.shape().to_vec();
        self.tape.record(
            "mean",
            Tensor::new(&out_shape, out)?,
            &[self],
            boxed(move |g, _| {
                let gd = g.data();
                let mut dx = vec![T::zero(); outer * len * inner];
                for o in 0..outer {
                    for k in 0..len {
                        for i in 0..inner {
                            dx[(o * len + k) * inner + i] = gd[o * inner + i] / n;
                        }
                    }
                }
                vec![Some(Tensor::new(&in_shape, dx).expect("mean shape"))]
            }),
        )
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<'t, T>], axis: usize) -> Result<Var<'t, T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("concat", "no parts given"))?;
        let values: Vec<Tensor<T>> = parts.iter().map(|p| p.value()).collect();
        let rank = values[0].rank();
        if axis >= rank {
            return Err(Error::dim("concat", format!("axis {axis} out of range for rank {rank}")));
        }
        for v in &values[1..] {
            let compatible = v.rank() == rank
                && v.shape().iter().zip(values[0].shape()).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::dim(
                    "concat",
                    format!("{:?} and {:?} disagree off axis {axis}", values[0].shape(), v.shape()),
                ));
            }
        }
        let lens: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
        let total: usize = lens.iter().sum();
        let (outer, _, inner) = axis_split(values[0].shape(), axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &len) in values.iter().zip(&lens) {
                out.extend_from_slice(&v.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = values[0].shape().to_vec();
        shape[axis] = total;
        let part_shapes: Vec<Vec<usize>> = values.iter().map(|v| v.shape().to_vec()).collect();
        first.tape.record(
            "concat",
            Tensor::new(&shape, out)?,
            parts,
            boxed(move |g, needs| {
                let gd = g.data();
                let mut offset = 0;
                let mut grads = Vec::with_capacity(lens.len());
                for ((&len, need), shape) in lens.iter().zip(needs).zip(&part_shapes) {
                    if *need {
                        let mut d = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let start = (o * total + offset) * inner;
                            d.extend_from_slice(&gd[start..start + len * inner]);
                        }
                        grads.push(Some(Tensor::new(shape, d).expect("concat part")));
                    } else {
                        grads.push(None);
                    }
                    offset += len;
                }
                grads
            }),
        )
    }

    /// `[start, end)` along `axis`.
    pub fn slice(self, axis: usize, start: usize, end: usize) -> Result<Var<'t, T>> {
        let x = self.value();
        if axis >= x.rank() || start >= end || end > x.shape()[axis] {
            return Err(Error::dim(
                "slice",
                format!("range {start}..{end} on axis {axis} of {:?}", x.shape()),
            ));
        }
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let width = end - start;
        let mut out = Vec::with_capacity(outer * width * inner);
        for o in 0..outer {
            let base = (o * len + start) * inner;
            out.extend_from_slice(&x.data()[base..base + width * inner]);
        }
        let mut shape = x.shape().to_vec();
        shape[axis] = width;
        let in_shape = x.shape().to_vec();
        self.tape.record(
            "slice",
            Tensor::new(&shape, out)?,
            &[self],
            boxed(move |g, _| {
                let mut dx = vec![T::zero(); outer * len * inner];
                for o in 0..outer {
                    let base = (o * len + start) * inner;
                    dx[base..base + width * inner]
                        .copy_from_slice(&g.data()[o * width * inner..(o + 1) * width * inner]);
                }
                vec![Some(Tensor::new(&in_shape, dx).expect("slice shape"))]
            }),
        )
    }

    // ---- convolution ----------------------------------------------------

    /// Stride-1 cross-correlation over time (no kernel flip).
    ///
    /// `self`: `[c_in, T]`; `kernels`: `[c_out, width, c_in]`;
    /// `bias`: `[c_out]`. Output `[c_out, T_out]` with `T_out = T` for
    /// [`Padding::Same`].
    pub fn conv1d(self, kernels: Var<'t, T>, bias: Var<'t, T>, padding: Padding) -> Result<Var<'t, T>> {
        self.same_tape(&kernels);
        self.same_tape(&bias);
        let (x, k, b) = (self.value(), kernels.value(), bias.value());
        let &[c_out, width, c_in] = k.shape() else {
            return Err(Error::dim("conv1d", format!("kernels must be rank 3, got {:?}", k.shape())));
        };
        let (xc, t_in) = x.dims2();
        if x.rank() != 2 || xc != c_in {
            return Err(Error::dim(
                "conv1d",
                format!("input {:?} does not have {c_in} channels", x.shape()),
            ));
        }
        if b.len() != c_out {
            return Err(Error::dim("conv1d", format!("bias {:?} vs {c_out} filters", b.shape())));
        }
        let (left, padded) = match padding {
            Padding::Same => (same_pad_left(width), t_in + width - 1),
            Padding::Valid => (0, t_in),
        };
        if width > padded {
            return Err(Error::dim(
                "conv1d",
                format!("kernel width {width} exceeds padded input length {padded}"),
            ));
        }
        let t_out = padded - width + 1;
        let rows = width * c_in;
        let cols = Tensor::new(&[rows, t_out], im2col(x.data(), c_in, t_in, width, left, t_out))?;
        let k2 = k.reshape(&[c_out, rows])?;
        let mut out = kernels::matmul(&k2, false, &cols, false)?.into_vec();
        for (row, &bv) in out.chunks_mut(t_out).zip(b.data()) {
            row.iter_mut().for_each(|v| *v += bv);
        }
        let k_shape = k.shape().to_vec();
        let b_shape = b.shape().to_vec();
        self.tape.record(
            "conv1d",
            Tensor::new(&[c_out, t_out], out)?,
            &[self, kernels, bias],
            boxed(move |g, needs| {
                let dx = needs[0].then(|| {
                    let dcols = kernels::matmul(&k2, true, g, false).expect("conv backward");
                    let d = col2im(dcols.data(), c_in, t_in, width, left, t_out);
                    Tensor::new(&[c_in, t_in], d).expect("conv input grad")
                });
                let dk = needs[1].then(|| {
                    kernels::matmul(g, false, &cols, true)
                        .and_then(|d| d.reshape(&k_shape))
                        .expect("conv kernel grad")
                });
                let db = needs[2].then(|| {
                    let sums = g.data().chunks(t_out).map(|r| r.iter().fold(T::zero(), |a, &v| a + v));
                    Tensor::new(&b_shape, sums.collect()).expect("conv bias grad")
                });
                vec![dx, dk, db]
            }),
        )
    }

    /// Training-mode batch normalisation of a `[channels, N]` input: each
    /// row is standardised with its own mean and biased variance, then
    /// scaled by `gamma` and shifted by `beta`.
    ///
    /// Also returns the per-channel batch mean and biased variance.
    pub fn batch_norm(
        self,
        gamma: Var<'t, T>,
        beta: Var<'t, T>,
        eps: T,
    ) -> Result<(Var<'t, T>, Tensor<T>, Tensor<T>)> {
        self.same_tape(&gamma);
        self.same_tape(&beta);
        let (x, ga, be) = (self.value(), gamma.value(), beta.value());
        let (c, n) = x.dims2();
        if x.rank() != 2 || ga.len() != c || be.len() != c {
            return Err(Error::dim(
                "batch_norm",
                format!("input {:?} vs gamma {:?} / beta {:?}", x.shape(), ga.shape(), be.shape()),
            ));
        }
        let nf = T::from_usize(n).expect("count fits scalar");
        let mut means = Vec::with_capacity(c);
        let mut vars = Vec::with_capacity(c);
        let mut xhat = Vec::with_capacity(c * n);
        let mut out = Vec::with_capacity(c * n);
        for (ch, row) in x.data().chunks(n).enumerate() {
            let mean = row.iter().fold(T::zero(), |a, &v| a + v) / nf;
            let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / nf;
            let inv = T::one() / (var + eps).sqrt();
            for &v in row {
                let h = (v - mean) * inv;
                xhat.push(h);
                out.push(ga.data()[ch] * h + be.data()[ch]);
            }
            means.push(mean);
            vars.push(var);
        }
        let mean_t = Tensor::new(&[c], means)?;
        let var_t = Tensor::new(&[c], vars.clone())?;
        let g_shape = ga.shape().to_vec();
        let b_shape = be.shape().to_vec();
        let y = self.tape.record(
            "batch_norm",
            Tensor::new(&[c, n], out)?,
            &[self, gamma, beta],
            boxed(move |g, needs| {
                let gd = g.data();
                let mut dx = needs[0].then(|| vec![T::zero(); c * n]);
                let mut dgamma = Vec::with_capacity(c);
                let mut dbeta = Vec::with_capacity(c);
                for ch in 0..c {
                    let gr = &gd[ch * n..(ch + 1) * n];
                    let hr = &xhat[ch * n..(ch + 1) * n];
                    let sum_g = gr.iter().fold(T::zero(), |a, &v| a + v);
                    let sum_gh = gr.iter().zip(hr).fold(T::zero(), |a, (&u, &h)| a + u * h);
                    dbeta.push(sum_g);
                    dgamma.push(sum_gh);
                    if let Some(dx) = dx.as_mut() {
                        let inv = T::one() / (vars[ch] + eps).sqrt();
                        let coef = ga.data()[ch] * inv / nf;
                        for ((d, &u), &h) in dx[ch * n..(ch + 1) * n].iter_mut().zip(gr).zip(hr) {
                            *d = coef * (nf * u - sum_g - h * sum_gh);
                        }
                    }
                }
                vec![
                    dx.map(|d| Tensor::new(&[c, n], d).expect("bn input grad")),
                    needs[1].then(|| Tensor::new(&g_shape, dgamma).expect("bn gamma grad")),
                    needs[2].then(|| Tensor::new(&b_shape, dbeta).expect("bn beta grad")),
                ]
            }),
        )?;
        Ok((y, mean_t, var_t))
    }

    /// Inference-mode batch normalisation with fixed statistics.
    pub fn batch_norm_fixed(
        self,
        gamma: Var<'t, T>,
        beta: Var<'t, T>,
        mean: &Tensor<T>,
        var: &Tensor<T>,
        eps: T,
    ) -> Result<Var<'t, T>> {
        self.same_tape(&gamma);
        self.same_tape(&beta);
        let (x, ga, be) = (self.value(), gamma.value(), beta.value());
        let (c, n) = x.dims2();
        if x.rank() != 2 || [ga.len(), be.len(), mean.len(), var.len()].iter().any(|&l| l != c) {
            return Err(Error::dim("batch_norm_fixed", format!("channel mismatch for {:?}", x.shape())));
        }
        let inv: Vec<T> = var.data().iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(c * n);
        let mut out = Vec::with_capacity(c * n);
        for (ch, row) in x.data().chunks(n).enumerate() {
            for &v in row {
                let h = (v - mean.data()[ch]) * inv[ch];
                xhat.push(h);
                out.push(ga.data()[ch] * h + be.data()[ch]);
            }
        }
        let g_shape = ga.shape().to_vec();
        let b_shape = be.shape().to_vec();
        self.tape.record(
            "batch_norm_fixed",
            Tensor::new(&[c, n], out)?,
            &[self, gamma, beta],
            boxed(move |g, needs| {
                let gd = g.data();
                let dx = needs[0].then(|| {
                    let d = gd.iter().enumerate().map(|(i, &u)| u * ga.data()[i / n] * inv[i / n]);
                    Tensor::new(&[c, n], d.collect()).expect("bn input grad")
                });
                let dgamma = needs[1].then(|| {
                    let d = (0..c).map(|ch| {
                        (0..n).fold(T::zero(), |a, t| a + gd[ch * n + t] * xhat[ch * n + t])
                    });
                    Tensor::new(&g_shape, d.collect()).expect("bn gamma grad")
                });
                let dbeta = needs[2].then(|| {
                    let d = gd.chunks(n).map(|r| r.iter().fold(T::zero(), |a, &v| a + v));
                    Tensor::new(&b_shape, d.collect()).expect("bn beta grad")
                });
                vec![dx, dgamma, dbeta]
            }),
        )
    }

    // ---- loss -------------------------------------------------------------

    /// `-Σ_n w[y_n] · ln(max(p[n, y_n], 1e-12))` over a `[N, C]` matrix of
    /// class probabilities.
    pub fn weighted_cross_entropy(self, labels: &[usize], weights: &[T]) -> Result<Var<'t, T>> {
        let p = self.value();
        let (n, c) = p.dims2();
        if labels.len() != n || weights.len() != c {
            return Err(Error::dim(
                "cross_entropy",
                format!(
                    "{} labels / {} weights for probabilities {:?}",
                    labels.len(),
                    weights.len(),
                    p.shape()
                ),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Contract(format!("label {bad} outside 0..{c}")));
        }
        let floor = T::lit(1e-12);
        let loss = labels.iter().enumerate().fold(T::zero(), |acc, (row, &y)| {
            acc - weights[y] * p.data()[row * c + y].max(floor).ln()
        });
        let labels = labels.to_vec();
        let weights = weights.to_vec();
        let shape = p.shape().to_vec();
        self.tape.record(
            "cross_entropy",
            Tensor::scalar(loss),
            &[self],
            boxed(move |g: &Tensor<T>, _| {
                let mut d = vec![T::zero(); n * c];
                for (row, &y) in labels.iter().enumerate() {
                    let pv = p.data()[row * c + y];
                    if pv > floor {
                        d[row * c + y] = -g.data()[0] * weights[y] / pv;
                    }
                }
                vec![Some(Tensor::new(&shape, d).expect("ce grad"))]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::Tape;
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn elementwise_values() {
        let tape = Tape::new();
        let x = tape.constant(t(&[3], &[0.0, -2.0, 3.0]));
        assert_eq!(x.sigmoid().unwrap().value().data()[0], 0.5);
        assert_eq!(x.relu().unwrap().value().data(), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn tanh_gradient_at_zero_is_one() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let y = x.tanh().unwrap().sum().unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data()[0], 1.0);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let tape = Tape::new();
        let a = tape.constant(t(&[2], &[1.0, 2.0]));
        let b = tape.constant(t(&[3], &[1.0, 2.0, 3.0]));
        assert!(matches!(a.add(b), Err(Error::Dimension { .. })));
        assert!(matches!(a.mul(b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn softmax_is_stable_for_large_inputs() {
        let tape = Tape::new();
        let x = tape.constant(t(&[2], &[1000.0, 1000.0]));
        assert_eq!(x.softmax(0).unwrap().value().data(), &[0.5, 0.5]);
        let z = tape.constant(t(&[3], &[0.0, 0.0, 0.0]));
        for v in z.softmax(0).unwrap().value().data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn concat_mean_and_their_gradients() {
        let tape = Tape::new();
        let a = tape.constant(t(&[2], &[1.0, 2.0]));
        let b = tape.constant(t(&[1], &[3.0]));
        assert_eq!(Var::concat(&[a, b], 0).unwrap().value().data(), &[1.0, 2.0, 3.0]);

        let c = tape.constant(t(&[3], &[2.0, 2.0, 2.0]));
        assert_eq!(c.mean(0).unwrap().value().data(), &[2.0]);

        let w = tape.leaf(t(&[4], &[1.0, -1.0, 5.0, 0.0]));
        let m = w.mean(0).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn concat_rejects_mismatched_parts() {
        let tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[0.0; 4]));
        let b = tape.constant(t(&[3, 3], &[0.0; 9]));
        assert!(Var::concat(&[a, b], 0).is_err());
    }

    #[test]
    fn sum_and_square_gradients() {
        let tape = Tape::new();
        let w = tape.leaf(t(&[3], &[0.5, -1.0, 2.0]));
        let loss = w.sum().unwrap();
        assert_eq!(tape.backward(loss).unwrap().get(w).unwrap().data(), &[1.0; 3]);
        let sq = w.mul(w).unwrap().sum().unwrap();
        assert_eq!(tape.backward(sq).unwrap().get(w).unwrap().data(), &[1.0, -2.0, 4.0]);
    }

    #[test]
    fn unreached_leaf_gets_zero_gradient() {
        let tape = Tape::new();
        let used = tape.leaf(t(&[2], &[1.0, 2.0]));
        let unused = tape.leaf(t(&[2, 2], &[1.0; 4]));
        let loss = used.sum().unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(unused).unwrap().data(), &[0.0; 4]);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let tape = Tape::new();
        let w = tape.leaf(t(&[2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn conv_identity_kernel_and_same_padding() {
        let tape = Tape::new();
        let s = tape.constant(t(&[1, 4], &[0.3, -1.0, 2.0, 0.5]));
        let k1 = tape.constant(t(&[1, 1, 1], &[1.0]));
        let zero = tape.constant(t(&[1], &[0.0]));
        assert_eq!(s.conv1d(k1, zero, Padding::Same).unwrap().value().data(), s.value().data());

        let x = tape.constant(t(&[1, 4], &[0.0, 1.0, 0.0, 0.0]));
        let k3 = tape.constant(t(&[1, 3, 1], &[1.0, 1.0, 1.0]));
        let y = x.conv1d(k3, zero, Padding::Same).unwrap();
        assert_eq!(y.value().data(), &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn conv_is_cross_correlation() {
        let tape = Tape::new();
        let x = tape.constant(t(&[1, 3], &[1.0, 2.0, 3.0]));
        let k = tape.constant(t(&[1, 2, 1], &[1.0, 10.0]));
        let b = tape.constant(t(&[1], &[0.0]));
        let y = x.conv1d(k, b, Padding::Valid).unwrap();
        assert_eq!(y.value().data(), &[21.0, 32.0]);
    }

    #[test]
    fn valid_conv_rejects_wide_kernel() {
        let tape = Tape::new();
        let x = tape.constant(t(&[1, 2], &[1.0, 2.0]));
        let k = tape.constant(t(&[1, 3, 1], &[1.0; 3]));
        let b = tape.constant(t(&[1], &[0.0]));
        assert!(matches!(x.conv1d(k, b, Padding::Valid), Err(Error::Dimension { .. })));
    }

    #[test]
    fn overflow_is_a_numeric_fault() {
        let tape = Tape::new();
        let x = tape.constant(t(&[1], &[1e300]));
        assert!(matches!(x.mul(x), Err(Error::NumericFault { .. })));
    }

    #[test]
    fn cross_entropy_values() {
        let tape = Tape::new();
        let uniform = tape.constant(t(&[1, 2], &[0.5, 0.5]));
        let l = uniform.weighted_cross_entropy(&[0], &[1.0, 1.0]).unwrap();
        assert!((l.value().data()[0] - 2f64.ln()).abs() < 1e-15);
        let perfect = tape.constant(t(&[1, 3], &[0.0, 1.0, 0.0]));
        let l = perfect.weighted_cross_entropy(&[1], &[1.0; 3]).unwrap();
        assert!(l.value().data()[0].abs() <= 1e-11);
        assert!(matches!(
            perfect.weighted_cross_entropy(&[3], &[1.0; 3]),
            Err(Error::Contract(_))
        ));
    }
}
