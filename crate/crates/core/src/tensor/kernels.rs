//! Tape-free numeric kernels shared by the forward and backward rules.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// `op(a) * op(b)` where `op` optionally transposes. Both operands are
/// viewed as rank-2 (rank-1 is a single row).
pub fn matmul<T: Scalar>(
    a: &Tensor<T>,
    trans_a: bool,
    b: &Tensor<T>,
    trans_b: bool,
) -> Result<Tensor<T>> {
    if a.rank() > 2 || b.rank() > 2 {
        return Err(Error::dim(
            "matmul",
            format!("rank-2 operands required, got {:?} and {:?}", a.shape(), b.shape()),
        ));
    }
    let (ar, ac) = a.dims2();
    let (br, bc) = b.dims2();
    let (m, k, rsa, csa) = if trans_a {
        (ac, ar, 1, ac as isize)
    } else {
        (ar, ac, ac as isize, 1)
    };
    let (k2, n, rsb, csb) = if trans_b {
        (bc, br, 1, bc as isize)
    } else {
        (br, bc, bc as isize, 1)
    };
    if k != k2 {
        return Err(Error::dim(
            "matmul",
            format!(
                "inner extents differ: {:?}{} x {:?}{}",
                a.shape(),
                if trans_a { "^T" } else { "" },
                b.shape(),
                if trans_b { "^T" } else { "" }
            ),
        ));
    }
    let mut out = vec![T::zero(); m * n];
    T::gemm(
        m,
        k,
        n,
        T::one(),
        a.data(),
        rsa,
        csa,
        b.data(),
        rsb,
        csb,
        T::zero(),
        &mut out,
        n as isize,
        1,
    );
    Tensor::new(&[m, n], out)
}

pub fn transpose<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rank() > 2 {
        return Err(Error::dim("transpose", format!("rank-2 required, got {:?}", a.shape())));
    }
    let (r, c) = a.dims2();
    let src = a.data();
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            out.push(src[i * c + j]);
        }
    }
    Tensor::new(&[c, r], out)
}

/// `(outer, axis_len, inner)` decomposition of a shape around `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Max-shifted softmax along `axis`.
pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.rank() {
        return Err(Error::dim(
            "softmax",
            format!("axis {axis} out of range for {:?}", x.shape()),
        ));
    }
    let (outer, len, inner) = axis_split(x.shape(), axis);
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let mut max = T::neg_infinity();
            for k in 0..len {
                max = max.max(src[idx(k)]);
            }
            let mut total = T::zero();
            for k in 0..len {
                let e = (src[idx(k)] - max).exp();
                out[idx(k)] = e;
                total += e;
            }
            for k in 0..len {
                out[idx(k)] /= total;
            }
        }
    }
    Tensor::new(x.shape(), out)
}

/// Left zero-padding for a "same" convolution of the given width. An odd
/// total deficit puts the extra zero on the left.
pub fn same_pad_left(width: usize) -> usize {
    let total = width - 1;
    total - total / 2
}

/// Unfolds `x` (`c_in x t_in`) into a `(width * c_in) x t_out` column
/// matrix. Row `j * c_in + ci`, column `t` holds `x[ci, t + j - left]`
/// (zero outside the series).
pub(crate) fn im2col<T: Scalar>(
    x: &[T],
    c_in: usize,
    t_in: usize,
    width: usize,
    left: usize,
    t_out: usize,
) -> Vec<T> {
    let mut cols = vec![T::zero(); width * c_in * t_out];
    for j in 0..width {
        for ci in 0..c_in {
            let row = &mut cols[(j * c_in + ci) * t_out..(j * c_in + ci + 1) * t_out];
            let src = &x[ci * t_in..(ci + 1) * t_in];
            for (t, slot) in row.iter_mut().enumerate() {
                let pos = t + j;
                if pos >= left && pos - left < t_in {
                    *slot = src[pos - left];
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
pub(crate) fn col2im<T: Scalar>(
    cols: &[T],
    c_in: usize,
    t_in: usize,
    width: usize,
    left: usize,
    t_out: usize,
) -> Vec<T> {
    let mut x = vec![T::zero(); c_in * t_in];
    for j in 0..width {
        for ci in 0..c_in {
            let row = &cols[(j * c_in + ci) * t_out..(j * c_in + ci + 1) * t_out];
            let dst = &mut x[ci * t_in..(ci + 1) * t_in];
            for (t, &v) in row.iter().enumerate() {
                let pos = t + j;
                if pos >= left && pos - left < t_in {
                    dst[pos - left] += v;
                }
            }
        }
    }
    x
}
