use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::LayerGradients;

fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize)> {
    let (m, n) = match weights.shape()[..] {
        [m, n] => (m, n),
        _ => return shape_err(format!("dense weights must be [m,n], got {:?}", weights.shape())),
    };
    if input.len() != n {
        return shape_err(format!("dense input has {} values, weights expect {n}", input.len()));
    }
    if bias.shape() != [m] {
        return shape_err(format!("dense bias must be [{m}], got {:?}", bias.shape()));
    }
    Ok((m, n))
}

/// Affine map `W x + b`. The input is read flat, so a `[C,H,W]` feature map
/// is consumed in row-major order without an explicit reshape.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = check(input, weights, bias)?;
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&wv, &xv)| acc + wv * xv))
        .collect();
    Tensor::new(vec![m], out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<LayerGradients<T>> {
    let (m, n) = check(input, weights, bias)?;
    if upstream.len() != m {
        return shape_err(format!("upstream gradient has {} values, expected {m}", upstream.len()));
    }
    let x = input.data();
    let g = upstream.data();
    let mut grad_w = Vec::with_capacity(m * n);
    for &gi in g {
        grad_w.extend(x.iter().map(|&xv| gi * xv));
    }
    let mut grad_x = vec![T::zero(); n];
    for (row, &gi) in weights.data().chunks_exact(n).zip(g) {
        for (d, &wv) in grad_x.iter_mut().zip(row) {
            *d += gi * wv;
        }
    }
    Ok(LayerGradients {
        weights: Tensor::new(vec![m, n], grad_w)?,
        bias: Tensor::new(vec![m], g.to_vec())?,
        input: Tensor::new(input.shape().to_vec(), grad_x)?,
    })
}
