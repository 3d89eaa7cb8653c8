use crate::error::{shape_err, Error, Result};
use crate::scalar::{MatRef, Scalar};
use crate::tensor::Tensor;

use super::LayerGradients;

/// A bank of square convolution kernels, `weights` shaped `[out, in, k, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<T> {
    kernel_size: usize,
    in_channels: usize,
    out_channels: usize,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (out_channels, in_channels, kernel_size) = match weights.shape()[..] {
            [o, i, kh, kw] if kh == kw => (o, i, kh),
            _ => return shape_err(format!("filter weights must be [out,in,k,k], got {:?}", weights.shape())),
        };
        if kernel_size % 2 == 0 {
            return Err(Error::Config(format!("kernel size must be odd, got {kernel_size}")));
        }
        if bias.shape() != [out_channels] {
            return shape_err(format!("bias must be [{out_channels}], got {:?}", bias.shape()));
        }
        Ok(Self { kernel_size, in_channels, out_channels, weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[out_channels, in_channels, kernel_size, kernel_size]),
            Tensor::zeros(&[out_channels]),
        )
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input.dims3()?;
        if c != self.in_channels {
            return shape_err(format!("input has {c} channels, filters expect {}", self.in_channels));
        }
        Ok((c, h, w))
    }
}

/// Overlap of an output range with a shifted input range: output positions
/// `o` in `lo..hi` such that `o + shift` lies in `0..len`.
#[inline]
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

/// Unfolds every `k x k` neighbourhood into a column: row `(c*k + ky)*k + kx`
/// holds, for each output pixel, the input value at offset `(ky, kx)` of
/// channel `c`, zero where the offset falls in the padding.
fn im2col<T: Scalar>(x: &[T], c_in: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let pad = (k / 2) as isize;
    let plane = h * w;
    let mut cols = vec![T::zero(); c_in * k * k * plane];
    for c in 0..c_in {
        let in_plane = &x[c * plane..(c + 1) * plane];
        for ky in 0..k {
            let dy = ky as isize - pad;
            let (y0, y1) = valid_range(h, dy);
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (x0, x1) = valid_range(w, dx);
                if x0 >= x1 {
                    continue;
                }
                let row = &mut cols[((c * k + ky) * k + kx) * plane..][..plane];
                for y in y0..y1 {
                    let src = (y as isize + dy) as usize * w;
                    let src = &in_plane[(src as isize + x0 as isize + dx) as usize..][..x1 - x0];
                    row[y * w + x0..y * w + x1].copy_from_slice(src);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im<T: Scalar>(cols: &[T], c_in: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let pad = (k / 2) as isize;
    let plane = h * w;
    let mut x = vec![T::zero(); c_in * plane];
    for c in 0..c_in {
        let in_plane = &mut x[c * plane..(c + 1) * plane];
        for ky in 0..k {
            let dy = ky as isize - pad;
            let (y0, y1) = valid_range(h, dy);
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (x0, x1) = valid_range(w, dx);
                if x0 >= x1 {
                    continue;
                }
                let row = &cols[((c * k + ky) * k + kx) * plane..][..plane];
                for y in y0..y1 {
                    let dst = (y as isize + dy) as usize * w;
                    let dst = &mut in_plane[(dst as isize + x0 as isize + dx) as usize..][..x1 - x0];
                    for (d, &g) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *d += g;
                    }
                }
            }
        }
    }
    x
}

/// Same-padded cross-correlation (no kernel flip) with zero padding of
/// `(k-1)/2` on each side, plus a per-channel bias.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, filters: &FilterBank<T>) -> Result<Tensor<T>> {
    let (c_in, h, w) = filters.check_input(input)?;
    let k = filters.kernel_size;
    let (plane, patch) = (h * w, c_in * k * k);
    let cols = im2col(input.data(), c_in, h, w, k);
    let mut out = Vec::with_capacity(filters.out_channels * plane);
    for &b in filters.bias.data() {
        out.extend(std::iter::repeat_n(b, plane));
    }
    T::gemm_acc(
        filters.out_channels,
        patch,
        plane,
        MatRef::row_major(filters.weights.data(), patch),
        MatRef::row_major(&cols, plane),
        &mut out,
    );
    Tensor::new(vec![filters.out_channels, h, w], out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    filters: &FilterBank<T>,
    upstream: &Tensor<T>,
) -> Result<LayerGradients<T>> {
    let (c_in, h, w) = filters.check_input(input)?;
    let f_out = filters.out_channels;
    if upstream.shape() != [f_out, h, w] {
        return shape_err(format!("upstream gradient {:?} does not match conv output [{f_out}, {h}, {w}]", upstream.shape()));
    }
    let k = filters.kernel_size;
    let (plane, patch) = (h * w, c_in * k * k);
    let g = upstream.data();
    let cols = im2col(input.data(), c_in, h, w, k);

    let grad_b: Vec<T> = g.chunks_exact(plane).map(|row| T::total(row.iter().copied())).collect();
    let mut grad_w = vec![T::zero(); f_out * patch];
    T::gemm_acc(f_out, plane, patch, MatRef::row_major(g, plane), MatRef::transposed(&cols, plane), &mut grad_w);
    let mut grad_cols = vec![T::zero(); patch * plane];
    T::gemm_acc(
        patch,
        f_out,
        plane,
        MatRef::transposed(filters.weights.data(), patch),
        MatRef::row_major(g, plane),
        &mut grad_cols,
    );
    let grad_x = col2im(&grad_cols, c_in, h, w, k);

    Ok(LayerGradients {
        weights: Tensor::new(filters.weights.shape().to_vec(), grad_w)?,
        bias: Tensor::new(vec![f_out], grad_b)?,
        input: Tensor::new(input.shape().to_vec(), grad_x)?,
    })
}
