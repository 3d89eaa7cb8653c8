use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Side of the disjoint pooling window (also its stride).
pub const POOL_WINDOW: usize = 2;

/// Winning input positions of a max-pool forward pass, one flat input index
/// per output element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    pub fn output_shape(&self) -> [usize; 3] {
        [
            self.input_shape[0],
            self.input_shape[1] / POOL_WINDOW,
            self.input_shape[2] / POOL_WINDOW,
        ]
    }
}

/// Non-overlapping 2x2 max pooling. Ties go to the first position in
/// row-major order within the window.
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let (c, h, w) = input.dims3()?;
    if h % POOL_WINDOW != 0 || w % POOL_WINDOW != 0 {
        return shape_err(format!("max pooling needs even spatial extents, got {h}x{w}"));
    }
    let (oh, ow) = (h / POOL_WINDOW, w / POOL_WINDOW);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = base + oy * POOL_WINDOW * w + ox * POOL_WINDOW;
                let mut best = x[best_idx];
                for dy in 0..POOL_WINDOW {
                    for dx in 0..POOL_WINDOW {
                        let idx = base + (oy * POOL_WINDOW + dy) * w + ox * POOL_WINDOW + dx;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok((
        Tensor::new(vec![c, oh, ow], out)?,
        PoolIndices { input_shape: vec![c, h, w], argmax },
    ))
}

/// Routes each upstream value to the input position that won the forward max.
pub fn maxpool_backward<T: Scalar>(indices: &PoolIndices, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != indices.output_shape() {
        return shape_err(format!(
            "upstream gradient {:?} does not match pooled shape {:?}",
            upstream.shape(),
            indices.output_shape()
        ));
    }
    let mut grad = Tensor::zeros(&indices.input_shape);
    let g = grad.data_mut();
    for (&idx, &u) in indices.argmax.iter().zip(upstream.data()) {
        g[idx] += u;
    }
    Ok(grad)
}
