//! Differentiable layer primitives with hand-written backward passes.
//!
//! Every function here is pure: it reads its inputs and returns freshly
//! allocated outputs, and accumulation happens in a fixed loop order so
//! identical inputs give bit-identical results.

mod activation;
mod conv;
mod dense;
mod loss;
mod optim;
mod pool;

pub use activation::{relu, relu_backward};
pub use conv::{conv2d_backward, conv2d_forward, FilterBank};
pub use dense::{dense_backward, dense_forward};
pub use loss::{softmax, softmax_cross_entropy};
pub use optim::sgd_update;
pub use pool::{maxpool_backward, maxpool_forward, PoolIndices, POOL_WINDOW};

use crate::tensor::Tensor;

/// Gradients of a parametrised layer: one tensor per parameter plus the
/// gradient with respect to the layer input.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
}
