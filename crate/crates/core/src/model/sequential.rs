//! Layer stack with cached forward and full backward pass.

use crate::error::{shape_err, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward, relu,
    relu_backward, softmax, softmax_cross_entropy, FilterBank, PoolIndices,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(FilterBank<T>),
    Relu,
    MaxPool,
    /// Dense layer over the flattened input, `weights` shaped `[m, n]`.
    Dense { weights: Tensor<T>, bias: Tensor<T> },
}

enum Cache<T> {
    Input(Tensor<T>),
    Pool(PoolIndices),
}

/// A standardized network input with its class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub input: Tensor<T>,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Parameter tensors in storage order: for each layer, weights then bias.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(f) => out.extend([&f.weights, &f.bias]),
                Layer::Dense { weights, bias } => out.extend([weights, bias]),
                Layer::Relu | Layer::MaxPool => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(f) => out.extend([&mut f.weights, &mut f.bias]),
                Layer::Dense { weights, bias } => out.extend([weights, bias]),
                Layer::Relu | Layer::MaxPool => {}
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn step(layer: &Layer<T>, x: Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        Ok(match layer {
            Layer::Conv(f) => (conv2d_forward(&x, f)?, Cache::Input(x)),
            Layer::Relu => (relu(&x), Cache::Input(x)),
            Layer::MaxPool => {
                let (y, idx) = maxpool_forward(&x)?;
                (y, Cache::Pool(idx))
            }
            Layer::Dense { weights, bias } => (dense_forward(&x, weights, bias)?, Cache::Input(x)),
        })
    }

    pub fn logits(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::step(layer, x)?.0;
        }
        Ok(x)
    }

    pub fn probabilities(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        Ok(softmax(self.logits(input)?.data()))
    }

    /// Logits plus the ReLU sign pattern and pooling winners met on the way.
    /// Two parameter settings with the same pattern lie in the same linear
    /// region of the network.
    pub fn logits_and_pattern(&self, input: &Tensor<T>, pattern: &mut Vec<u32>) -> Result<Tensor<T>> {
        self.run_from(0, input.clone(), pattern)
    }

    /// Inputs seen by each layer, plus the logits as the last entry.
    pub fn layer_inputs(&self, input: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut out = vec![input.clone()];
        for layer in &self.layers {
            let x = out.last().expect("non-empty").clone();
            out.push(Self::step(layer, x)?.0);
        }
        Ok(out)
    }

    /// Like [`Sequential::logits_and_pattern`], starting at layer `start`
    /// with `x` as its input.
    pub fn run_from(&self, start: usize, mut x: Tensor<T>, pattern: &mut Vec<u32>) -> Result<Tensor<T>> {
        for layer in &self.layers[start..] {
            let (y, cache) = Self::step(layer, x)?;
            match (layer, &cache) {
                (Layer::Relu, Cache::Input(pre)) => {
                    pattern.extend(pre.data().iter().map(|&v| u32::from(v > T::zero())));
                }
                (_, Cache::Pool(idx)) => pattern.extend(idx.argmax().iter().map(|&i| i as u32)),
                _ => {}
            }
            x = y;
        }
        Ok(x)
    }

    /// Loss of one example and its gradient for every parameter tensor, in
    /// [`Sequential::params`] order.
    pub fn example_gradient(&self, example: &Example<T>) -> Result<(T, Vec<Tensor<T>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = example.input.clone();
        for layer in &self.layers {
            let (y, cache) = Self::step(layer, x)?;
            caches.push(cache);
            x = y;
        }
        if x.len() <= example.class {
            return shape_err(format!("class {} out of range for {} logits", example.class, x.len()));
        }
        let (loss, mut grad) = softmax_cross_entropy(&x, example.class);

        let mut grads_rev: Vec<Tensor<T>> = Vec::new();
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            grad = match (layer, cache) {
                (Layer::Conv(f), Cache::Input(input)) => {
                    let g = conv2d_backward(&input, f, &grad)?;
                    grads_rev.extend([g.bias, g.weights]);
                    g.input
                }
                (Layer::Dense { weights, bias }, Cache::Input(input)) => {
                    let g = dense_backward(&input, weights, bias, &grad)?;
                    grads_rev.extend([g.bias, g.weights]);
                    g.input
                }
                (Layer::Relu, Cache::Input(input)) => relu_backward(&input, &grad)?,
                (Layer::MaxPool, Cache::Pool(idx)) => maxpool_backward(&idx, &grad)?,
                _ => unreachable!("cache kind follows layer kind"),
            };
        }
        grads_rev.reverse();
        Ok((loss, grads_rev))
    }

    /// Mean loss and mean gradient over `batch`, accumulated in batch order.
    pub fn batch_gradient<'a>(&self, batch: impl IntoIterator<Item = &'a Example<T>>) -> Result<(T, Vec<Tensor<T>>)> {
        let mut total = T::zero();
        let mut count = 0usize;
        let mut acc: Vec<Tensor<T>> = self.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        for ex in batch {
            let (loss, grads) = self.example_gradient(ex)?;
            total += loss;
            count += 1;
            for (a, g) in acc.iter_mut().zip(&grads) {
                for (d, &v) in a.data_mut().iter_mut().zip(g.data()) {
                    *d += v;
                }
            }
        }
        if count == 0 {
            return shape_err("empty batch");
        }
        let n = T::lit(count as f64);
        for a in &mut acc {
            for v in a.data_mut() {
                *v /= n;
            }
        }
        Ok((total / n, acc))
    }

    /// Mean cross-entropy over `batch`.
    pub fn batch_loss(&self, batch: &[Example<T>]) -> Result<T> {
        let mut total = T::zero();
        for ex in batch {
            let logits = self.logits(&ex.input)?;
            total += softmax_cross_entropy(&logits, ex.class).0;
        }
        Ok(total / T::lit(batch.len() as f64))
    }

    /// Flat parameter access, indices in [`Sequential::params`] order.
    pub fn param_at(&self, mut index: usize) -> T {
        for p in self.params() {
            if index < p.len() {
                return p.data()[index];
            }
            index -= p.len();
        }
        panic!("parameter index out of range")
    }

    /// Index of the layer holding flat parameter `index`.
    pub fn layer_of_param(&self, mut index: usize) -> usize {
        for (l, layer) in self.layers.iter().enumerate() {
            let n = match layer {
                Layer::Conv(f) => f.weights.len() + f.bias.len(),
                Layer::Dense { weights, bias } => weights.len() + bias.len(),
                Layer::Relu | Layer::MaxPool => 0,
            };
            if index < n {
                return l;
            }
            index -= n;
        }
        panic!("parameter index out of range")
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv(f) => Layer::Conv(
                    FilterBank::new(f.weights.cast(), f.bias.cast()).expect("cast preserves a valid filter bank"),
                ),
                Layer::Relu => Layer::Relu,
                Layer::MaxPool => Layer::MaxPool,
                Layer::Dense { weights, bias } => Layer::Dense { weights: weights.cast(), bias: bias.cast() },
            })
            .collect();
        Sequential { layers }
    }

    pub fn set_param_at(&mut self, mut index: usize, value: T) {
        for p in self.params_mut() {
            if index < p.len() {
                p.data_mut()[index] = value;
                return;
            }
            index -= p.len();
        }
        panic!("parameter index out of range")
    }
}
