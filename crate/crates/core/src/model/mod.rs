//! The classifier: stacked `conv 5x5 -> ReLU -> maxpool 2x2` stages down to a
//! 4x4 map, then one dense layer with two outputs (class 1 = AD).

mod checkpoint;
mod config;
mod sequential;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use config::NetworkConfig;
pub use sequential::{Example, Layer, Sequential};
pub use train::{train, EpochRecord, TrainingConfig, TrainingHistory};

use rand_distr::{Distribution, Normal};

use crate::error::{shape_err, Result};
use crate::layers::FilterBank;
use crate::rng::{self, domain};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Where the current parameters came from in training.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    pub epoch: usize,
    pub val_cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: NetworkConfig,
    body: Sequential<T>,
    pub meta: TrainingMeta,
}

impl<T: Scalar> Network<T> {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn body(&self) -> &Sequential<T> {
        &self.body
    }

    pub fn body_mut(&mut self) -> &mut Sequential<T> {
        &mut self.body
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let n = self.config.input_size;
        if input.shape() != [1, n, n] {
            return shape_err(format!("network expects a [1, {n}, {n}] input, got {:?}", input.shape()));
        }
        Ok(())
    }

    pub fn probabilities(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        self.check_input(input)?;
        self.body.probabilities(input)
    }

    /// Replaces all parameters from a flat list in storage order.
    pub(crate) fn load_flat(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.body.num_params() {
            return shape_err(format!("expected {} parameters, got {}", self.body.num_params(), values.len()));
        }
        let mut it = values.iter();
        for p in self.body.params_mut() {
            for (d, &v) in p.data_mut().iter_mut().zip(it.by_ref()) {
                *d = v;
            }
        }
        Ok(())
    }
}

/// He-normal weights (`std = sqrt(2 / fan_in)`) drawn in parameter order
/// from the stream keyed by `seed`; biases zero.
pub fn build_network<T: Scalar>(config: &NetworkConfig, seed: u64) -> Result<Network<T>> {
    config.validate()?;
    let mut rng = rng::stream(&[domain::INIT, seed]);
    let mut he = |shape: &[usize], fan_in: usize| {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        Tensor::from_fn(shape, |_| T::lit(normal.sample(&mut rng)))
    };
    let k = config.kernel_size;
    let mut layers = Vec::new();
    let mut in_ch = 1;
    for out_ch in config.filter_counts()? {
        let weights = he(&[out_ch, in_ch, k, k], in_ch * k * k);
        layers.push(Layer::Conv(FilterBank::new(weights, Tensor::zeros(&[out_ch]))?));
        layers.push(Layer::Relu);
        layers.push(Layer::MaxPool);
        in_ch = out_ch;
    }
    let n = config.dense_inputs()?;
    layers.push(Layer::Dense { weights: he(&[config.classes, n], n), bias: Tensor::zeros(&[config.classes]) });
    Ok(Network { config: config.clone(), body: Sequential::new(layers), meta: TrainingMeta::default() })
}

/// Class probabilities, one row of `[p_normal, p_ad]` per input.
pub fn forward<T: Scalar>(network: &Network<T>, batch: &[Tensor<T>]) -> Result<Tensor<T>> {
    if batch.is_empty() {
        return shape_err("empty batch");
    }
    let mut rows = Vec::with_capacity(batch.len() * 2);
    for x in batch {
        rows.extend(network.probabilities(x)?);
    }
    Tensor::new(vec![batch.len(), network.config.classes], rows)
}

/// Probability of the AD class.
pub fn predict_score<T: Scalar>(network: &Network<T>, input: &Tensor<T>) -> Result<T> {
    Ok(network.probabilities(input)?[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_at_256() {
        let net: Network<f32> = build_network(&NetworkConfig::default(), 0).unwrap();
        let convs: Vec<usize> = net
            .body()
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Conv(f) => Some(f.out_channels()),
                _ => None,
            })
            .collect();
        assert_eq!(convs, vec![8, 16, 32, 64, 128, 256]);
        match net.body().layers().last().unwrap() {
            Layer::Dense { weights, .. } => assert_eq!(weights.shape(), &[2, 4096]),
            other => panic!("unexpected head {other:?}"),
        }
        assert_eq!(net.body().num_params(), NetworkConfig::default().parameter_count().unwrap());
    }

    #[test]
    fn rows_are_distributions() {
        let net: Network<f64> = build_network(&NetworkConfig::with_input_size(16), 4).unwrap();
        let x = Tensor::from_fn(&[1, 16, 16], |i| ((i * 37) % 11) as f64 / 5.0 - 1.0);
        let out = forward(&net, &[x.clone(), x.clone()]).unwrap();
        assert_eq!(out.shape(), &[2, 2]);
        let d = out.data();
        assert!((d[0] + d[1] - 1.0).abs() < 1e-12);
        assert_eq!(d[..2], d[2..]);
        assert_eq!(predict_score(&net, &x).unwrap(), d[1]);
    }

    #[test]
    fn wrong_input_size() {
        let net: Network<f64> = build_network(&NetworkConfig::with_input_size(16), 4).unwrap();
        assert!(predict_score(&net, &Tensor::zeros(&[1, 8, 8])).is_err());
        assert!(build_network::<f64>(&NetworkConfig::with_input_size(60), 0).is_err());
    }
}
