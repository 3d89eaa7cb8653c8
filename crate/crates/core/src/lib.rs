//! Detection of architectural distortion in grayscale mammography-like
//! images with a small convolutional network.
//!
//! The crate covers the whole pipeline: tensor primitives with hand-written
//! gradients ([`layers`], [`gradcheck`]), the fixed 36-way augmentation
//! ([`augment`]), ROI handling and synthetic data ([`dataset`]), the network
//! and its training loop ([`model`]), ROC analysis ([`eval`]) and
//! whole-exam sliding-window scanning ([`scanner`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, the precision used throughout the pipeline.

pub mod augment;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod image;
pub mod layers;
pub mod model;
pub mod pgm;
pub mod rng;
pub mod scalar;
pub mod scanner;
pub mod tensor;

pub use error::{Error, Result};
pub use image::{BinaryMask, GrayImage};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Tensor = tensor::Tensor<f64>;
pub type FilterBank = layers::FilterBank<f64>;
pub type Network = model::Network<f64>;
pub type Sequential = model::Sequential<f64>;
pub type Example = model::Example<f64>;
pub type RocCurve = eval::RocCurve<f64>;
pub type ScoredSample = eval::ScoredSample<f64>;
pub type ScanResult = scanner::ScanResult<f64>;

pub type Tensor32 = tensor::Tensor<f32>;
pub type Network32 = model::Network<f32>;
