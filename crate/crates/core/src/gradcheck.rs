//! Central finite-difference check of the analytic network gradient.
//!
//! Coordinates whose `±epsilon` perturbation changes the ReLU sign pattern
//! or a pooling winner straddle a kink, where the central difference does
//! not estimate the derivative; those are excluded and counted.
//!
//! The perturbed losses are evaluated in double-double arithmetic.

use std::collections::HashMap;

use num_traits::Zero;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::model::{Example, Sequential};
use crate::rng::{self, domain};
use crate::layers::softmax_cross_entropy;
use crate::scalar::{DoubleDouble, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Check every parameter when the model has at most this many;
    /// otherwise a seeded subsample of about this size.
    pub max_coordinates: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { epsilon: 1e-5, max_coordinates: 600, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Flat parameter index of the worst coordinate.
    pub worst_index: usize,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Flat indices to test: all of them for small models, otherwise per
/// parameter tensor a share proportional to its size with at least 16
/// (or the whole tensor when smaller).
pub fn select_coordinates(sizes: &[usize], max_coordinates: usize, seed: u64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total <= max_coordinates {
        return (0..total).collect();
    }
    let mut rng = rng::stream(&[domain::GRADCHECK, seed]);
    let mut out = Vec::new();
    let mut offset = 0;
    for &len in sizes {
        let share = (max_coordinates as f64 * len as f64 / total as f64).ceil() as usize;
        let take = share.max(16).min(len);
        let mut picked = index::sample(&mut rng, len, take).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| offset + i));
        offset += len;
    }
    out
}

fn flatten<T: Scalar>(grads: &[Tensor<T>]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.data().iter().map(|v| v.as_f64())).collect()
}

/// Analytic gradient of the mean batch loss, flattened in parameter order.
pub fn analytic_gradient<T: Scalar>(model: &Sequential<T>, batch: &[Example<T>]) -> Result<Vec<f64>> {
    Ok(flatten(&model.batch_gradient(batch)?.1))
}

pub fn gradient_check<T: Scalar>(model: &Sequential<T>, batch: &[Example<T>], epsilon: f64) -> Result<GradCheckReport> {
    gradient_check_with(model, batch, &GradCheckOptions { epsilon, ..GradCheckOptions::default() })
}

pub fn gradient_check_with<T: Scalar>(
    model: &Sequential<T>,
    batch: &[Example<T>],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradient(model, batch)?;
    gradient_check_against(model, batch, &analytic, opts)
}

/// Compares a supplied flat gradient against central differences.
pub fn gradient_check_against<T: Scalar>(
    model: &Sequential<T>,
    batch: &[Example<T>],
    analytic: &[f64],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::Data("gradient check needs a non-empty batch".into()));
    }
    if analytic.len() != model.num_params() {
        return Err(Error::Shape(format!(
            "analytic gradient has {} entries, model has {} parameters",
            analytic.len(),
            model.num_params()
        )));
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Data("model parameters must be finite".into()));
    }
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let coords = select_coordinates(&sizes, opts.max_coordinates, opts.seed);

    let mut probe: Sequential<DoubleDouble> = model.cast();
    let classes: Vec<usize> = batch.iter().map(|ex| ex.class).collect();
    // per example, the input of every layer at the unperturbed parameters
    let mut acts = Vec::with_capacity(batch.len());
    for ex in batch {
        acts.push(probe.layer_inputs(&ex.input.cast())?);
    }
    let mut base_patterns: HashMap<usize, Vec<u32>> = HashMap::new();
    let mut pattern = Vec::new();
    let eps = DoubleDouble::lit(opts.epsilon);
    let mut report = GradCheckReport { max_relative_error: 0.0, worst_index: 0, checked: 0, skipped_kinks: 0 };

    for &i in &coords {
        let layer = probe.layer_of_param(i);
        if !base_patterns.contains_key(&layer) {
            suffix_loss(&probe, layer, &acts, &classes, &mut pattern)?;
            base_patterns.insert(layer, pattern.clone());
        }
        let base = &base_patterns[&layer];
        let p = probe.param_at(i);
        probe.set_param_at(i, p + eps);
        let plus = suffix_loss(&probe, layer, &acts, &classes, &mut pattern)?;
        let mut smooth = pattern == *base;
        probe.set_param_at(i, p - eps);
        let minus = suffix_loss(&probe, layer, &acts, &classes, &mut pattern)?;
        smooth &= pattern == *base;
        probe.set_param_at(i, p);
        if !smooth {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = ((plus - minus) / (eps + eps)).as_f64();
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}

/// Mean batch loss recomputed from layer `start` onward, with the pattern
/// of that suffix.
fn suffix_loss(
    model: &Sequential<DoubleDouble>,
    start: usize,
    acts: &[Vec<Tensor<DoubleDouble>>],
    classes: &[usize],
    pattern: &mut Vec<u32>,
) -> Result<DoubleDouble> {
    pattern.clear();
    let mut total = DoubleDouble::zero();
    for (a, &class) in acts.iter().zip(classes) {
        let logits = model.run_from(start, a[start].clone(), pattern)?;
        total += softmax_cross_entropy(&logits, class).0;
    }
    Ok(total / DoubleDouble::lit(acts.len() as f64))
}
