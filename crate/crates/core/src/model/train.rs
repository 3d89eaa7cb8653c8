use std::io::Write;

use log::info;
use rand::seq::SliceRandom;

use super::{Example, Network, TrainingMeta};
use crate::error::{Error, Result};
use crate::layers::{sgd_update, softmax};
use crate::rng::{self, domain};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Epochs without a new best validation cost before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { batch_size: 60, learning_rate: 0.01, momentum: 0.9, max_epochs: 30, patience: 3, seed: 0 }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0,1), got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_cost: f64,
    pub val_cost: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().fold(None, |best: Option<&EpochRecord>, e| match best {
            Some(b) if b.val_cost <= e.val_cost => Some(b),
            _ => Some(e),
        })
    }

    /// `epoch,train_cost,val_cost,val_acc` with full round-trip precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,train_cost,val_cost,val_acc")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{},{}", e.epoch, e.train_cost, e.val_cost, e.val_accuracy)?;
        }
        Ok(())
    }
}

fn evaluate<T: Scalar>(network: &Network<T>, set: &[Example<T>]) -> Result<(f64, f64)> {
    let mut cost = 0.0;
    let mut correct = 0usize;
    for ex in set {
        let p = softmax(network.body.logits(&ex.input)?.data());
        cost -= p[ex.class].as_f64().max(f64::MIN_POSITIVE).ln();
        let predicted = usize::from(p[1] >= T::lit(0.5));
        correct += usize::from(predicted == ex.class);
    }
    let n = set.len() as f64;
    Ok((cost / n, correct as f64 / n))
}

/// Mini-batch momentum SGD with validation-cost early stopping. Returns the
/// parameters of the epoch with the lowest validation cost.
pub fn train<T: Scalar>(
    mut network: Network<T>,
    train_set: &[Example<T>],
    val_set: &[Example<T>],
    tcfg: &TrainingConfig,
) -> Result<(Network<T>, TrainingHistory)> {
    tcfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data(format!(
            "training needs non-empty train and validation sets (got {} and {})",
            train_set.len(),
            val_set.len()
        )));
    }
    for ex in train_set.iter().chain(val_set) {
        network.check_input(&ex.input)?;
    }
    let (lr, momentum) = (T::lit(tcfg.learning_rate), T::lit(tcfg.momentum));
    let mut velocity: Vec<Tensor<T>> = network.body.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, usize, Network<T>)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=tcfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(&[domain::SHUFFLE, tcfg.seed, epoch as u64]));
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(tcfg.batch_size).enumerate() {
            let (loss, grads) = network.body.batch_gradient(chunk.iter().map(|&i| &train_set[i]))?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, batch: b });
            }
            for ((p, g), v) in network.body.params_mut().into_iter().zip(&grads).zip(&mut velocity) {
                sgd_update(p, g, v, lr, momentum)?;
            }
            epoch_loss += loss.as_f64() * chunk.len() as f64;
        }
        let train_cost = epoch_loss / train_set.len() as f64;
        let (val_cost, val_accuracy) = evaluate(&network, val_set)?;
        history.epochs.push(EpochRecord { epoch, train_cost, val_cost, val_accuracy });
        info!("epoch {epoch}: train_cost {train_cost:.6} val_cost {val_cost:.6} val_acc {val_accuracy:.4}");

        if best.as_ref().is_none_or(|(c, _, _)| val_cost < *c) {
            best = Some((val_cost, epoch, network.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= tcfg.patience {
                info!("no validation improvement for {stale} epochs; stopping");
                break;
            }
        }
    }
    let (val_cost, epoch, mut net) = best.expect("at least one epoch ran");
    net.meta = TrainingMeta { epoch, val_cost: Some(val_cost) };
    Ok((net, history))
}
