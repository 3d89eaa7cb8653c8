//! ROC curve, trapezoidal AUC, the pairwise (Mann-Whitney) AUC oracle and
//! threshold accuracy. Ties in score are consumed together, which gives
//! diagonal ROC segments and makes the two AUC definitions agree.

use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredSample<T> {
    pub score: T,
    pub positive: bool,
}

impl<T> ScoredSample<T> {
    pub fn new(score: T, positive: bool) -> Self {
        Self { score, positive }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve<T> {
    /// `(fpr, tpr)` from `(0,0)` to `(1,1)`, both coordinates non-decreasing.
    pub points: Vec<(T, T)>,
}

fn class_counts<T: Scalar>(samples: &[ScoredSample<T>]) -> Result<(usize, usize)> {
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::Data(format!("non-finite score {}", s.score)));
    }
    let pos = samples.iter().filter(|s| s.positive).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(format!("ROC needs both classes, got {pos} positive and {neg} negative")));
    }
    Ok((pos, neg))
}

/// One point per distinct score, visited from the highest score down.
pub fn roc_curve<T: Scalar>(samples: &[ScoredSample<T>]) -> Result<RocCurve<T>> {
    let (pos, neg) = class_counts(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
    let (p, n) = (T::lit(pos as f64), T::lit(neg as f64));
    let mut points = vec![(T::zero(), T::zero())];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].score;
        while i < sorted.len() && sorted[i].score == s {
            if sorted[i].positive {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((T::lit(fp as f64) / n, T::lit(tp as f64) / p));
    }
    if points.last() != Some(&(T::one(), T::one())) {
        points.push((T::one(), T::one()));
    }
    Ok(RocCurve { points })
}

pub fn auc_trapezoid<T: Scalar>(curve: &RocCurve<T>) -> T {
    let half = T::lit(0.5);
    T::total(curve.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * half))
}

/// `P(score+ > score-) + P(tie) / 2` by enumerating every positive/negative
/// pair.
pub fn auc_pairwise_oracle<T: Scalar>(samples: &[ScoredSample<T>]) -> Result<T> {
    let (pos, neg) = class_counts(samples)?;
    let mut twice_wins: u64 = 0;
    for a in samples.iter().filter(|s| s.positive) {
        for b in samples.iter().filter(|s| !s.positive) {
            twice_wins += match a.score.partial_cmp(&b.score) {
                Some(Ordering::Greater) => 2,
                Some(Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(T::lit(twice_wins as f64 / (2 * pos * neg) as f64))
}

/// Fraction of samples where `score >= threshold` agrees with the label.
pub fn accuracy_at_threshold<T: Scalar>(samples: &[ScoredSample<T>], threshold: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Data("accuracy of an empty sample set".into()));
    }
    let hits = samples.iter().filter(|s| (s.score >= threshold) == s.positive).count();
    Ok(T::lit(hits as f64 / samples.len() as f64))
}

pub fn write_roc_csv<T: Scalar, W: Write>(curve: &RocCurve<T>, mut w: W) -> Result<()> {
    writeln!(w, "fpr,tpr")?;
    for (f, t) in &curve.points {
        writeln!(w, "{f},{t}")?;
    }
    Ok(())
}
