use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::Label;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Self { train, validation, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::Config(format!("split ratios must be positive, got {parts:?}")));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {total}")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// All variants of one ROI land in the same split.
    #[default]
    RoiLevel,
    /// Splits the augmented pool sample by sample, so siblings of one ROI
    /// may end up in different splits.
    SampleLevel,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roi-level" => Ok(SplitMode::RoiLevel),
            "sample-level" => Ok(SplitMode::SampleLevel),
            other => Err(Error::Config(format!("unknown split mode {other:?}"))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::RoiLevel => "roi-level",
            SplitMode::SampleLevel => "sample-level",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitItem {
    pub roi_id: u64,
    pub label: Label,
}

/// Largest-remainder apportionment of `n` items over `ratios`; leftover
/// units go to the largest fractional parts, earlier splits first on ties.
pub fn allocate_counts(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = ratios.as_array().map(|r| r * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Assigns each item to a split, shuffling each class independently by
/// `seed` and apportioning it by `ratios`. Returns one split per input item.
pub fn stratified_split(items: &[SplitItem], ratios: &SplitRatios, seed: u64, mode: SplitMode) -> Result<Vec<Split>> {
    ratios.validate()?;
    let mut assignment = vec![Split::Train; items.len()];
    for label in [Label::Normal, Label::Ad] {
        let members: Vec<usize> = (0..items.len()).filter(|&i| items[i].label == label).collect();
        if members.is_empty() {
            return Err(Error::Data(format!("no {label} samples to split")));
        }
        let mut rng = rng::stream(&[domain::SPLIT, seed, label.class_index() as u64]);
        match mode {
            SplitMode::SampleLevel => {
                let mut order = members;
                order.shuffle(&mut rng);
                let counts = allocate_counts(order.len(), ratios);
                let mut it = order.into_iter();
                for (split, n) in Split::ALL.into_iter().zip(counts) {
                    for i in it.by_ref().take(n) {
                        assignment[i] = split;
                    }
                }
            }
            SplitMode::RoiLevel => {
                let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
                for &i in &members {
                    groups.entry(items[i].roi_id).or_default().push(i);
                }
                let mut ids: Vec<u64> = groups.keys().copied().collect();
                ids.shuffle(&mut rng);
                let counts = allocate_counts(ids.len(), ratios);
                let mut it = ids.into_iter();
                for (split, n) in Split::ALL.into_iter().zip(counts) {
                    for id in it.by_ref().take(n) {
                        for &i in &groups[&id] {
                            assignment[i] = split;
                        }
                    }
                }
            }
        }
    }
    if mode == SplitMode::RoiLevel {
        let ad: BTreeSet<u64> = items.iter().filter(|i| i.label == Label::Ad).map(|i| i.roi_id).collect();
        if let Some(i) = items.iter().find(|i| i.label == Label::Normal && ad.contains(&i.roi_id)) {
            return Err(Error::Data(format!("ROI {} carries both labels", i.roi_id)));
        }
    }
    Ok(assignment)
}
