//! ROI extraction, normal-tissue sampling, stratified splitting, the
//! on-disk manifest and the synthetic data generator.

mod manifest;
mod split;
pub mod synth;

pub use manifest::{DatasetManifest, ManifestEntry};
pub use split::{allocate_counts, stratified_split, Split, SplitItem, SplitMode, SplitRatios};

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::{self, domain};

/// Class label; `class_index` is the network output slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Ad,
}

impl Label {
    pub fn class_index(self) -> usize {
        match self {
            Label::Normal => 0,
            Label::Ad => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Ad
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Ad => "ad",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ad" => Ok(Label::Ad),
            "normal" => Ok(Label::Normal),
            other => Err(Error::Manifest(format!("unknown label {other:?}"))),
        }
    }
}

/// A labelled ROI reference into a source image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoiRecord {
    pub image_id: String,
    pub center: (usize, usize),
    pub size: usize,
    pub label: Label,
}

pub const DEFAULT_ROI_SIZE: usize = 256;

/// Square window in pixel coordinates; `top`/`left` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

impl Window {
    pub fn bottom(&self) -> usize {
        self.top + self.size - 1
    }

    pub fn right(&self) -> usize {
        self.left + self.size - 1
    }

    pub fn center(&self) -> (usize, usize) {
        (self.top + self.size / 2, self.left + self.size / 2)
    }

    pub fn intersects(&self, other: &Window) -> bool {
        self.top <= other.bottom()
            && other.top <= self.bottom()
            && self.left <= other.right()
            && other.left <= self.right()
    }
}

/// The `size x size` window centred on `center`, shifted the least amount
/// needed to lie inside a `height x width` image.
pub fn roi_window(height: usize, width: usize, center: (usize, usize), size: usize) -> Result<Window> {
    if size == 0 || size > height.min(width) {
        return Err(Error::Size(format!("ROI size {size} does not fit a {height}x{width} image")));
    }
    let place = |c: usize, extent: usize| c.saturating_sub(size / 2).min(extent - size);
    Ok(Window { top: place(center.0, height), left: place(center.1, width), size })
}

pub fn crop_roi(image: &GrayImage, center: (usize, usize), size: usize) -> Result<GrayImage> {
    let w = roi_window(image.height(), image.width(), center, size)?;
    image.sub_image(w.top, w.left, size, size)
}

pub const NORMAL_ROI_MAX_DRAWS: usize = 10_000;
pub const NORMAL_ROI_MIN_MEAN: f64 = 0.05;

/// Draws window positions uniformly until one neither touches the AD
/// window nor sits on empty background (mean intensity above 0.05).
pub fn sample_normal_roi(image: &GrayImage, ad_center: (usize, usize), size: usize, seed: u64) -> Result<(usize, usize)> {
    let (h, w) = (image.height(), image.width());
    let ad = roi_window(h, w, ad_center, size)?;
    let sums = IntegralImage::new(image);
    let mut rng = rng::stream(&[domain::NORMAL_ROI, seed]);
    let area = (size * size) as f64;
    for _ in 0..NORMAL_ROI_MAX_DRAWS {
        let cand = Window { top: rng.random_range(0..=h - size), left: rng.random_range(0..=w - size), size };
        if cand.intersects(&ad) {
            continue;
        }
        if sums.block_sum(cand.top, cand.left, size, size) / area > NORMAL_ROI_MIN_MEAN {
            return Ok(cand.center());
        }
    }
    Err(Error::Placement(format!(
        "no non-overlapping tissue window of size {size} found in {NORMAL_ROI_MAX_DRAWS} draws"
    )))
}

/// Summed-area table with a zero first row and column.
pub(crate) struct IntegralImage {
    width: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub(crate) fn from_values(width: usize, height: usize, value: impl Fn(usize, usize) -> f64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for r in 0..height {
            let mut row_acc = 0.0;
            for c in 0..width {
                row_acc += value(r, c);
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + row_acc;
            }
        }
        Self { width, sums }
    }

    pub(crate) fn new(image: &GrayImage) -> Self {
        Self::from_values(image.width(), image.height(), |r, c| image.get(r, c))
    }

    pub(crate) fn block_sum(&self, top: usize, left: usize, height: usize, width: usize) -> f64 {
        let s = self.width + 1;
        let (b, r) = (top + height, left + width);
        self.sums[b * s + r] - self.sums[top * s + r] - self.sums[b * s + left] + self.sums[top * s + left]
    }
}
