use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage};

pub const HISTOGRAM_BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// Histogram bin maximising the between-class variance; pixels in higher
/// bins are foreground. `None` when no split leaves both classes non-empty.
pub fn otsu_bin(image: &GrayImage) -> Option<usize> {
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &p in image.pixels() {
        hist[bin_of(p)] += 1;
    }
    let total = image.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum();
    let (mut w_bg, mut sum_bg) = (0.0, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for (t, &h) in hist.iter().enumerate() {
        w_bg += h as f64;
        sum_bg += t as f64 * h as f64;
        let w_fg = total - w_bg;
        if w_bg == 0.0 || w_fg == 0.0 {
            continue;
        }
        let diff = sum_bg / w_bg - (sum_all - sum_bg) / w_fg;
        let between = w_bg * w_fg * diff * diff;
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, t));
        }
    }
    best.map(|(_, t)| t)
}

/// Labels 4-connected components of `mask` and keeps the largest one (the
/// first in raster order on equal size).
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![0u32; w * h];
    let mut best = (0usize, 0u32);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (r, c) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.bits()[j] && label[j] == 0 {
                    label[j] = next;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        if size > best.0 {
            best = (size, next);
        }
    }
    BinaryMask::new(w, h, label.into_iter().map(|l| l != 0 && l == best.1).collect()).expect("same extents")
}

/// Between-class-variance threshold on a 256-bin histogram, then the
/// largest 4-connected foreground component.
pub fn segment_breast(image: &GrayImage) -> Result<BinaryMask> {
    let t = otsu_bin(image).ok_or_else(|| Error::Segmentation("image has a single intensity level".into()))?;
    let fg = BinaryMask::from_fn(image.width(), image.height(), |r, c| bin_of(image.get(r, c)) > t);
    if fg.count() == 0 {
        return Err(Error::Segmentation("empty foreground".into()));
    }
    Ok(largest_component(&fg))
}
