//! Synthetic stand-in for clinical ROIs.
//!
//! Normal tissue is uniform white noise smoothed by an 11-pixel box filter
//! and rescaled to `[0.2, 0.8]`. Distorted tissue is the same kind of field
//! with a radial spiculation pattern implanted: 12 to 24 line segments
//! leaving a random centre, 4 pixels wide, each brightening the pixels it covers by 0.15
//! with a linear falloff to zero at `image_size / 4`. Overlapping segments
//! combine by maximum, not by sum.

use std::f64::consts::TAU;

use rand::Rng;

use super::Label;
use crate::error::{Error, Result};
use crate::image::{clamp_unit, GrayImage};
use crate::rng::{self, domain};

pub const BOX_FILTER_SIZE: usize = 11;
pub const FIELD_LOW: f64 = 0.2;
pub const FIELD_HIGH: f64 = 0.8;
pub const SPICULE_GAIN: f64 = 0.15;
pub const SPICULE_COUNT: (usize, usize) = (12, 24);
pub const SPICULE_HALF_WIDTH: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSample {
    pub image: GrayImage,
    /// Pattern centre in continuous `(row, col)` pixel coordinates. Drawn
    /// for both classes; only distorted samples carry the pattern.
    pub center: (f64, f64),
    pub label: Label,
}

/// Running mean over a `size`-wide window along rows then columns, edges
/// replicated.
pub fn box_blur(values: &[f64], width: usize, height: usize, size: usize) -> Vec<f64> {
    let half = (size / 2) as isize;
    let blur_line = |line: &[f64]| -> Vec<f64> {
        let n = line.len() as isize;
        let at = |i: isize| line[i.clamp(0, n - 1) as usize];
        let mut acc: f64 = (-half..=half).map(at).sum();
        let mut out = Vec::with_capacity(line.len());
        for i in 0..n {
            out.push(acc / size as f64);
            acc += at(i + half + 1) - at(i - half);
        }
        out
    };
    let mut rows = Vec::with_capacity(values.len());
    for line in values.chunks_exact(width) {
        rows.extend(blur_line(line));
    }
    let mut out = vec![0.0; values.len()];
    let mut column = vec![0.0; height];
    for c in 0..width {
        for r in 0..height {
            column[r] = rows[r * width + c];
        }
        for (r, v) in blur_line(&column).into_iter().enumerate() {
            out[r * width + c] = v;
        }
    }
    out
}

/// Smoothed random field rescaled to `[FIELD_LOW, FIELD_HIGH]`.
pub fn smooth_field(width: usize, height: usize, rng: &mut impl Rng) -> Vec<f64> {
    let noise: Vec<f64> = (0..width * height).map(|_| rng.random::<f64>()).collect();
    let mut field = box_blur(&noise, width, height, BOX_FILTER_SIZE);
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    for v in &mut field {
        *v = FIELD_LOW + (FIELD_HIGH - FIELD_LOW) * (*v - lo) / span;
    }
    field
}

/// Brightens `pixels` along 12..=24 random rays leaving `center`.
pub fn implant_spiculation(
    pixels: &mut [f64],
    width: usize,
    height: usize,
    center: (f64, f64),
    radius: f64,
    rng: &mut impl Rng,
) {
    let hw = SPICULE_HALF_WIDTH;
    let n_rays = rng.random_range(SPICULE_COUNT.0..=SPICULE_COUNT.1);
    let rays: Vec<(f64, f64)> = (0..n_rays)
        .map(|_| {
            let a = rng.random_range(0.0..TAU);
            (a.sin(), a.cos())
        })
        .collect();
    let r0 = (center.0 - radius - 1.0).floor().max(0.0) as usize;
    let c0 = (center.1 - radius - 1.0).floor().max(0.0) as usize;
    let r1 = ((center.0 + radius + 1.0).ceil() as usize).min(height);
    let c1 = ((center.1 + radius + 1.0).ceil() as usize).min(width);
    for r in r0..r1 {
        for c in c0..c1 {
            let (py, px) = (r as f64 + 0.5 - center.0, c as f64 + 0.5 - center.1);
            let mut boost: f64 = 0.0;
            for &(uy, ux) in &rays {
                let t = (py * uy + px * ux).clamp(0.0, radius);
                let (dy, dx) = (py - t * uy, px - t * ux);
                if dy * dy + dx * dx <= hw * hw {
                    boost = boost.max(SPICULE_GAIN * (1.0 - t / radius));
                }
            }
            if boost > 0.0 {
                let p = &mut pixels[r * width + c];
                *p = clamp_unit(*p + boost);
            }
        }
    }
}

pub fn synth_samples(count: usize, class: Label, image_size: usize, seed: u64) -> Result<Vec<SynthSample>> {
    if count == 0 {
        return Err(Error::Config("synthetic sample count must be at least 1".into()));
    }
    if image_size < 4 {
        return Err(Error::Config(format!("synthetic image size {image_size} is too small")));
    }
    let n = image_size as f64;
    (0..count)
        .map(|i| {
            let mut rng = rng::stream(&[domain::SYNTH, seed, class.class_index() as u64, i as u64]);
            let mut field = smooth_field(image_size, image_size, &mut rng);
            let center = (rng.random_range(n / 4.0..3.0 * n / 4.0), rng.random_range(n / 4.0..3.0 * n / 4.0));
            if class == Label::Ad {
                implant_spiculation(&mut field, image_size, image_size, center, n / 4.0, &mut rng);
            }
            Ok(SynthSample { image: GrayImage::new(image_size, image_size, field)?, center, label: class })
        })
        .collect()
}

pub fn synth_generate(count: usize, class: Label, image_size: usize, seed: u64) -> Result<Vec<GrayImage>> {
    Ok(synth_samples(count, class, image_size, seed)?.into_iter().map(|s| s.image).collect())
}

/// A synthetic whole exam: breast-shaped tissue against dark background
/// with spiculation patterns implanted at `marks`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthExam {
    pub image: GrayImage,
    pub marks: Vec<(usize, usize)>,
}

/// Parameters for [`synth_exam`]. The texture is generated at
/// `1/scale` resolution and enlarged by pixel replication, so area-mean
/// downscaling by `scale` recovers the generated image exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ExamSpec {
    pub height: usize,
    pub width: usize,
    pub scale: usize,
    /// Spiculation radius in full-resolution pixels.
    pub implant_radius: f64,
    pub marks: Vec<(usize, usize)>,
}

pub const EXAM_BACKGROUND: (f64, f64) = (0.0, 0.03);

/// Breast region: half-ellipse against the left (chest-wall) edge.
pub fn in_breast(row: f64, col: f64, height: f64, width: f64) -> bool {
    let (cy, ay, ax) = (height / 2.0, 0.46 * height, 0.85 * width);
    let (y, x) = ((row - cy) / ay, col / ax);
    y * y + x * x <= 1.0
}

pub fn synth_exam(spec: &ExamSpec, seed: u64) -> Result<SynthExam> {
    let s = spec.scale;
    if s == 0 || spec.height % s != 0 || spec.width % s != 0 {
        return Err(Error::Config(format!("exam {}x{} not divisible by scale {s}", spec.height, spec.width)));
    }
    if let Some(m) = spec.marks.iter().find(|m| m.0 >= spec.height || m.1 >= spec.width) {
        return Err(Error::Config(format!("mark {m:?} outside {}x{} exam", spec.height, spec.width)));
    }
    let (h, w) = (spec.height / s, spec.width / s);
    let mut rng = rng::stream(&[domain::EXAM, seed]);
    let field = smooth_field(w, h, &mut rng);
    let mut low = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let tissue = in_breast(r as f64 + 0.5, c as f64 + 0.5, h as f64, w as f64);
            let bg = rng.random_range(EXAM_BACKGROUND.0..EXAM_BACKGROUND.1);
            low.push(if tissue { field[r * w + c] } else { bg });
        }
    }
    let sf = s as f64;
    for &(mr, mc) in &spec.marks {
        let center = ((mr as f64 + 0.5) / sf, (mc as f64 + 0.5) / sf);
        implant_spiculation(&mut low, w, h, center, spec.implant_radius / sf, &mut rng);
    }
    let image = GrayImage::new(w, h, low)?.upscale_nearest(s)?;
    Ok(SynthExam { image, marks: spec.marks.clone() })
}
