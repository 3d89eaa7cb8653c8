//! Fixed 36-way augmentation: 9 geometric variants of the square crossed
//! with 4 zero-mean Gaussian noise levels, plus per-image z-scoring.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{clamp_unit, GrayImage};
use crate::rng::{self, domain};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Geometric variants in plan order. Rotations are clockwise. The composite
/// tags apply the rotation first, then the flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeometricTransform {
    Identity,
    FlipH,
    FlipV,
    FlipHV,
    Rot90,
    Rot180,
    Rot270,
    FlipHRot90,
    FlipVRot90,
}

impl GeometricTransform {
    pub const ALL: [GeometricTransform; 9] = [
        GeometricTransform::Identity,
        GeometricTransform::FlipH,
        GeometricTransform::FlipV,
        GeometricTransform::FlipHV,
        GeometricTransform::Rot90,
        GeometricTransform::Rot180,
        GeometricTransform::Rot270,
        GeometricTransform::FlipHRot90,
        GeometricTransform::FlipVRot90,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometricTransform::Identity => "identity",
            GeometricTransform::FlipH => "flipH",
            GeometricTransform::FlipV => "flipV",
            GeometricTransform::FlipHV => "flipHV",
            GeometricTransform::Rot90 => "rot90",
            GeometricTransform::Rot180 => "rot180",
            GeometricTransform::Rot270 => "rot270",
            GeometricTransform::FlipHRot90 => "flipH∘rot90",
            GeometricTransform::FlipVRot90 => "flipV∘rot90",
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            GeometricTransform::Rot90 => GeometricTransform::Rot270,
            GeometricTransform::Rot270 => GeometricTransform::Rot90,
            // the rest are involutions
            other => other,
        }
    }

    /// Source pixel `(row, col)` that lands at output `(r, c)` in an
    /// `n x n` image.
    #[inline]
    fn source(self, n: usize, r: usize, c: usize) -> (usize, usize) {
        let last = n - 1;
        match self {
            GeometricTransform::Identity => (r, c),
            GeometricTransform::FlipH => (r, last - c),
            GeometricTransform::FlipV => (last - r, c),
            GeometricTransform::FlipHV | GeometricTransform::Rot180 => (last - r, last - c),
            GeometricTransform::Rot90 => (last - c, r),
            GeometricTransform::Rot270 => (c, last - r),
            // flipH after rot90: out[r][c] = rot[r][last-c] = in[c][r]
            GeometricTransform::FlipHRot90 => (c, r),
            // flipV after rot90: out[r][c] = rot[last-r][c] = in[last-c][last-r]
            GeometricTransform::FlipVRot90 => (last - c, last - r),
        }
    }
}

pub const NOISE_VARIANCES: [f64; 4] = [0.0, 0.02, 0.04, 0.06];

/// Zero-mean Gaussian noise level, variance in squared `[0,1]` intensity
/// units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { variance: 0.0 };

    pub fn new(variance: f64) -> Result<Self> {
        if NOISE_VARIANCES.contains(&variance) {
            Ok(Self { variance })
        } else {
            Err(Error::Config(format!("noise variance {variance} not in {NOISE_VARIANCES:?}")))
        }
    }

    pub fn variance(self) -> f64 {
        self.variance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationPlan {
    entries: Vec<(GeometricTransform, NoiseSpec)>,
}

impl AugmentationPlan {
    pub fn entries(&self) -> &[(GeometricTransform, NoiseSpec)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<(GeometricTransform, NoiseSpec)> {
        self.entries.get(index).copied()
    }
}

/// Geometry outer, noise inner: entry `i` is
/// `(ALL[i / 4], NOISE_VARIANCES[i % 4])`.
pub fn enumerate_plan() -> AugmentationPlan {
    let entries = GeometricTransform::ALL
        .iter()
        .flat_map(|&g| NOISE_VARIANCES.iter().map(move |&v| (g, NoiseSpec { variance: v })))
        .collect();
    AugmentationPlan { entries }
}

pub fn apply_geometric(image: &GrayImage, t: GeometricTransform) -> Result<GrayImage> {
    if !image.is_square() {
        return Err(Error::Shape(format!(
            "geometric transforms need a square image, got {}x{}",
            image.height(),
            image.width()
        )));
    }
    let n = image.width();
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (sr, sc) = t.source(n, r, c);
            out.push(image.get(sr, sc));
        }
    }
    GrayImage::new(n, n, out)
}

/// Key of the noise stream used for plan entry `plan_index` of ROI `roi_id`.
pub fn noise_seed(seed: u64, roi_id: u64, plan_index: usize) -> u64 {
    rng::stream_seed(&[domain::NOISE, seed, roi_id, plan_index as u64])
}

/// `len` i.i.d. `N(0, variance)` draws from the ChaCha8 stream keyed by
/// `seed`, before any clamping.
pub fn gaussian_noise(len: usize, spec: NoiseSpec, seed: u64) -> Vec<f64> {
    if spec.variance == 0.0 {
        return vec![0.0; len];
    }
    let normal = Normal::new(0.0, spec.variance.sqrt()).expect("finite positive std");
    let mut rng = rng::stream(&[seed]);
    (0..len).map(|_| normal.sample(&mut rng)).collect()
}

/// Adds noise then clamps to `[0,1]`. Variance zero returns the input as is.
pub fn add_gaussian_noise(image: &GrayImage, spec: NoiseSpec, seed: u64) -> GrayImage {
    if spec.variance == 0.0 {
        return image.clone();
    }
    let noise = gaussian_noise(image.pixels().len(), spec, seed);
    let pixels = image.pixels().iter().zip(&noise).map(|(&p, &e)| clamp_unit(p + e)).collect();
    GrayImage::new(image.width(), image.height(), pixels).expect("clamped pixels stay valid")
}

/// All plan variants of one ROI, in plan order.
pub fn augment_roi(roi: &GrayImage, plan: &AugmentationPlan, seed: u64, roi_id: u64) -> Result<Vec<GrayImage>> {
    plan.entries
        .iter()
        .enumerate()
        .map(|(i, &(geom, noise))| {
            let moved = apply_geometric(roi, geom)?;
            Ok(add_gaussian_noise(&moved, noise, noise_seed(seed, roi_id, i)))
        })
        .collect()
}

pub const ZSCORE_EPSILON: f64 = 1e-8;

/// Per-image `(x - mean) / max(std, epsilon)` with the population standard
/// deviation, returned as a `[1, H, W]` network input.
pub fn zscore_standardize<T: Scalar>(image: &GrayImage, epsilon: f64) -> Tensor<T> {
    let px = image.pixels();
    let n = px.len() as f64;
    let mean = px.iter().sum::<f64>() / n;
    let var = px.iter().map(|&p| (p - mean) * (p - mean)).sum::<f64>() / n;
    let scale = var.sqrt().max(epsilon);
    Tensor::from_fn(&[1, image.height(), image.width()], |i| T::lit((px[i] - mean) / scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(rows: &[&[f64]]) -> GrayImage {
        let n = rows[0].len();
        GrayImage::new(n, rows.len(), rows.concat()).unwrap()
    }

    #[test]
    fn plan_shape() {
        let plan = enumerate_plan();
        assert_eq!(plan.len(), 36);
        assert_eq!(600 * plan.len(), 21600);
        assert_eq!(plan.get(0), Some((GeometricTransform::Identity, NoiseSpec::NONE)));
        for (i, a) in plan.entries().iter().enumerate() {
            for b in &plan.entries()[i + 1..] {
                assert!(a.0 != b.0 || a.1 != b.1);
            }
        }
    }

    #[test]
    fn hand_permutations() {
        let x = img(&[&[1.0, 0.5], &[0.25, 0.0]]);
        let rot = apply_geometric(&x, GeometricTransform::Rot90).unwrap();
        assert_eq!(rot, img(&[&[0.25, 1.0], &[0.0, 0.5]]));
        let hv = apply_geometric(&apply_geometric(&x, GeometricTransform::FlipV).unwrap(), GeometricTransform::FlipH).unwrap();
        let r180 = apply_geometric(&x, GeometricTransform::Rot180).unwrap();
        assert_eq!(hv, r180);
        assert_eq!(r180, img(&[&[0.0, 0.25], &[0.5, 1.0]]));
        assert_eq!(apply_geometric(&x, GeometricTransform::FlipHV).unwrap(), r180);
    }

    #[test]
    fn composites_match_their_definition() {
        let x = GrayImage::from_fn(5, 5, |r, c| (r * 5 + c) as f64 / 24.0).unwrap();
        let rot = apply_geometric(&x, GeometricTransform::Rot90).unwrap();
        assert_eq!(
            apply_geometric(&x, GeometricTransform::FlipHRot90).unwrap(),
            apply_geometric(&rot, GeometricTransform::FlipH).unwrap()
        );
        assert_eq!(
            apply_geometric(&x, GeometricTransform::FlipVRot90).unwrap(),
            apply_geometric(&rot, GeometricTransform::FlipV).unwrap()
        );
    }

    #[test]
    fn non_square_rejected() {
        let x = GrayImage::filled(3, 2, 0.5).unwrap();
        assert!(matches!(apply_geometric(&x, GeometricTransform::FlipH), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_spec_set() {
        assert!(NoiseSpec::new(0.04).is_ok());
        assert!(NoiseSpec::new(0.03).is_err());
    }

    #[test]
    fn zero_variance_is_bit_identical() {
        let x = GrayImage::from_fn(4, 4, |r, c| ((r + 3 * c) % 7) as f64 / 7.0).unwrap();
        assert_eq!(add_gaussian_noise(&x, NoiseSpec::NONE, 9), x);
    }

    #[test]
    fn noise_is_deterministic_and_clamped() {
        let x = GrayImage::filled(8, 8, 0.5).unwrap();
        let spec = NoiseSpec::new(0.06).unwrap();
        let a = add_gaussian_noise(&x, spec, 1234);
        assert_eq!(a, add_gaussian_noise(&x, spec, 1234));
        assert_ne!(a, add_gaussian_noise(&x, spec, 1235));
        assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn augment_roi_outputs() {
        let roi = GrayImage::from_fn(6, 6, |r, c| (r * 6 + c) as f64 / 35.0).unwrap();
        let out = augment_roi(&roi, &enumerate_plan(), 3, 17).unwrap();
        assert_eq!(out.len(), 36);
        assert_eq!(out[0], roi);
        assert!(out.iter().all(|o| o.width() == 6 && o.height() == 6));
        // noise-free entries are exact permutations
        let mut base: Vec<f64> = roi.pixels().to_vec();
        base.sort_by(f64::total_cmp);
        for o in out.iter().step_by(4) {
            let mut p = o.pixels().to_vec();
            p.sort_by(f64::total_cmp);
            assert_eq!(p, base);
        }
    }

    #[test]
    fn zscore_anchors() {
        let z: Tensor<f64> = zscore_standardize(&img(&[&[0.0, 1.0]]), ZSCORE_EPSILON);
        assert_eq!(z.data(), &[-1.0, 1.0]);
        assert_eq!(z.shape(), &[1, 1, 2]);
        let z: Tensor<f64> = zscore_standardize(&GrayImage::filled(3, 3, 0.4).unwrap(), ZSCORE_EPSILON);
        assert!(z.data().iter().all(|&v| v.abs() < 1e-7));
    }
}
