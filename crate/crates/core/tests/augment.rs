use adcnn::augment::*;
use adcnn::rng;
use adcnn::tensor::Tensor;
use adcnn::GrayImage;
use proptest::prelude::*;
use rand::Rng;

fn random_square(n: usize, seed: u64) -> GrayImage {
    let mut rng = rng::stream(&[seed]);
    GrayImage::from_fn(n, n, |_, _| rng.random_range(0.0..=1.0)).unwrap()
}

fn grid(rows: &[&[f64]]) -> GrayImage {
    GrayImage::new(rows[0].len(), rows.len(), rows.concat()).unwrap()
}

fn sorted(img: &GrayImage) -> Vec<f64> {
    let mut v = img.pixels().to_vec();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn inverse_restores_input(n in 1usize..=12, seed in any::<u64>()) {
        let img = random_square(n, seed);
        for t in GeometricTransform::ALL {
            let back = apply_geometric(&apply_geometric(&img, t).unwrap(), t.inverse()).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(sorted(&apply_geometric(&img, t).unwrap()), sorted(&img));
        }
    }

    #[test]
    fn transforms_close_under_composition(n in 1usize..=8, seed in any::<u64>()) {
        let img = random_square(n, seed);
        let images: Vec<GrayImage> = GeometricTransform::ALL.iter().map(|&t| apply_geometric(&img, t).unwrap()).collect();
        for a in GeometricTransform::ALL {
            for b in GeometricTransform::ALL {
                let ab = apply_geometric(&apply_geometric(&img, a).unwrap(), b).unwrap();
                prop_assert!(images.contains(&ab));
            }
        }
    }
}

#[test]
fn hand_permutations() {
    let x = grid(&[&[0.1, 0.2], &[0.3, 0.4]]);
    let rot = apply_geometric(&x, GeometricTransform::Rot90).unwrap();
    assert_eq!(rot, grid(&[&[0.3, 0.1], &[0.4, 0.2]]));
    let hv = apply_geometric(&apply_geometric(&x, GeometricTransform::FlipH).unwrap(), GeometricTransform::FlipV).unwrap();
    assert_eq!(hv, grid(&[&[0.4, 0.3], &[0.2, 0.1]]));
    assert_eq!(hv, apply_geometric(&x, GeometricTransform::Rot180).unwrap());
    assert_eq!(hv, apply_geometric(&x, GeometricTransform::FlipHV).unwrap());
    let mut four = x.clone();
    for _ in 0..4 {
        four = apply_geometric(&four, GeometricTransform::Rot90).unwrap();
    }
    assert_eq!(four, x);
}

#[test]
fn composite_tags_follow_rotation_then_flip() {
    let x = random_square(5, 3);
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
fn non_square_is_rejected() {
    let img = GrayImage::filled(3, 2, 0.5).unwrap();
    assert!(apply_geometric(&img, GeometricTransform::FlipH).is_err());
}

#[test]
fn plan_layout() {
    let plan = enumerate_plan();
    assert_eq!(plan.len(), 36);
    assert_eq!(600 * plan.len(), 21600);
    for (i, (g, n)) in plan.entries().iter().enumerate() {
        assert_eq!(*g, GeometricTransform::ALL[i / 4]);
        assert_eq!(n.variance(), NOISE_VARIANCES[i % 4]);
    }
    assert!(NoiseSpec::new(0.03).is_err());
}

#[test]
fn noise_statistics_over_a_million_pixels() {
    let n = 1_000_000;
    let noise = gaussian_noise(n, NoiseSpec::new(0.02).unwrap(), noise_seed(2024, 0, 1));
    let mean = noise.iter().sum::<f64>() / n as f64;
    let var = noise.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() <= 5e-4, "mean {mean}");
    assert!((var / 0.02 - 1.0).abs() <= 0.02, "variance {var}");

    let gray = GrayImage::filled(1000, 1000, 0.5).unwrap();
    let noisy = add_gaussian_noise(&gray, NoiseSpec::new(0.02).unwrap(), noise_seed(2024, 0, 1));
    for (o, e) in noisy.pixels().iter().zip(&noise) {
        assert_eq!(*o, (0.5 + e).clamp(0.0, 1.0));
    }
}

#[test]
fn noise_is_keyed_and_reproducible() {
    let img = random_square(16, 4);
    let spec = NoiseSpec::new(0.06).unwrap();
    let a = add_gaussian_noise(&img, spec, noise_seed(1, 2, 3));
    assert_eq!(a, add_gaussian_noise(&img, spec, noise_seed(1, 2, 3)));
    assert_ne!(a, add_gaussian_noise(&img, spec, noise_seed(1, 2, 4)));
    assert_ne!(a, add_gaussian_noise(&img, spec, noise_seed(1, 3, 3)));
    assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(add_gaussian_noise(&img, NoiseSpec::NONE, 99), img);
}

#[test]
fn augment_roi_outputs() {
    let roi = random_square(8, 5);
    let plan = enumerate_plan();
    let out = augment_roi(&roi, &plan, 10, 77).unwrap();
    assert_eq!(out.len(), 36);
    assert_eq!(out[0], roi);
    assert!(out.iter().all(|o| o.width() == 8 && o.height() == 8));
    for (i, (g, _)) in plan.entries().iter().enumerate().step_by(4) {
        assert_eq!(out[i], apply_geometric(&roi, *g).unwrap());
    }
    assert_eq!(out, augment_roi(&roi, &plan, 10, 77).unwrap());
}

#[test]
fn zscore_of_random_image() {
    let img = random_square(64, 6);
    let z: Tensor<f64> = zscore_standardize(&img, ZSCORE_EPSILON);
    let n = z.len() as f64;
    let mean = z.data().iter().sum::<f64>() / n;
    let std = (z.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-9);
    assert!((std - 1.0).abs() < 1e-6);
}

#[test]
fn zscore_anchor_zero_two() {
    let img = grid(&[&[0.0, 1.0]]);
    let z: Tensor<f64> = zscore_standardize(&img, ZSCORE_EPSILON);
    assert_eq!(z.data(), &[-1.0, 1.0]);
}
