use adcnn::gradcheck::*;
use adcnn::model::{build_network, Example, Layer, NetworkConfig, Sequential};
use adcnn::rng;
use adcnn::tensor::Tensor;
use rand::Rng;
use rand_distr::StandardNormal;

fn batch(n: usize, size: usize, seed: u64) -> Vec<Example<f64>> {
    let mut rng = rng::stream(&[seed]);
    (0..n)
        .map(|i| Example { input: Tensor::from_fn(&[1, size, size], |_| rng.sample(StandardNormal)), class: i % 2 })
        .collect()
}

fn linear_model(seed: u64) -> Sequential<f64> {
    let mut rng = rng::stream(&[seed]);
    let mut t = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.random_range(-0.5..0.5));
    Sequential::new(vec![
        Layer::Dense { weights: t(&[5, 9]), bias: t(&[5]) },
        Layer::Dense { weights: t(&[2, 5]), bias: t(&[2]) },
    ])
}

#[test]
fn linear_network_is_exact_to_rounding() {
    let model = linear_model(1);
    let report = gradient_check(&model, &batch(3, 3, 2), 1e-5).unwrap();
    assert_eq!(report.checked, model.num_params());
    assert_eq!(report.skipped_kinks, 0);
    assert!(report.max_relative_error < 1e-9, "{report:?}");
}

#[test]
fn two_stage_cnn_on_8x8() {
    let cfg = NetworkConfig { input_size: 8, target_map: 2, ..NetworkConfig::default() };
    assert_eq!(cfg.stages().unwrap(), 2);
    let net = build_network::<f64>(&cfg, 3).unwrap();
    let report = gradient_check(net.body(), &batch(2, 8, 4), 1e-5).unwrap();
    assert!(report.checked >= 500, "{report:?}");
    assert!(report.max_relative_error < 1e-6, "{report:?}");
}

#[test]
fn two_stage_cnn_on_16x16() {
    let net = build_network::<f64>(&NetworkConfig::with_input_size(16), 5).unwrap();
    let report = gradient_check(net.body(), &batch(2, 16, 6), 1e-5).unwrap();
    assert!(report.checked >= 500, "{report:?}");
    assert!(report.max_relative_error < 1e-6, "{report:?}");
}

#[test]
fn scaled_gradient_is_detected() {
    let cfg = NetworkConfig { input_size: 8, target_map: 2, ..NetworkConfig::default() };
    let net = build_network::<f64>(&cfg, 7).unwrap();
    let data = batch(2, 8, 8);
    let analytic: Vec<f64> = analytic_gradient(net.body(), &data).unwrap().iter().map(|g| g * 1.01).collect();
    let report = gradient_check_against(net.body(), &data, &analytic, &GradCheckOptions::default()).unwrap();
    assert!(report.max_relative_error > 5e-3, "{report:?}");
}

#[test]
fn empty_batch_is_rejected() {
    assert!(gradient_check(&linear_model(1), &[], 1e-5).is_err());
}

#[test]
fn relative_error_floor() {
    assert_eq!(relative_error(0.0, 0.0), 0.0);
    assert_eq!(relative_error(2.0, 1.0), 0.5);
    assert_eq!(relative_error(1e-13, 0.0), 0.1);
}

#[test]
fn subsample_is_deterministic_and_covers_every_tensor() {
    let sizes = [208, 3216, 12832, 51264, 2050];
    let a = select_coordinates(&sizes, 600, 9);
    assert_eq!(a, select_coordinates(&sizes, 600, 9));
    assert!(a.len() >= 600);
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    let mut offset = 0;
    for len in sizes {
        assert!(a.iter().filter(|&&i| (offset..offset + len).contains(&i)).count() >= 16);
        offset += len;
    }
}
