use adcnn::layers::*;
use adcnn::rng;
use adcnn::scalar::{DoubleDouble, Scalar};
use adcnn::tensor::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Straight five-deep loop, zero padding by bounds test.
fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (c_in, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (f_out, k) = (w.shape()[0], w.shape()[2]);
    let p = (k - 1) as isize / 2;
    let mut out = vec![0.0; f_out * h * wd];
    for f in 0..f_out {
        for r in 0..h {
            for c in 0..wd {
                let mut acc = b.data()[f];
                for ch in 0..c_in {
                    for i in 0..k {
                        for j in 0..k {
                            let (rr, cc) = (r as isize + i as isize - p, c as isize + j as isize - p);
                            if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < wd {
                                acc += w.data()[((f * c_in + ch) * k + i) * k + j]
                                    * x.data()[(ch * h + rr as usize) * wd + cc as usize];
                            }
                        }
                    }
                }
                out[(f * h + r) * wd + c] = acc;
            }
        }
    }
    out
}

fn conv_case(seed: u64, c: usize, f: usize, k: usize, h: usize, w: usize) -> (Tensor<f64>, FilterBank<f64>) {
    let mut rng = rng::stream(&[seed]);
    let x = random_tensor(&[c, h, w], &mut rng);
    let bank = FilterBank::new(random_tensor(&[f, c, k, k], &mut rng), random_tensor(&[f], &mut rng)).unwrap();
    (x, bank)
}

#[test]
fn conv_matches_naive_on_fixed_case() {
    let (x, bank) = conv_case(11, 2, 4, 5, 8, 8);
    let y = conv2d_forward(&x, &bank).unwrap();
    assert_eq!(y.shape(), &[4, 8, 8]);
    let reference = naive_conv(&x, &bank.weights, &bank.bias);
    for (a, b) in y.data().iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn conv_matches_naive(seed in any::<u64>(), c in 1usize..=4, f in 1usize..=4, k in prop::sample::select(vec![1usize, 3, 5]),
                          h in 1usize..=16, w in 1usize..=16) {
        let (x, bank) = conv_case(seed, c, f, k, h, w);
        let y = conv2d_forward(&x, &bank).unwrap();
        let reference = naive_conv(&x, &bank.weights, &bank.bias);
        for (a, b) in y.data().iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn maxpool_matches_window_scan(seed in any::<u64>(), c in 1usize..=3, h in 1usize..=8, w in 1usize..=8) {
        let mut rng = rng::stream(&[seed]);
        // coarse values make ties common
        let x = Tensor::from_fn(&[c, 2 * h, 2 * w], |_| f64::from(rng.random_range(0..4u8)));
        let (y, idx) = maxpool_forward(&x).unwrap();
        for ch in 0..c {
            for r in 0..h {
                for col in 0..w {
                    let mut best = (f64::NEG_INFINITY, 0);
                    for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let at = (ch * 2 * h + 2 * r + dr) * 2 * w + 2 * col + dc;
                        if x.data()[at] > best.0 {
                            best = (x.data()[at], at);
                        }
                    }
                    let o = (ch * h + r) * w + col;
                    prop_assert_eq!(y.data()[o], best.0);
                    prop_assert_eq!(idx.argmax()[o], best.1);
                }
            }
        }
        let up = Tensor::from_fn(&[c, h, w], |_| rng.random_range(-1.0..1.0));
        let g = maxpool_backward(&idx, &up).unwrap();
        // each upstream value lands in exactly one slot, so both sums add the same terms in the same order
        let routed: f64 = idx.argmax().iter().map(|&i| g.data()[i]).sum();
        prop_assert_eq!(routed, up.data().iter().sum::<f64>());
        prop_assert_eq!(g.data().iter().filter(|v| **v != 0.0).count(), up.data().iter().filter(|v| **v != 0.0).count());
    }
}

#[test]
fn maxpool_gradient_mass_is_conserved() {
    let mut rng = rng::stream(&[5]);
    let x = random_tensor(&[3, 16, 16], &mut rng);
    let (_, idx) = maxpool_forward(&x).unwrap();
    let up = random_tensor(&[3, 8, 8], &mut rng);
    let g = maxpool_backward(&idx, &up).unwrap();
    let mut a: Vec<f64> = g.data().iter().copied().filter(|v| *v != 0.0).collect();
    let mut b: Vec<f64> = up.data().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
}

#[test]
fn constant_pool_picks_window_origin() {
    let x = Tensor::full(&[1, 4, 4], 0.5);
    let (y, idx) = maxpool_forward(&x).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.5));
    assert_eq!(idx.argmax(), &[0, 2, 8, 10]);
}

/// `<u, f(x)>` for a layer `f`, used to get a scalar to difference.
fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-12)
}

/// Central differences of `loss` along every coordinate of `x`.
fn numeric_grad(x: &Tensor<f64>, loss: impl Fn(&Tensor<f64>) -> f64) -> Vec<f64> {
    let eps = 1e-5;
    (0..x.len())
        .map(|i| {
            let mut p = x.clone();
            p.data_mut()[i] += eps;
            let mut m = x.clone();
            m.data_mut()[i] -= eps;
            (loss(&p) - loss(&m)) / (2.0 * eps)
        })
        .collect()
}

fn assert_close(analytic: &[f64], numeric: &[f64], tol: f64) {
    assert_eq!(analytic.len(), numeric.len());
    let worst = analytic.iter().zip(numeric).map(|(&a, &n)| rel(a, n)).fold(0.0, f64::max);
    assert!(worst < tol, "max relative error {worst:e}");
}

#[test]
fn conv_backward_matches_finite_differences() {
    let (x, bank) = conv_case(21, 2, 3, 3, 6, 5);
    let mut rng = rng::stream(&[22]);
    let up = random_tensor(&[3, 6, 5], &mut rng);
    let g = conv2d_backward(&x, &bank, &up).unwrap();

    let num_x = numeric_grad(&x, |x| dot(&up, &conv2d_forward(x, &bank).unwrap()));
    assert_close(g.input.data(), &num_x, 1e-6);
    let num_w = numeric_grad(&bank.weights, |w| {
        dot(&up, &conv2d_forward(&x, &FilterBank::new(w.clone(), bank.bias.clone()).unwrap()).unwrap())
    });
    assert_close(g.weights.data(), &num_w, 1e-6);
    let num_b = numeric_grad(&bank.bias, |b| {
        dot(&up, &conv2d_forward(&x, &FilterBank::new(bank.weights.clone(), b.clone()).unwrap()).unwrap())
    });
    assert_close(g.bias.data(), &num_b, 1e-6);
}

#[test]
fn dense_backward_matches_finite_differences() {
    let mut rng = rng::stream(&[31]);
    let x = random_tensor(&[7], &mut rng);
    let w = random_tensor(&[3, 7], &mut rng);
    let b = random_tensor(&[3], &mut rng);
    let up = random_tensor(&[3], &mut rng);
    let g = dense_backward(&x, &w, &b, &up).unwrap();
    assert_close(g.input.data(), &numeric_grad(&x, |x| dot(&up, &dense_forward(x, &w, &b).unwrap())), 1e-6);
    assert_close(g.weights.data(), &numeric_grad(&w, |w| dot(&up, &dense_forward(&x, w, &b).unwrap())), 1e-6);
    assert_close(g.bias.data(), &numeric_grad(&b, |b| dot(&up, &dense_forward(&x, &w, b).unwrap())), 1e-6);
}

#[test]
fn dense_anchors() {
    let x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
    let eye = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
    assert_eq!(dense_forward(&x, &eye, &Tensor::zeros(&[3])).unwrap().data(), x.data());
    let b = Tensor::new(vec![2], vec![0.25, -4.0]).unwrap();
    assert_eq!(dense_forward(&x, &Tensor::zeros(&[2, 3]), &b).unwrap().data(), b.data());
}

#[test]
fn pool_backward_matches_finite_differences() {
    let mut rng = rng::stream(&[41]);
    // distinct values at least 1e-3 apart keep every window winner stable under the step
    let mut values: Vec<f64> = (0..2 * 6 * 6).map(|i| i as f64 * 1e-2).collect();
    for i in (1..values.len()).rev() {
        values.swap(i, rng.random_range(0..=i));
    }
    let x = Tensor::new(vec![2, 6, 6], values).unwrap();
    let up = random_tensor(&[2, 3, 3], &mut rng);
    let (_, idx) = maxpool_forward(&x).unwrap();
    let g = maxpool_backward(&idx, &up).unwrap();
    assert_close(g.data(), &numeric_grad(&x, |x| dot(&up, &maxpool_forward(x).unwrap().0)), 1e-6);
}

#[test]
fn relu_backward_matches_finite_differences_away_from_kink() {
    let mut rng = rng::stream(&[51]);
    let x = Tensor::from_fn(&[40], |_| {
        let v: f64 = rng.random_range(1e-3..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    let up = random_tensor(&[40], &mut rng);
    let g = relu_backward(&x, &up).unwrap();
    assert_close(g.data(), &numeric_grad(&x, |x| dot(&up, &relu(x))), 1e-6);
}

#[test]
fn softmax_cross_entropy_gradient_matches_finite_differences() {
    let mut rng = rng::stream(&[61]);
    for case in 0..200 {
        let z = Tensor::from_fn(&[2], |_| rng.random_range(-5.0..5.0));
        let class = case % 2;
        let (loss, g) = softmax_cross_entropy(&z, class);
        assert!(loss >= 0.0);
        // saturated logits give gradients near 1e-4, where f64 loss roundoff divided by the step
        // would dominate; difference the loss in double-double instead
        let zd: Tensor<DoubleDouble> = z.cast();
        let eps = DoubleDouble::lit(1e-5);
        let n: Vec<f64> = (0..2)
            .map(|i| {
                let mut p = zd.clone();
                p.data_mut()[i] += eps;
                let mut m = zd.clone();
                m.data_mut()[i] -= eps;
                ((softmax_cross_entropy(&p, class).0 - softmax_cross_entropy(&m, class).0) / (eps + eps)).as_f64()
            })
            .collect();
        assert_close(g.data(), &n, 1e-8);
        let p = softmax(z.data());
        assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn momentum_recurrence() {
    let mut p = Tensor::new(vec![2], vec![1.0, -0.5]).unwrap();
    let mut v = Tensor::zeros(&[2]);
    let grads = [[0.3, 0.1], [-0.2, 0.4]];
    let (lr, m) = (0.05, 0.9);
    let (mut ep, mut ev): ([f64; 2], [f64; 2]) = ([1.0, -0.5], [0.0, 0.0]);
    for g in grads {
        sgd_update(&mut p, &Tensor::new(vec![2], g.to_vec()).unwrap(), &mut v, lr, m).unwrap();
        for i in 0..2 {
            ev[i] = m * ev[i] - lr * g[i];
            ep[i] += ev[i];
        }
    }
    for i in 0..2 {
        assert!((p.data()[i] - ep[i]).abs() <= 1e-15);
        assert!((v.data()[i] - ev[i]).abs() <= 1e-15);
    }
}

#[test]
fn forward_is_pure() {
    let (x, bank) = conv_case(71, 3, 2, 5, 9, 7);
    let a = conv2d_forward(&x, &bank).unwrap();
    let b = conv2d_forward(&x, &bank).unwrap();
    assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
