use adcnn::augment::{zscore_standardize, ZSCORE_EPSILON};
use adcnn::dataset::synth::synth_generate;
use adcnn::dataset::Label;
use adcnn::layers::*;
use adcnn::model::*;
use adcnn::rng;
use adcnn::tensor::Tensor;
use rand::Rng;
use rand_distr::StandardNormal;

fn synthetic_examples(per_class: usize, size: usize, seed: u64) -> Vec<Example<f64>> {
    let mut out = Vec::new();
    for label in [Label::Normal, Label::Ad] {
        for img in synth_generate(per_class, label, size, seed).unwrap() {
            out.push(Example { input: zscore_standardize(&img, ZSCORE_EPSILON), class: label.class_index() });
        }
    }
    out
}

fn random_input(size: usize, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(&[1, size, size], |_| rng.sample(StandardNormal))
}

#[test]
fn architecture_at_256() {
    let cfg = NetworkConfig::default();
    assert_eq!(cfg.stages().unwrap(), 6);
    assert_eq!(cfg.filter_counts().unwrap(), vec![8, 16, 32, 64, 128, 256]);
    assert_eq!(cfg.dense_inputs().unwrap(), 4 * 4 * 256);
    let net = build_network::<f64>(&cfg, 0).unwrap();
    let convs: Vec<&FilterBank<f64>> =
        net.body().layers().iter().filter_map(|l| if let Layer::Conv(f) = l { Some(f) } else { None }).collect();
    assert_eq!(convs.iter().map(|f| f.out_channels()).collect::<Vec<_>>(), vec![8, 16, 32, 64, 128, 256]);
    assert!(convs.iter().all(|f| f.kernel_size() == 5));
    let pools = net.body().layers().iter().filter(|l| matches!(l, Layer::MaxPool)).count();
    assert_eq!(256 >> pools, 4);
}

#[test]
fn architecture_rule_holds_for_every_valid_size() {
    for k in 1..=7 {
        let size = 4 << k;
        let cfg = NetworkConfig::with_input_size(size);
        assert_eq!(cfg.stages().unwrap(), k);
        assert_eq!(cfg.dense_inputs().unwrap(), 16 * 8 << (k - 1));
    }
    let cfg = NetworkConfig::with_input_size(64);
    assert_eq!(cfg.filter_counts().unwrap(), vec![8, 16, 32, 64]);
    assert_eq!(cfg.dense_inputs().unwrap(), 1024);
    for bad in [60, 4, 0, 100] {
        assert!(build_network::<f64>(&NetworkConfig::with_input_size(bad), 0).is_err(), "{bad}");
    }
}

#[test]
fn he_initialisation() {
    let net = build_network::<f64>(&NetworkConfig::with_input_size(64), 1).unwrap();
    for layer in net.body().layers() {
        if let Layer::Conv(f) = layer {
            assert!(f.bias.data().iter().all(|&b| b == 0.0));
            let fan_in = (f.in_channels() * 25) as f64;
            let w = f.weights.data();
            let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
            if w.len() > 1000 {
                assert!((var * fan_in / 2.0 - 1.0).abs() < 0.1, "variance {var}");
            }
        }
    }
    assert_eq!(net, build_network::<f64>(&NetworkConfig::with_input_size(64), 1).unwrap());
    assert_ne!(net, build_network::<f64>(&NetworkConfig::with_input_size(64), 2).unwrap());
}

#[test]
fn forward_rows_are_distributions() {
    let net = build_network::<f64>(&NetworkConfig::with_input_size(32), 2).unwrap();
    let mut rng = rng::stream(&[3]);
    let x = random_input(32, &mut rng);
    let batch = vec![x.clone(), random_input(32, &mut rng), x.clone()];
    let probs = forward(&net, &batch).unwrap();
    assert_eq!(probs.shape(), &[3, 2]);
    for row in probs.data().chunks(2) {
        assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!((row[0] + row[1] - 1.0).abs() <= 1e-12);
    }
    assert_eq!(probs.data()[0..2], probs.data()[4..6]);
    for (i, x) in batch.iter().enumerate() {
        assert_eq!(predict_score(&net, x).unwrap(), probs.data()[2 * i + 1]);
    }
    assert!(forward(&net, &[random_input(16, &mut rng)]).is_err());
}

#[test]
fn forward_equals_hand_composed_primitives() {
    let cfg = NetworkConfig { input_size: 8, target_map: 2, ..NetworkConfig::default() };
    let net = build_network::<f64>(&cfg, 4).unwrap();
    let layers = net.body().layers();
    let (Layer::Conv(f1), Layer::Conv(f2), Layer::Dense { weights, bias }) = (&layers[0], &layers[3], &layers[6]) else {
        panic!("unexpected layer order");
    };
    let mut rng = rng::stream(&[5]);
    let x = random_input(8, &mut rng);
    let h = maxpool_forward(&relu(&conv2d_forward(&x, f1).unwrap())).unwrap().0;
    let h = maxpool_forward(&relu(&conv2d_forward(&h, f2).unwrap())).unwrap().0;
    assert_eq!(h.shape(), &[16, 2, 2]);
    let logits = dense_forward(&h, weights, bias).unwrap();
    let expected = softmax(logits.data());
    assert_eq!(forward(&net, &[x]).unwrap().data(), expected.as_slice());
}

#[test]
fn overfits_eight_samples() {
    let data = synthetic_examples(4, 16, 6);
    let net = build_network::<f64>(&NetworkConfig::with_input_size(16), 7).unwrap();
    let tcfg = TrainingConfig { batch_size: 8, max_epochs: 200, patience: 200, seed: 8, ..TrainingConfig::default() };
    let (trained, history) = train(net, &data, &data, &tcfg).unwrap();
    assert_eq!(history.epochs.len(), 200);
    let correct = data.iter().filter(|ex| (predict_score(&trained, &ex.input).unwrap() >= 0.5) == (ex.class == 1)).count();
    assert_eq!(correct, 8);
}

#[test]
fn training_is_deterministic_and_keeps_best_epoch() {
    let data = synthetic_examples(20, 16, 9);
    let (train_set, val_set) = data.split_at(30);
    let run = |seed| {
        let net = build_network::<f64>(&NetworkConfig::with_input_size(16), seed).unwrap();
        let tcfg = TrainingConfig { batch_size: 7, max_epochs: 6, patience: 2, seed, ..TrainingConfig::default() };
        train(net, train_set, val_set, &tcfg).unwrap()
    };
    let (a, ha) = run(10);
    let (b, hb) = run(10);
    assert_eq!(encode_checkpoint(&a), encode_checkpoint(&b));
    assert_eq!(ha, hb);
    let best = ha.best().unwrap();
    assert_eq!(a.meta.epoch, best.epoch);
    assert_eq!(a.meta.val_cost, Some(best.val_cost));
    assert!(ha.epochs.iter().all(|e| e.val_cost >= best.val_cost));
    let (c, _) = run(11);
    assert_ne!(encode_checkpoint(&a), encode_checkpoint(&c));
}

#[test]
fn training_cost_falls_over_first_five_epochs() {
    let data = synthetic_examples(100, 32, 12);
    let val = synthetic_examples(20, 32, 13);
    let net = build_network::<f64>(&NetworkConfig::with_input_size(32), 14).unwrap();
    let tcfg = TrainingConfig { batch_size: 20, max_epochs: 5, patience: 5, seed: 15, ..TrainingConfig::default() };
    let (trained, history) = train(net, &data, &val, &tcfg).unwrap();
    let costs: Vec<f64> = history.epochs.iter().map(|e| e.train_cost).collect();
    println!("train costs {costs:?}");
    assert_eq!(costs.len(), 5);
    for w in costs.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{costs:?}");
    }
    assert!(costs[4] < costs[0]);
    let mean_score = |class| {
        let s: Vec<f64> = val.iter().filter(|e| e.class == class).map(|e| predict_score(&trained, &e.input).unwrap()).collect();
        s.iter().sum::<f64>() / s.len() as f64
    };
    assert!(mean_score(1) > mean_score(0));
}

#[test]
fn training_rejects_empty_sets() {
    let data = synthetic_examples(1, 16, 1);
    let net = build_network::<f64>(&NetworkConfig::with_input_size(16), 1).unwrap();
    assert!(matches!(train(net.clone(), &[], &data, &TrainingConfig::default()), Err(adcnn::Error::Data(_))));
    assert!(matches!(train(net, &data, &[], &TrainingConfig::default()), Err(adcnn::Error::Data(_))));
}

#[test]
fn divergence_names_epoch_and_batch() {
    let data = synthetic_examples(4, 16, 2);
    let net = build_network::<f64>(&NetworkConfig::with_input_size(16), 3).unwrap();
    let tcfg = TrainingConfig { learning_rate: 1e200, batch_size: 2, max_epochs: 3, ..TrainingConfig::default() };
    match train(net, &data, &data, &tcfg) {
        Err(adcnn::Error::Divergence { epoch, batch }) => assert!(epoch >= 1 && batch < 4),
        other => panic!("expected divergence, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn checkpoint_round_trip_reproduces_scores() {
    let mut net = build_network::<f64>(&NetworkConfig::with_input_size(32), 21).unwrap();
    net.meta = TrainingMeta { epoch: 4, val_cost: Some(0.123456789) };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&net, &path).unwrap();
    let loaded: Network<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, net);
    let again = dir.path().join("again.ckpt");
    save_checkpoint(&loaded, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

    let mut rng = rng::stream(&[22]);
    for _ in 0..100 {
        let x = random_input(32, &mut rng);
        assert_eq!(predict_score(&net, &x).unwrap().to_bits(), predict_score(&loaded, &x).unwrap().to_bits());
    }

    let bytes = std::fs::read(&path).unwrap();
    let expected_len = bytes.len() - 8 * net.body().num_params();
    assert!(bytes[..expected_len].starts_with(CHECKPOINT_MAGIC));
    for cut in [0, 5, 20, expected_len, bytes.len() - 1] {
        assert!(matches!(decode_checkpoint::<f64>(&bytes[..cut]), Err(adcnn::Error::Format { .. })), "cut {cut}");
    }
    let mut bad = bytes.clone();
    bad[7] = b'2';
    assert!(matches!(decode_checkpoint::<f64>(&bad), Err(adcnn::Error::Format { .. })));
}
