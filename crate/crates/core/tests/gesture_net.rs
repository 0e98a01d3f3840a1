use std::time::Instant;

use gesture_cell::net::*;
use gesture_cell::synth::GestureClass;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny() -> Architecture {
    // 2 detection slots × 5 features
    Architecture { frames: 24, features: 10, conv1: 4, conv2: 5, conv3: 6, dense: 7, n_classes: 9 }
}

fn random_input(rng: &mut ChaCha8Rng, arch: &Architecture) -> Vec<f64> {
    // second slot empty in some frames, like real point clouds
    (0..arch.frames)
        .flat_map(|t| {
            let filled = if t % 3 == 0 { 5 } else { arch.features };
            (0..arch.features).map(move |c| (t, c, filled)).collect::<Vec<_>>()
        })
        .map(|(_, c, filled)| if c < filled { rng.random_range(-1.5..1.5) } else { 0.0 })
        .collect()
}

fn check_gradients(dropout_seed: Option<u64>) {
    let arch = tiny();
    let net = Network::<f64>::new(arch, 0.3, 42).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inputs: Vec<Vec<f64>> = (0..3).map(|_| random_input(&mut rng, &arch)).collect();
    let batch: Vec<(&[f64], usize)> = inputs.iter().map(|x| x.as_slice()).zip([2, 5, 8]).collect();

    let (_, grads) = net.loss_and_grad(&batch, dropout_seed).unwrap();
    let eps = 1e-4;
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for i in 0..net.params().len() {
        let orig = net.params()[i];
        probe.params_mut()[i] = orig + eps;
        let (up, _) = probe.loss_and_grad(&batch, dropout_seed).unwrap();
        probe.params_mut()[i] = orig - eps;
        let (down, _) = probe.loss_and_grad(&batch, dropout_seed).unwrap();
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.values[i];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
        assert!(rel <= 1e-3, "param {i}: analytic {analytic:e}, numeric {numeric:e}, rel {rel:e}");
        worst = worst.max(rel);
    }
    assert!(grads.values.iter().filter(|g| **g != 0.0).count() > net.params().len() / 2);
    eprintln!("worst relative error {worst:e} over {} parameters", net.params().len());
}

#[test]
fn gradient_check_eval_mode() {
    let t = Instant::now();
    check_gradients(None);
    assert!(t.elapsed().as_secs() < 60);
}

#[test]
fn gradient_check_with_dropout_masks() {
    check_gradients(Some(1234));
}

#[test]
fn default_shapes_follow_the_reference_trace() {
    let net = Network::<f32>::new(Architecture::DEFAULT, 0.3, 1).unwrap();
    let x = FeatureMatrix::zeros();
    let (logits, trace) = net.forward_traced(x.values()).unwrap();
    assert_eq!(trace, DEFAULT_TRACE);
    assert_eq!(trace.conv1b, (46, 128));
    assert_eq!(trace.pool1.0, 23);
    assert_eq!(trace.pool3, (4, 512));
    assert_eq!(trace.flat, 2048);
    assert_eq!(logits.len(), 9);
}

#[test]
fn eval_mode_ignores_rng() {
    let arch = tiny();
    let net = Network::<f64>::new(arch, 0.5, 3).unwrap();
    let x = random_input(&mut ChaCha8Rng::seed_from_u64(1), &arch);
    let a = net.forward(&x, false, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = net.forward(&x, false, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(a, b);
    let c = net.forward(&x, true, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn duplicated_sample_keeps_mean_loss() {
    let arch = tiny();
    let net = Network::<f64>::new(arch, 0.0, 5).unwrap();
    let x = random_input(&mut ChaCha8Rng::seed_from_u64(4), &arch);
    let (one, _) = net.loss_and_grad(&[(&x, 1)], None).unwrap();
    let (two, _) = net.loss_and_grad(&[(&x, 1), (&x, 1)], None).unwrap();
    assert!((one - two).abs() < 1e-12);
}

#[test]
fn prediction_thresholds() {
    let arch = tiny();
    let mut net = Network::<f64>::zeros(arch, 0.0).unwrap();
    let x = vec![0.0; arch.input_len()];
    // uniform logits
    assert!(matches!(net.predict(&x, 0.8).unwrap(), Prediction::NoGesture { .. }));
    assert_eq!(net.predict(&x, 0.0).unwrap().class(), Some(GestureClass::SwipeLeft));
    // output bias one-hot × 10 on class 4
    let n = net.params().len();
    net.params_mut()[n - 9 + 4] = 10.0;
    let p = net.predict(&x, 0.8).unwrap();
    assert_eq!(p.class(), Some(GestureClass::from_code(4).unwrap()));
    assert!(p.confidence() > 0.999);
}

fn toy_set(rng: &mut ChaCha8Rng, arch: &Architecture, n: usize) -> LabeledSet {
    let mut set = LabeledSet::default();
    for _ in 0..n {
        let label = rng.random_range(0..3);
        let x: Vec<f32> = (0..arch.input_len())
            .map(|i| {
                let c = i % arch.features;
                let signal = if c == label { 1.0 } else { 0.0 };
                signal + rng.random_range(-0.3f32..0.3)
            })
            .collect();
        set.push(x, label);
    }
    set
}

#[test]
fn training_is_deterministic_and_learns() {
    let arch = Architecture { conv1: 8, conv2: 8, conv3: 8, dense: 16, n_classes: 3, ..tiny() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train_set = toy_set(&mut rng, &arch, 96);
    let val = toy_set(&mut rng, &arch, 30);
    let cfg = TrainConfig { epochs: 15, batch_size: 16, learning_rate: 5e-3, dropout_rate: 0.1, ..TrainConfig::default() };
    let a = train(arch, &train_set, &val, &cfg, |_| {}).unwrap();
    let b = train(arch, &train_set, &val, &cfg, |_| {}).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.log, b.log);
    assert!(accuracy(&a.network, &val).unwrap() > 0.9, "{:?}", a.log.last());

    let frozen = TrainConfig { learning_rate: 0.0, epochs: 1, ..cfg };
    let z = train(arch, &train_set, &val, &frozen, |_| {}).unwrap();
    let init = Network::<f32>::new(arch, cfg.dropout_rate, gesture_cell::synth::derive_seed(cfg.seed, 0)).unwrap();
    assert_eq!(z.network.params(), init.params());
}

#[test]
fn empty_splits_are_rejected() {
    let arch = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let set = toy_set(&mut rng, &arch, 4);
    let empty = LabeledSet::default();
    assert!(matches!(train(arch, &empty, &set, &TrainConfig::default(), |_| {}), Err(NetError::EmptySplit(_))));
    assert!(matches!(train(arch, &set, &empty, &TrainConfig::default(), |_| {}), Err(NetError::EmptySplit(_))));
}

/// Metric oracle written from the definitions, without a confusion matrix.
fn oracle(n: usize, truth: &[usize], pred: &[usize]) -> (f64, f64, f64) {
    let acc = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64;
    let (mut rs, mut fs, mut k) = (0.0, 0.0, 0);
    for c in 0..n {
        let tp = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
        if tp + fn_ == 0.0 {
            continue;
        }
        let r = tp / (tp + fn_);
        let p = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        rs += r;
        fs += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        k += 1;
    }
    (acc, rs / k as f64, fs / k as f64)
}

#[test]
fn metrics_match_oracle_on_random_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let truth: Vec<usize> = (0..100).map(|_| rng.random_range(0..9)).collect();
    let pred: Vec<usize> = truth.iter().map(|t| if rng.random_bool(0.6) { *t } else { rng.random_range(0..9) }).collect();
    let r = EvalReport::from_predictions(9, &truth, &pred);
    let (a, rec, f1) = oracle(9, &truth, &pred);
    assert_eq!(r.accuracy, a);
    assert!((r.macro_recall - rec).abs() < 1e-12);
    assert!((r.macro_f1 - f1).abs() < 1e-12);
    let trace: usize = (0..9).map(|i| r.confusion[i][i]).sum();
    assert_eq!(r.accuracy, trace as f64 / 100.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_normalised_and_shift_invariant(logits in prop::collection::vec(-30.0f64..30.0, 2..12), shift in -50.0f64..50.0) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let am = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        prop_assert_eq!(am(&p), am(&q));
    }

    #[test]
    fn metrics_match_oracle(pairs in prop::collection::vec((0usize..9, 0usize..9), 1..200)) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let r = EvalReport::from_predictions(9, &truth, &pred);
        let (a, rec, f1) = oracle(9, &truth, &pred);
        prop_assert_eq!(r.accuracy, a);
        prop_assert!((r.macro_recall - rec).abs() < 1e-12);
        prop_assert!((r.macro_f1 - f1).abs() < 1e-12);
        for (c, row) in r.confusion.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<usize>(), truth.iter().filter(|t| **t == c).count());
        }
    }
}
