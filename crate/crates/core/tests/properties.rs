use std::collections::BTreeMap;

use gridnet::datasets::{
    dataset_load, dataset_save, make_digit_dataset, rebalance_classes, replace_class_with_random,
    GlyphSet, VariantSpec,
};
use gridnet::network::{model_load, model_save, Network, NetworkConfig};
use gridnet::training::{evaluate, predict, split, train, Hyperparams};
use gridnet::PixelGrid;
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = PixelGrid> {
    prop::collection::vec(0.0f64..=1.0, 36).prop_map(|v| PixelGrid::new(&v).unwrap())
}

fn digits(per_class: usize, seed: u64) -> gridnet::datasets::Dataset {
    make_digit_dataset(
        &GlyphSet::standard(),
        &VariantSpec {
            per_class,
            flip_prob: 0.1,
            shift_max: 1,
            seed,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_backward_finite_for_bounded_weights(
        seed in any::<u64>(),
        weights in prop::collection::vec(-10.0f64..=10.0, 36 * 20 + 20 * 10),
        biases in prop::collection::vec(-10.0f64..=10.0, 30),
        x in grid(),
        target in 0usize..10,
    ) {
        let mut net = Network::new(NetworkConfig::default().with_seed(seed)).unwrap();
        let (w0, w1) = weights.split_at(36 * 20);
        net.layers_mut()[0].weights_mut().copy_from_slice(w0);
        net.layers_mut()[1].weights_mut().copy_from_slice(w1);
        net.layers_mut()[0].biases_mut().copy_from_slice(&biases[..20]);
        net.layers_mut()[1].biases_mut().copy_from_slice(&biases[20..]);
        let rec = net.forward(&x);
        prop_assert!(rec.stages.iter().all(|s| s.values.iter().all(|v| v.is_finite())));
        let (loss, grads) = net.backward(&x, target).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
        prop_assert!(grads.is_finite());
    }

    #[test]
    fn flatten_preserves_input(seed in any::<u64>(), x in grid()) {
        let net = Network::new(NetworkConfig::default().with_seed(seed)).unwrap();
        let rec = net.forward(&x);
        prop_assert_eq!(rec.input(), x.pixels().as_slice());
        let sum: f64 = rec.output().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(rec.output().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn network_new_is_pure(seed in any::<u64>(), width in 1usize..30) {
        let cfg = NetworkConfig::default()
            .with_hidden(&[width], gridnet::Activation::Relu)
            .with_seed(seed);
        let a = Network::new(cfg.clone()).unwrap();
        let b = Network::new(cfg).unwrap();
        prop_assert_eq!(model_save(&a), model_save(&b));
    }

    #[test]
    fn model_round_trip_predictions(seed in any::<u64>(), xs in prop::collection::vec(grid(), 1..8)) {
        let net = Network::new(NetworkConfig::default().with_seed(seed)).unwrap();
        let back = model_load(&model_save(&net)).unwrap();
        for x in &xs {
            prop_assert_eq!(net.probabilities(x), back.probabilities(x));
        }
    }

    #[test]
    fn predict_is_brute_force_argmax(seed in any::<u64>(), x in grid()) {
        let net = Network::new(NetworkConfig::default().with_seed(seed)).unwrap();
        let names: Vec<String> = (0..10).map(|d| d.to_string()).collect();
        let p = predict(&net, &x, &names).unwrap();
        let mut best = 0;
        for i in 0..p.probabilities.len() {
            if p.probabilities[i] > p.probabilities[best] {
                best = i;
            }
        }
        prop_assert_eq!(p.class_index, best);
        let mut sorted = p.probabilities.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let unsure = sorted[0] - sorted[1] < 0.25;
        prop_assert_eq!(unsure, p.status == gridnet::training::Confidence::Unsure);
    }

    #[test]
    fn dataset_round_trip(per_class in 1usize..6, seed in any::<u64>()) {
        let ds = digits(per_class, seed);
        prop_assert_eq!(dataset_load(&dataset_save(&ds)).unwrap(), ds);
    }

    #[test]
    fn surgery_counts(seed in any::<u64>(), class in 0usize..10, p in 0.01f64..=1.0) {
        let ds = digits(12, seed);
        let replaced = replace_class_with_random(&ds, class, "noise", 0.5, seed).unwrap();
        prop_assert_eq!(replaced.class_counts(), ds.class_counts());
        let rb = rebalance_classes(&ds, &BTreeMap::from([(class, p)]), seed).unwrap();
        for (c, (&after, &before)) in rb.class_counts().iter().zip(&ds.class_counts()).enumerate() {
            prop_assert!(after <= before);
            if c != class {
                prop_assert_eq!(after, before);
            } else {
                prop_assert!(after >= 1);
            }
        }
    }
}

#[test]
fn evaluation_matches_naive_loop() {
    let ds = digits(10, 5);
    let s = split(&ds, 0.8, 5).unwrap();
    let mut net = Network::new(NetworkConfig::default().with_seed(5)).unwrap();
    train(
        &mut net,
        &s,
        &Hyperparams {
            epochs: 3,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    let report = evaluate(&net, &ds).unwrap();

    let mut correct = 0usize;
    for e in ds.examples() {
        let p = net.probabilities(&e.image);
        let mut best = 0;
        for i in 1..p.len() {
            if p[i] > p[best] {
                best = i;
            }
        }
        if best == e.class_index {
            correct += 1;
        }
    }
    assert_eq!(report.accuracy, correct as f64 / ds.len() as f64);
    let rows: Vec<usize> = report.confusion.iter().map(|r| r.iter().sum()).collect();
    assert_eq!(rows, ds.class_counts());
    assert_eq!(report.total(), ds.len());
}

#[test]
fn training_is_deterministic() {
    let ds = digits(20, 9);
    let s = split(&ds, 0.8, 9).unwrap();
    let hp = Hyperparams {
        epochs: 20,
        shuffle_seed: 9,
        ..Default::default()
    };
    let run = || {
        let mut net = Network::new(NetworkConfig::default().with_seed(9)).unwrap();
        let h = train(&mut net, &s, &hp, None).unwrap();
        (model_save(&net), h.to_json())
    };
    assert_eq!(run(), run());
}

#[test]
fn history_metrics_in_range() {
    let ds = digits(20, 2);
    let s = split(&ds, 0.8, 2).unwrap();
    let mut net = Network::new(NetworkConfig::default().with_seed(2)).unwrap();
    let h = train(
        &mut net,
        &s,
        &Hyperparams {
            epochs: 30,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert_eq!(h.len(), 30);
    for (i, r) in h.epochs.iter().enumerate() {
        assert_eq!(r.epoch, i + 1);
        assert!((0.0..=1.0).contains(&r.train_acc) && (0.0..=1.0).contains(&r.val_acc));
        assert!(r.train_loss >= 0.0 && r.train_loss.is_finite());
        assert!(r.val_loss >= 0.0 && r.val_loss.is_finite());
    }
}
