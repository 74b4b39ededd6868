mod support;

use hisa_core::features::{fuse_rows, make_windows, FeatureMode};
use hisa_core::lstm::{mean_squared_error, predict, train, Checkpoint, OptimizerKind, TrainConfig};
use hisa_core::market_data::PriceField;
use hisa_core::pipeline::{prepare_dataset, ExperimentConfig};
use support::fixtures::{sentiment_coupled_market, sine_windows};

fn overfit_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 200,
        learning_rate: 0.01,
        batch_size: 4,
        hidden_size: 16,
        seed,
        ..Default::default()
    }
}

#[test]
fn overfits_noiseless_sine() {
    let windows = sine_windows();
    let ckpt = train(&windows, &overfit_config(1)).unwrap();
    assert_eq!(ckpt.loss_history.len(), 200);
    assert!(*ckpt.loss_history.last().unwrap() < 1e-3);
    assert!(mean_squared_error(&ckpt.params, &windows).unwrap() < 1e-3);

    let preds = predict(&ckpt, &windows).unwrap();
    for (p, l) in preds.iter().zip(&windows.labels) {
        assert!(((p - l) / l).abs() < 0.05, "prediction {p} vs label {l}");
    }
}

#[test]
fn full_batch_sgd_loss_is_monotone_after_warmup() {
    let windows = sine_windows();
    let monotone = (0..10)
        .filter(|&seed| {
            let cfg = TrainConfig {
                optimizer: OptimizerKind::Sgd,
                learning_rate: 0.1,
                batch_size: windows.len(),
                ..overfit_config(seed)
            };
            let h = train(&windows, &cfg).unwrap().loss_history;
            h[10..].windows(2).all(|p| p[1] <= p[0])
        })
        .count();
    assert!(monotone >= 9, "only {monotone}/10 seeds monotone");
}

#[test]
fn training_is_bit_reproducible() {
    let windows = sine_windows();
    let cfg = TrainConfig { epochs: 5, ..overfit_config(3) };
    let a = train(&windows, &cfg).unwrap();
    let b = train(&windows, &cfg).unwrap();
    assert_eq!(a, b);
    let (mut ja, mut jb) = (Vec::new(), Vec::new());
    a.to_json(&mut ja).unwrap();
    b.to_json(&mut jb).unwrap();
    assert_eq!(ja, jb);
    assert_eq!(a.loss_history.len(), 5);
}

#[test]
fn reloaded_checkpoint_predicts_identically() {
    let (series, sentiment) = sentiment_coupled_market(4, 120);
    let cfg = ExperimentConfig { lookback: 8, hidden_size: 8, ..Default::default() };
    let data = prepare_dataset(&series, &sentiment, FeatureMode::Hisa, &cfg).unwrap();
    let (train_w, test_w) = make_windows(&data, cfg.lookback).unwrap();
    let ckpt = train(&train_w, &cfg.train_config(3)).unwrap();

    let mut buf = Vec::new();
    ckpt.to_json(&mut buf).unwrap();
    let reloaded = Checkpoint::from_json(buf.as_slice()).unwrap();
    let a = predict(&ckpt, &test_w).unwrap();
    let b = predict(&reloaded, &test_w).unwrap();
    assert_eq!(a.len(), test_w.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn predicting_across_modes_is_a_shape_error() {
    let (series, sentiment) = sentiment_coupled_market(4, 80);
    let cfg = ExperimentConfig { lookback: 5, hidden_size: 4, ..Default::default() };
    let hisa = prepare_dataset(&series, &sentiment, FeatureMode::Hisa, &cfg).unwrap();
    let dlpm = prepare_dataset(&series, &sentiment, FeatureMode::Dlpm, &cfg).unwrap();
    let (hisa_train, _) = make_windows(&hisa, 5).unwrap();
    let (_, dlpm_test) = make_windows(&dlpm, 5).unwrap();
    let ckpt = train(&hisa_train, &cfg.train_config(1)).unwrap();
    assert!(matches!(
        predict(&ckpt, &dlpm_test),
        Err(hisa_core::lstm::LstmError::ShapeMismatch(_))
    ));
}

#[test]
fn constant_sentiment_changes_only_the_feature_set() {
    let (series, mut sentiment) = sentiment_coupled_market(9, 60);
    for d in &mut sentiment {
        d.pos_pct = 30.0;
        d.neg_pct = 20.0;
        d.neu_pct = 50.0;
    }
    let hisa = fuse_rows(&series, &sentiment, FeatureMode::Hisa, PriceField::Close).unwrap();
    let dlpm = fuse_rows(&series, &sentiment, FeatureMode::Dlpm, PriceField::Close).unwrap();
    assert_eq!(hisa.targets, dlpm.targets);
    assert_eq!(hisa.dates, dlpm.dates);
    assert_eq!(hisa.features.dim(), (59, 3));
    assert_eq!(dlpm.features.dim(), (59, 4));
    assert_eq!(hisa.features.column(0), dlpm.features.column(0));
}
