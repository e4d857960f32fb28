use chrono::NaiveDate;
use flowcast_core::{extract_time_features, HolidayCalendar};
use flowcast_gbrt::dump::{from_text, load, save, to_text};
use flowcast_gbrt::{boost, BoostConfig, Ensemble, FeatureMatrix, Tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(seed: u64, n: usize) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * 3);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b, c) = (rng.random_range(0..24) as f64, rng.random_range(0..7) as f64, rng.random_range(-1.0..1.0));
        data.extend([a, b, c]);
        y.push(100.0 + 30.0 * (a / 24.0 * std::f64::consts::TAU).sin() + if b >= 5.0 { -40.0 } else { 0.0 } + 5.0 * c + rng.random_range(-2.0..2.0));
    }
    (FeatureMatrix::new(n, 3, data).unwrap(), y)
}

fn cfg() -> BoostConfig {
    BoostConfig { n_estimators: 50, learning_rate: 0.3, max_depth: 4, subsample: 0.8, colsample_bytree: 0.7, seed: 3, ..BoostConfig::default() }
}

#[test]
fn zero_learning_rate_keeps_the_base_score() {
    let (x, y) = synthetic(1, 200);
    let out = boost(&x, &y, None, &BoostConfig { learning_rate: 0.0, ..cfg() }).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(out.ensemble.predict(&x).unwrap().iter().all(|&p| p == mean));
}

#[test]
fn single_stump_round_predicts_the_mean() {
    let (x, y) = synthetic(2, 150);
    let c = BoostConfig { n_estimators: 1, max_depth: 0, reg_lambda: 0.0, subsample: 1.0, ..cfg() };
    let out = boost(&x, &y, None, &c).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert_eq!(out.ensemble.trees.len(), 1);
    for p in out.ensemble.predict(&x).unwrap() {
        assert!((p - mean).abs() < 1e-9);
    }
}

#[test]
fn training_loss_never_increases_without_row_sampling() {
    let (x, y) = synthetic(3, 400);
    let c = BoostConfig { n_estimators: 200, subsample: 1.0, learning_rate: 0.1, ..cfg() };
    let out = boost(&x, &y, None, &c).unwrap();
    assert_eq!(out.train_loss.len(), 200);
    for w in out.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0], "{} then {}", w[0], w[1]);
    }
}

#[test]
fn empty_and_single_leaf_ensembles() {
    let e = Ensemble { base_score: 7.5, learning_rate: 0.1, n_features: 2, trees: vec![] };
    assert_eq!(e.predict_row(&[1.0, 2.0]), 7.5);
    let e = Ensemble { trees: vec![Tree::leaf(4.0)], ..e };
    assert!((e.predict_row(&[9.0, -3.0]) - 7.9).abs() < 1e-15);
    let wrong = FeatureMatrix::new(1, 3, vec![0.0; 3]).unwrap();
    assert!(e.predict(&wrong).is_err());
}

#[test]
fn seeds_only_matter_when_sampling() {
    let (x, y) = synthetic(4, 300);
    let full = BoostConfig { subsample: 1.0, colsample_bytree: 1.0, ..cfg() };
    let a = boost(&x, &y, None, &BoostConfig { seed: 1, ..full.clone() }).unwrap();
    let b = boost(&x, &y, None, &BoostConfig { seed: 99, ..full }).unwrap();
    assert_eq!(a.ensemble, b.ensemble);
    let c = boost(&x, &y, None, &cfg()).unwrap();
    let d = boost(&x, &y, None, &cfg()).unwrap();
    assert_eq!(to_text(&c.ensemble), to_text(&d.ensemble));
    let e = boost(&x, &y, None, &BoostConfig { seed: 4, ..cfg() }).unwrap();
    assert_ne!(c.ensemble, e.ensemble);
}

#[test]
fn monotone_recoding_leaves_predictions_unchanged() {
    let (x, y) = synthetic(5, 300);
    let recode = |v: f64| (v / 3.0).exp() + v * v * v;
    let data: Vec<f64> = (0..x.n_rows()).flat_map(|i| {
        let r = x.row(i);
        [recode(r[0]), r[1], r[2]]
    }).collect();
    let x2 = FeatureMatrix::new(x.n_rows(), 3, data).unwrap();
    // Every row must be seen when fitting: values missing from a node are
    // routed by midpoints, which a recoding does not preserve.
    let c = BoostConfig { subsample: 1.0, ..cfg() };
    let a = boost(&x, &y, None, &c).unwrap().ensemble;
    let b = boost(&x2, &y, None, &c).unwrap().ensemble;
    for (p, q) in a.predict(&x).unwrap().iter().zip(b.predict(&x2).unwrap()) {
        assert!((p - q).abs() < 1e-9);
    }
}

#[test]
fn early_stopping_keeps_the_best_prefix() {
    let (x, y) = synthetic(6, 300);
    let flipped: Vec<f64> = y.iter().map(|v| 200.0 - v).collect();
    let out = boost(&x, &y, Some((&x, &flipped)), &BoostConfig { subsample: 1.0, ..cfg() }).unwrap();
    assert_eq!(out.val_loss.len(), 4);
    assert_eq!(out.best_round, 1);
    assert_eq!(out.ensemble.trees.len(), 1);

    let (vx, vy) = synthetic(7, 100);
    let out = boost(&x, &y, Some((&vx, &vy)), &BoostConfig { n_estimators: 300, learning_rate: 0.5, ..cfg() }).unwrap();
    let best = out.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(out.val_loss[out.best_round - 1], best);
    assert_eq!(out.ensemble.trees.len(), out.best_round);
}

#[test]
fn invalid_configs_and_data() {
    let (x, y) = synthetic(8, 20);
    assert!(boost(&x, &y, None, &BoostConfig { subsample: 0.0, ..cfg() }).is_err());
    assert!(boost(&x, &y, None, &BoostConfig { colsample_bytree: 1.5, ..cfg() }).is_err());
    assert!(boost(&x, &y, None, &BoostConfig { gamma: -1.0, ..cfg() }).is_err());
    assert!(boost(&x, &y[1..], None, &cfg()).is_err());
    assert!(FeatureMatrix::new(1, 1, vec![f64::NAN]).is_err());
    let parsed: BoostConfig = toml::from_str("max_depth = 8\nreg_lambda = 0.1\nn_estimators = 2000").unwrap();
    assert_eq!((parsed.max_depth, parsed.n_estimators), (8, 2000));
    assert!(toml::from_str::<BoostConfig>("depth = 3").is_err());
}

#[test]
fn model_text_round_trip() {
    let (x, y) = synthetic(9, 200);
    let e = boost(&x, &y, None, &cfg()).unwrap().ensemble;
    let text = to_text(&e);
    assert!(text.starts_with("flowcast-gbrt 1\n"));
    assert_eq!(from_text(&text).unwrap(), e);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    save(&e, &path).unwrap();
    assert_eq!(load(&path).unwrap().predict(&x).unwrap(), e.predict(&x).unwrap());
    assert!(from_text("something else").is_err());
    assert!(from_text(&text.replace("leaf", "lief")).is_err());
    assert!(from_text(&text[..text.len() / 2]).is_err());
}

#[test]
fn calendar_matrix_and_history_free_prediction() {
    let cal = HolidayCalendar::from_dates([NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()]);
    let start = NaiveDate::from_ymd_opt(2018, 12, 25).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let feats: Vec<_> = (0..24 * 14).map(|h| extract_time_features(start + chrono::Duration::hours(h), &cal)).collect();
    let y: Vec<f64> = feats.iter().map(|f| 50.0 + f.hour_of_day as f64 * 3.0 - if f.is_holiday { 40.0 } else { 0.0 }).collect();
    let all = FeatureMatrix::from_time_features(&feats, &[true; 7]).unwrap();
    let mut mask = [true; 7];
    mask[6] = false;
    let ablated = FeatureMatrix::from_time_features(&feats, &mask).unwrap();
    assert_eq!((all.n_features(), ablated.n_features()), (7, 6));
    assert_eq!(all.row(24 * 7)[6], 1.0);
    let e = boost(&all, &y, None, &BoostConfig { subsample: 1.0, colsample_bytree: 1.0, ..cfg() }).unwrap().ensemble;
    let row = all.row(24 * 7 + 9).to_vec();
    assert_eq!(e.predict_row(&row), e.predict_row(&row));
    assert!((e.predict_row(&row) - (50.0 + 27.0 - 40.0)).abs() < 1.0);
}
