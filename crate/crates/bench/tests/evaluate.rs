mod common;

use chrono::TimeDelta;
use common::{Constant, Oracle};
use flowcast_bench::data::Encoded;
use flowcast_bench::{evaluate, prepare, BenchError, Predictor, Result, SubsetFilter};
use flowcast_core::split::DateRange;
use flowcast_core::geh;
use proptest::prelude::*;

fn test_split() -> Encoded {
    prepare(&common::tiny("lstm")).unwrap().test
}

#[test]
fn perfect_oracle_scores_zero() {
    let data = test_split();
    let e = evaluate(&mut Oracle, &data, 24, 6, 1, None).unwrap();
    let m = e.overall;
    assert_eq!((m.mae, m.rmse, m.geh_mean), (0.0, 0.0, 0.0));
    assert_eq!(m.mape_100, Some(0.0));
    assert_eq!(m.geh_acceptable_frac, 1.0);
    assert_eq!(e.windows, data.len() - 24 - 6 + 1);
    assert_eq!(m.n, e.windows * 6);
}

/// Direct per-pair loop with the textbook formulas.
fn loop_oracle(data: &Encoded, input_len: usize, horizon: usize, pred: f64) -> (f64, f64, f64, usize) {
    let n = data.len() - input_len - horizon + 1;
    let (mut abs, mut sq, mut g, mut count) = (0.0, 0.0, 0.0, 0usize);
    for w in 0..n {
        for k in 0..horizon {
            let c = data.raw[w + input_len + k];
            abs += (pred - c).abs();
            sq += (pred - c) * (pred - c);
            g += if pred + c == 0.0 { 0.0 } else { (2.0 * (pred - c).powi(2) / (pred + c)).sqrt() };
            count += 1;
        }
    }
    (abs / count as f64, (sq / count as f64).sqrt(), g / count as f64, count)
}

#[test]
fn constant_mean_model_matches_loop_and_closed_form() {
    let data = test_split();
    let mean = data.raw.iter().sum::<f64>() / data.len() as f64;
    let (t, tp) = (24, 6);
    let e = evaluate(&mut Constant(mean), &data, t, tp, 1, None).unwrap();
    let (mae, rmse, g, count) = loop_oracle(&data, t, tp, mean);
    assert_eq!(e.overall.n, count);
    assert!((e.overall.mae - mae).abs() < 1e-9);
    assert!((e.overall.rmse - rmse).abs() < 1e-9);
    assert!((e.overall.geh_mean - g).abs() < 1e-9);

    // Each target index i is covered by as many windows as contain it.
    let n = data.len() - t - tp + 1;
    let (mut num, mut den) = (0.0, 0.0);
    for i in t..data.len() {
        let lo = i.saturating_sub(t + tp - 1);
        let hi = (i - t).min(n - 1);
        if lo > hi {
            continue;
        }
        let weight = (hi - lo + 1) as f64;
        num += weight * geh(mean, data.raw[i]).unwrap();
        den += weight;
    }
    assert_eq!(den as usize, count);
    assert!((num / den - e.overall.geh_mean).abs() < 1e-9);
}

#[test]
fn negatives_are_clamped_before_scoring() {
    let data = test_split();
    let neg = evaluate(&mut Constant(-10.0), &data, 24, 6, 1, None).unwrap();
    let zero = evaluate(&mut Constant(0.0), &data, 24, 6, 1, None).unwrap();
    assert_eq!(neg.overall, zero.overall);
    let (mae, _, _, _) = loop_oracle(&data, 24, 6, 0.0);
    assert!((neg.overall.mae - mae).abs() < 1e-9);
}

#[test]
fn insufficient_span_is_an_error() {
    let data = test_split();
    let err = evaluate(&mut Oracle, &data, data.len(), 1, 1, None).unwrap_err();
    assert!(matches!(err, BenchError::ShortSpan { .. }));
}

#[test]
fn stride_skips_windows() {
    let data = test_split();
    let all = evaluate(&mut Oracle, &data, 24, 6, 1, None).unwrap();
    let sparse = evaluate(&mut Oracle, &data, 24, 6, 5, None).unwrap();
    assert_eq!(sparse.windows, all.windows.div_ceil(5));
}

/// Forecasts that depend on the window and step, to make pooling visible.
struct Ramp;

impl Predictor for Ramp {
    fn predict(&mut self, data: &Encoded, starts: &[usize], input_len: usize, horizon: usize) -> Result<Vec<f64>> {
        Ok(starts
            .iter()
            .flat_map(|&s| (0..horizon).map(move |k| data.raw[s + input_len - 1] + 3.0 * k as f64))
            .collect())
    }
}

#[test]
fn holiday_subset_pools_only_holiday_targets() {
    let mut cfg = common::tiny("lstm");
    cfg.data.synthetic.as_mut().unwrap().holidays_per_year = 200;
    let data = prepare(&cfg).unwrap().test;
    assert!(data.times.iter().any(|f| f.is_holiday));
    let filter = SubsetFilter { ranges: vec![], holidays: true };
    let e = evaluate(&mut Ramp, &data, 24, 6, 1, Some(&filter)).unwrap();
    let preds = Ramp.predict(&data, &(0..e.windows).collect::<Vec<_>>(), 24, 6).unwrap();
    let mut pairs = (Vec::new(), Vec::new());
    for w in 0..e.windows {
        for k in 0..6 {
            if data.times[w + 24 + k].is_holiday {
                pairs.0.push(preds[w * 6 + k].max(0.0));
                pairs.1.push(data.raw[w + 24 + k]);
            }
        }
    }
    let expected = flowcast_core::error_metrics(&pairs.0, &pairs.1).unwrap();
    let got = e.subset.unwrap();
    assert_eq!(got.n, expected.n);
    assert!((got.geh_mean - expected.geh_mean).abs() < 1e-9);
    assert!((got.mae - expected.mae).abs() < 1e-9);
}

#[test]
fn empty_subset_is_rejected() {
    let data = test_split();
    let far = DateRange::days(
        chrono::NaiveDate::from_ymd_opt(2030, 1, 1).unwrap(),
        chrono::NaiveDate::from_ymd_opt(2030, 1, 2).unwrap(),
    );
    let filter = SubsetFilter { ranges: vec![far], holidays: false };
    assert!(evaluate(&mut Oracle, &data, 24, 6, 1, Some(&filter)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn range_subset_equals_loop_oracle(a in 0usize..330, len in 1usize..120, t in 1usize..30, tp in 1usize..12) {
        let data = test_split();
        let lo = data.stamps[0] + TimeDelta::hours(a as i64);
        let range = DateRange::new(lo, lo + TimeDelta::hours(len as i64));
        let filter = SubsetFilter { ranges: vec![range], holidays: false };
        let n = data.len() - t - tp + 1;
        let preds = Ramp.predict(&data, &(0..n).collect::<Vec<_>>(), t, tp).unwrap();
        let (mut p, mut c) = (Vec::new(), Vec::new());
        for w in 0..n {
            for k in 0..tp {
                let i = w + t + k;
                if range.contains(data.stamps[i]) {
                    p.push(preds[w * tp + k].max(0.0));
                    c.push(data.raw[i]);
                }
            }
        }
        let got = evaluate(&mut Ramp, &data, t, tp, 1, Some(&filter));
        if p.is_empty() {
            prop_assert!(got.is_err());
        } else {
            let got = got.unwrap().subset.unwrap();
            let want = flowcast_core::error_metrics(&p, &c).unwrap();
            prop_assert_eq!(got.n, want.n);
            prop_assert!((got.geh_mean - want.geh_mean).abs() < 1e-9);
            prop_assert!((got.rmse - want.rmse).abs() < 1e-9);
        }
    }
}

#[test]
fn neural_predictions_are_inverse_standardized() {
    use flowcast_autodiff::Graph;
    use flowcast_bench::{train_model, NeuralPredictor, TrainedModel};
    use flowcast_nn::Forecaster;
    use rand::SeedableRng;

    let cfg = common::tiny("lstm-t");
    let prep = prepare(&cfg).unwrap();
    let out = train_model(&cfg, &prep, 6).unwrap();
    let TrainedModel::Neural { model, scaler } = &out.model else { panic!("expected a neural model") };
    let got = NeuralPredictor::new(model, *scaler, 5).predict(&prep.test, &[0, 7], 24, 6).unwrap();
    let batch = prep.test.batch(&[0, 7], 24, 6, false);
    let mut g = Graph::inference();
    let y = model.forward(&mut g, &batch, false, &mut rand_chacha::ChaCha8Rng::seed_from_u64(5)).unwrap();
    let want: Vec<f64> = g.value(y).data().iter().map(|&z| z * scaler.std() + scaler.mean()).collect();
    assert_eq!(got.len(), 12);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-9);
    }
}
