//! Loading, splitting and encoding a dataset for the models.

use chrono::{NaiveDateTime, TimeDelta};
use flowcast_core::{
    aggregate, extract_time_features, fit_standardizer, impute_same_period_last_week, load_holiday_calendar,
    parse_flow_csv, split, FlowSeries, HolidayCalendar, Standardizer, TimeFeatureVector,
};
use flowcast_nn::{FeatureIndices, SeqBatch};

use crate::config::{DataConfig, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::synth;

/// Reads, imputes and aggregates the configured series.
pub fn load_series(cfg: &DataConfig) -> Result<(FlowSeries, HolidayCalendar)> {
    let file_calendar = cfg.holidays.as_ref().map(load_holiday_calendar).transpose()?;
    let (series, generated) = match &cfg.synthetic {
        Some(s) => {
            let (series, cal) = synth::generate(s)?;
            (series, Some(cal))
        }
        None => {
            let mut parts = cfg.paths.iter().map(|p| parse_flow_csv(p, cfg.profile));
            let first = parts.next().ok_or_else(|| BenchError::Config("no data paths".into()))??;
            let series = parts.try_fold(first, |acc, next| acc.concat(&next?))?;
            (series, None)
        }
    };
    let series = impute_same_period_last_week(&series)?;
    let series = aggregate(&series, TimeDelta::minutes(cfg.interval_minutes as i64))?;
    let calendar = file_calendar.or(generated).unwrap_or_default();
    Ok((series, calendar))
}

/// A dataset cut into its three splits, with training-split statistics.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub calendar: HolidayCalendar,
    pub scaler: Standardizer,
    pub train: Encoded,
    pub val: Encoded,
    pub test: Encoded,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (series, calendar) = load_series(&cfg.data)?;
    prepare_series(&series, calendar, cfg)
}

pub fn prepare_series(series: &FlowSeries, calendar: HolidayCalendar, cfg: &ExperimentConfig) -> Result<Prepared> {
    let (train, val, test) = split(series, &cfg.split)?;
    let scaler = fit_standardizer(&train)?;
    Ok(Prepared {
        train: Encoded::new(&train, &calendar, scaler)?,
        val: Encoded::new(&val, &calendar, scaler)?,
        test: Encoded::new(&test, &calendar, scaler)?,
        calendar,
        scaler,
    })
}

/// One split in every form a model needs.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub stamps: Vec<NaiveDateTime>,
    pub raw: Vec<f64>,
    /// Standardized with the training statistics.
    pub z: Vec<f64>,
    pub times: Vec<TimeFeatureVector>,
    pub features: Vec<FeatureIndices>,
}

impl Encoded {
    pub fn new(series: &FlowSeries, calendar: &HolidayCalendar, scaler: Standardizer) -> Result<Self> {
        let raw = series.values()?;
        let times: Vec<TimeFeatureVector> =
            series.stamps().iter().map(|&t| extract_time_features(t, calendar)).collect();
        Ok(Self {
            stamps: series.stamps().to_vec(),
            z: scaler.apply_all(&raw),
            raw,
            features: times.iter().map(|f| f.indices()).collect(),
            times,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// `N - T - T_p + 1`, or an error when the span is too short.
    pub fn num_windows(&self, input_len: usize, horizon: usize) -> Result<usize> {
        let needed = input_len + horizon;
        if self.len() < needed {
            return Err(BenchError::ShortSpan { len: self.len(), needed });
        }
        Ok(self.len() - needed + 1)
    }

    /// Standardized windows starting at `starts`; targets are included when
    /// `with_targets` is set.
    pub fn batch(&self, starts: &[usize], input_len: usize, horizon: usize, with_targets: bool) -> SeqBatch {
        let mut b = SeqBatch {
            size: starts.len(),
            input_len,
            horizon,
            inputs: Vec::with_capacity(starts.len() * input_len),
            input_features: Vec::with_capacity(starts.len() * input_len),
            target_features: Vec::with_capacity(starts.len() * horizon),
            targets: Vec::new(),
        };
        for &s in starts {
            let mid = s + input_len;
            let end = mid + horizon;
            b.inputs.extend_from_slice(&self.z[s..mid]);
            b.input_features.extend_from_slice(&self.features[s..mid]);
            b.target_features.extend_from_slice(&self.features[mid..end]);
            if with_targets {
                b.targets.extend_from_slice(&self.z[mid..end]);
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SynthConfig;
    use flowcast_core::split::DateRange;
    use flowcast_core::SplitSpec;

    fn cfg() -> ExperimentConfig {
        let text = r#"
model = "lstm"
input_len = 4
horizons = [2]
[data.synthetic]
days = 30
"#;
        let mut c = ExperimentConfig::from_toml(text).unwrap();
        let d = |day| chrono::NaiveDate::from_ymd_opt(2017, 1, day).unwrap();
        c.split = SplitSpec::new(DateRange::days(d(1), d(15)), DateRange::days(d(15), d(22)), DateRange::days(d(22), d(29)))
            .unwrap();
        c
    }

    #[test]
    fn splits_are_standardized_with_train_stats() {
        let p = prepare(&cfg()).unwrap();
        assert_eq!(p.train.len(), 14 * 24);
        let mean = p.train.z.iter().sum::<f64>() / p.train.len() as f64;
        assert!(mean.abs() < 1e-9);
        for enc in [&p.train, &p.val, &p.test] {
            for (r, z) in enc.raw.iter().zip(&enc.z) {
                assert!((p.scaler.invert(*z) - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn batch_layout() {
        let p = prepare(&cfg()).unwrap();
        let b = p.test.batch(&[0, 5], 4, 2, true);
        b.validate().unwrap();
        assert_eq!(&b.inputs[4..8], &p.test.z[5..9]);
        assert_eq!(&b.targets[2..4], &p.test.z[9..11]);
        assert_eq!(b.target_features[2], p.test.features[9]);
        assert!(p.test.batch(&[0], 4, 2, false).targets.is_empty());
    }

    #[test]
    fn short_span_is_error() {
        let p = prepare(&cfg()).unwrap();
        let n = p.test.len();
        assert_eq!(p.test.num_windows(n - 1, 1).unwrap(), 1);
        assert!(matches!(p.test.num_windows(n, 1), Err(BenchError::ShortSpan { .. })));
    }

    #[test]
    fn synthetic_calendar_is_used() {
        let c = cfg();
        let (_, cal) = load_series(&c.data).unwrap();
        let (_, direct) = synth::generate(&SynthConfig { days: 30, ..Default::default() }).unwrap();
        assert_eq!(cal, direct);
    }
}
