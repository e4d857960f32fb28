//! Rolling-window scoring on the test split.

use chrono::NaiveDateTime;
use flowcast_core::split::DateRange;
use flowcast_core::{clamp_nonnegative, MetricAccumulator, MetricReport, TimeFeatureVector};

use crate::data::Encoded;
use crate::error::{BenchError, Result};
use crate::model::Predictor;

/// Windows handed to the predictor at once.
const CHUNK: usize = 256;

/// Selects (window, step) pairs by the timestamp of the target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubsetFilter {
    pub ranges: Vec<DateRange>,
    pub holidays: bool,
}

impl SubsetFilter {
    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty() && !self.holidays
    }

    pub fn matches(&self, t: NaiveDateTime, features: &TimeFeatureVector) -> bool {
        (self.holidays && features.is_holiday) || self.ranges.iter().any(|r| r.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub overall: MetricReport,
    pub subset: Option<MetricReport>,
    pub windows: usize,
}

/// Scores every `stride`-th window of `data`. Forecasts are clamped at zero
/// before any metric sees them, and all (window, step) pairs are pooled.
pub fn evaluate(
    predictor: &mut dyn Predictor,
    data: &Encoded,
    input_len: usize,
    horizon: usize,
    stride: usize,
    filter: Option<&SubsetFilter>,
) -> Result<Evaluation> {
    if horizon == 0 || stride == 0 {
        return Err(BenchError::Config("horizon and stride must be positive".into()));
    }
    let n = data.num_windows(input_len, horizon)?;
    let starts: Vec<usize> = (0..n).step_by(stride).collect();
    let filter = filter.filter(|f| !f.is_empty());
    let mut all = MetricAccumulator::new();
    let mut sub = MetricAccumulator::new();
    for chunk in starts.chunks(CHUNK) {
        let raw = predictor.predict(data, chunk, input_len, horizon)?;
        if raw.len() != chunk.len() * horizon {
            return Err(BenchError::Config(format!("predictor returned {} values for {} windows", raw.len(), chunk.len())));
        }
        let preds = clamp_nonnegative(&raw)?;
        for (w, &s) in chunk.iter().enumerate() {
            for k in 0..horizon {
                let i = s + input_len + k;
                let (p, c) = (preds[w * horizon + k], data.raw[i]);
                all.push(p, c)?;
                if filter.is_some_and(|f| f.matches(data.stamps[i], &data.times[i])) {
                    sub.push(p, c)?;
                }
            }
        }
    }
    let subset = match filter {
        Some(_) if sub.is_empty() => return Err(BenchError::Config("subset filter matched no test targets".into())),
        Some(_) => Some(sub.finish()?),
        None => None,
    };
    Ok(Evaluation { overall: all.finish()?, subset, windows: starts.len() })
}
