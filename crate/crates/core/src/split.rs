//! Chronological train/validation/test splitting.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::flow::FlowSeries;

/// Half-open calendar range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl DateRange {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Self {
        Self { start, end }
    }

    /// Midnight of `start` to midnight of `end`.
    pub fn days(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start: start.and_time(chrono::NaiveTime::MIN), end: end.and_time(chrono::NaiveTime::MIN) }
    }

    pub fn contains(&self, t: NaiveDateTime) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: DateRange,
    pub val: DateRange,
    pub test: DateRange,
}

impl SplitSpec {
    pub fn new(train: DateRange, val: DateRange, test: DateRange) -> Result<Self> {
        let spec = Self { train, val, test };
        spec.validate()?;
        Ok(spec)
    }

    /// Twenty months of training (2017-01 .. 2018-08), four months of
    /// validation (2018-09 .. 2018-12) and the calendar year 2019 for testing.
    pub fn three_year_default() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self {
            train: DateRange::days(d(2017, 1, 1), d(2018, 9, 1)),
            val: DateRange::days(d(2018, 9, 1), d(2019, 1, 1)),
            test: DateRange::days(d(2019, 1, 1), d(2020, 1, 1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if r.start >= r.end {
                return Err(DataError::Split(format!("{name} range is empty")));
            }
        }
        if self.train.end > self.val.start || self.val.end > self.test.start {
            return Err(DataError::Split("ranges must be disjoint and ordered train < val < test".into()));
        }
        Ok(())
    }
}

/// Cuts a series into its train, validation and test parts.
pub fn split(series: &FlowSeries, spec: &SplitSpec) -> Result<(FlowSeries, FlowSeries, FlowSeries)> {
    spec.validate()?;
    let (Some(first), Some(end)) = (series.start(), series.end()) else {
        return Err(DataError::Split("series is empty".into()));
    };
    if spec.train.start < first || spec.test.end > end {
        return Err(DataError::Split(format!(
            "split spans {}..{} but series covers {first}..{end}",
            spec.train.start, spec.test.end
        )));
    }
    let part = |name: &str, r: DateRange| -> Result<FlowSeries> {
        let stamps = series.stamps();
        let lo = stamps.partition_point(|t| *t < r.start);
        let hi = stamps.partition_point(|t| *t < r.end);
        if lo == hi {
            return Err(DataError::Split(format!("{name} split is empty")));
        }
        Ok(series.slice(lo, hi))
    };
    Ok((part("train", spec.train)?, part("val", spec.val)?, part("test", spec.test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{parse_timestamp, DatasetProfile};
    use chrono::TimeDelta;

    fn series(start: &str, n: usize) -> FlowSeries {
        FlowSeries::from_values(
            parse_timestamp(start).unwrap(),
            TimeDelta::hours(1),
            (0..n).map(|i| Some(i as f64)).collect(),
            DatasetProfile::Freeway,
        )
        .unwrap()
    }

    #[test]
    fn three_year_split_lengths() {
        let s = series("2017-01-01T00:00", 3 * 365 * 24);
        let (tr, va, te) = split(&s, &SplitSpec::three_year_default()).unwrap();
        // Jan 2017 - Aug 2018: 365 + 243 days.
        assert_eq!(tr.len(), (365 + 243) * 24);
        assert_eq!(va.len(), 122 * 24);
        assert_eq!(te.len(), 365 * 24);
        assert_eq!(tr.len() + va.len() + te.len(), s.len());
    }

    #[test]
    fn ten_records_six_two_two() {
        let s = series("2017-01-01T00:00", 10);
        let t = |h: &str| parse_timestamp(h).unwrap();
        let spec = SplitSpec::new(
            DateRange::new(t("2017-01-01T00:00"), t("2017-01-01T06:00")),
            DateRange::new(t("2017-01-01T06:00"), t("2017-01-01T08:00")),
            DateRange::new(t("2017-01-01T08:00"), t("2017-01-01T10:00")),
        )
        .unwrap();
        let (tr, va, te) = split(&s, &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 2, 2));
        assert_eq!(va.values().unwrap(), vec![6.0, 7.0]);
    }

    #[test]
    fn empty_val_is_error() {
        let s = series("2017-01-01T00:00", 10);
        let t = |h: &str| parse_timestamp(h).unwrap();
        let spec = SplitSpec {
            train: DateRange::new(t("2017-01-01T00:00"), t("2017-01-01T10:00")),
            val: DateRange::new(t("2017-01-01T10:00"), t("2017-01-01T10:00")),
            test: DateRange::new(t("2017-01-01T10:00"), t("2017-01-01T10:00")),
        };
        assert!(split(&s, &spec).is_err());
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let t = |h: &str| parse_timestamp(h).unwrap();
        let r = DateRange::new(t("2017-01-01T00:00"), t("2017-01-02T00:00"));
        assert!(SplitSpec::new(r, r, r).is_err());
    }
}
