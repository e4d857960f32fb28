//! Raw flow ingestion, gap imputation and temporal aggregation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

/// Timestamp layout used by every flow file: `YYYY-MM-DDTHH:MM`.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Which raw values count as sensor defects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetProfile {
    /// Signalised arterial loops: negative, zero and absent values are defects.
    Melbourne,
    /// Freeway detector stations: only absent values are defects.
    Freeway,
}

impl DatasetProfile {
    fn is_defect(self, flow: f64) -> bool {
        match self {
            DatasetProfile::Melbourne => flow <= 0.0,
            DatasetProfile::Freeway => false,
        }
    }
}

impl FromStr for DatasetProfile {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "melbourne" | "arterial" => Ok(DatasetProfile::Melbourne),
            "freeway" | "pems" => Ok(DatasetProfile::Freeway),
            other => Err(DataError::Invalid(format!("unknown dataset profile `{other}`"))),
        }
    }
}

impl fmt::Display for DatasetProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetProfile::Melbourne => f.write_str("melbourne"),
            DatasetProfile::Freeway => f.write_str("freeway"),
        }
    }
}

/// One observation of a flow series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub timestamp: NaiveDateTime,
    /// Vehicles per interval; `None` marks a missing or defective reading.
    pub flow: Option<f64>,
    pub imputed: bool,
}

/// A regular, strictly increasing univariate flow series.
///
/// Storage is column-oriented; [`FlowSeries::records`] yields row views.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    stamps: Vec<NaiveDateTime>,
    flows: Vec<Option<f64>>,
    imputed: Vec<bool>,
    interval: TimeDelta,
    profile: DatasetProfile,
}

impl FlowSeries {
    /// Builds a regular series starting at `start` with one value per `interval`.
    pub fn from_values(
        start: NaiveDateTime,
        interval: TimeDelta,
        flows: Vec<Option<f64>>,
        profile: DatasetProfile,
    ) -> Result<Self> {
        if interval <= TimeDelta::zero() {
            return Err(DataError::Interval(format!("non-positive interval {interval}")));
        }
        let stamps = (0..flows.len()).map(|i| start + interval * i as i32).collect();
        let imputed = vec![false; flows.len()];
        Ok(Self { stamps, flows, imputed, interval, profile })
    }

    /// Builds a series from records, checking regularity.
    pub fn from_records(records: &[FlowRecord], interval: TimeDelta, profile: DatasetProfile) -> Result<Self> {
        if interval <= TimeDelta::zero() {
            return Err(DataError::Interval(format!("non-positive interval {interval}")));
        }
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].timestamp - pair[0].timestamp != interval {
                return Err(DataError::Interval(format!(
                    "records {} and {} are not one interval apart",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self {
            stamps: records.iter().map(|r| r.timestamp).collect(),
            flows: records.iter().map(|r| r.flow).collect(),
            imputed: records.iter().map(|r| r.imputed).collect(),
            interval,
            profile,
        })
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn interval(&self) -> TimeDelta {
        self.interval
    }

    pub fn profile(&self) -> DatasetProfile {
        self.profile
    }

    pub fn stamps(&self) -> &[NaiveDateTime] {
        &self.stamps
    }

    pub fn flows(&self) -> &[Option<f64>] {
        &self.flows
    }

    pub fn imputed_flags(&self) -> &[bool] {
        &self.imputed
    }

    pub fn record(&self, i: usize) -> FlowRecord {
        FlowRecord { timestamp: self.stamps[i], flow: self.flows[i], imputed: self.imputed[i] }
    }

    pub fn records(&self) -> impl Iterator<Item = FlowRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    pub fn start(&self) -> Option<NaiveDateTime> {
        self.stamps.first().copied()
    }

    /// One interval past the last record.
    pub fn end(&self) -> Option<NaiveDateTime> {
        self.stamps.last().map(|t| *t + self.interval)
    }

    pub fn missing_count(&self) -> usize {
        self.flows.iter().filter(|f| f.is_none()).count()
    }

    /// Dense values; fails if any reading is still missing.
    pub fn values(&self) -> Result<Vec<f64>> {
        let missing = self.missing_count();
        if missing > 0 {
            return Err(DataError::HasMissing(missing));
        }
        Ok(self.flows.iter().map(|f| f.unwrap_or_default()).collect())
    }

    /// Records `start..end` (index range) as a new series.
    pub fn slice(&self, start: usize, end: usize) -> FlowSeries {
        FlowSeries {
            stamps: self.stamps[start..end].to_vec(),
            flows: self.flows[start..end].to_vec(),
            imputed: self.imputed[start..end].to_vec(),
            interval: self.interval,
            profile: self.profile,
        }
    }

    /// Index of `t` if it lies on the series grid.
    pub fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        let start = self.start()?;
        let offset = t - start;
        if offset < TimeDelta::zero() {
            return None;
        }
        let step = self.interval.num_seconds();
        let secs = offset.num_seconds();
        if secs % step != 0 {
            return None;
        }
        let i = (secs / step) as usize;
        (i < self.len()).then_some(i)
    }

    /// Concatenates two series that abut on the same grid.
    pub fn concat(&self, next: &FlowSeries) -> Result<FlowSeries> {
        if self.interval != next.interval {
            return Err(DataError::Interval("cannot concatenate series with different intervals".into()));
        }
        if let (Some(end), Some(start)) = (self.end(), next.start()) {
            if end != start {
                return Err(DataError::Interval(format!("series do not abut: {end} vs {start}")));
            }
        }
        let mut out = self.clone();
        out.stamps.extend_from_slice(&next.stamps);
        out.flows.extend_from_slice(&next.flows);
        out.imputed.extend_from_slice(&next.imputed);
        Ok(out)
    }

    /// Writes the series as a `timestamp,flow` CSV (missing values left empty).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |e: std::io::Error| DataError::Io { path: path.display().to_string(), source: e };
        let mut out = String::with_capacity(self.len() * 24 + 16);
        out.push_str("timestamp,flow\n");
        for (t, f) in self.stamps.iter().zip(&self.flows) {
            out.push_str(&t.format(TIMESTAMP_FORMAT).to_string());
            out.push(',');
            if let Some(v) = f {
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(io_err)
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Reads a `timestamp,flow` CSV.
///
/// The sampling interval is the smallest gap between consecutive rows (one
/// hour for single-row files). Absent rows inside the span become missing
/// records, as do values the profile classifies as defects.
pub fn parse_flow_csv(path: impl AsRef<Path>, profile: DatasetProfile) -> Result<FlowSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
    parse_flow_str(&text, profile)
}

/// [`parse_flow_csv`] over in-memory text.
pub fn parse_flow_str(text: &str, profile: DatasetProfile) -> Result<FlowSeries> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| DataError::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "flow" {
        return Err(DataError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut rows: Vec<(NaiveDateTime, Option<f64>)> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let stamp = parse_timestamp(&record[0]).ok_or_else(|| DataError::Parse {
            line,
            message: format!("unparseable timestamp `{}`", &record[0]),
        })?;
        let flow = match &record[1] {
            "" => None,
            raw => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| DataError::Parse { line, message: format!("unparseable flow `{raw}`") })?;
                if !v.is_finite() {
                    return Err(DataError::Parse { line, message: format!("non-finite flow `{raw}`") });
                }
                if profile.is_defect(v) {
                    None
                } else if v < 0.0 {
                    return Err(DataError::Parse { line, message: format!("negative flow {v}") });
                } else {
                    Some(v)
                }
            }
        };
        if let Some(&(prev, _)) = rows.last() {
            if stamp == prev {
                return Err(DataError::Duplicate { line });
            }
            if stamp < prev {
                return Err(DataError::OutOfOrder { line });
            }
        }
        rows.push((stamp, flow));
    }

    let interval = rows
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .min()
        .unwrap_or_else(|| TimeDelta::hours(1));

    let mut flows = Vec::with_capacity(rows.len());
    let start = match rows.first() {
        Some(&(t, _)) => t,
        None => return FlowSeries::from_values(NaiveDateTime::MIN, interval, Vec::new(), profile),
    };
    for (i, &(stamp, flow)) in rows.iter().enumerate() {
        if i > 0 {
            let gap = stamp - rows[i - 1].0;
            if gap.num_seconds() % interval.num_seconds() != 0 {
                return Err(DataError::Interval(format!(
                    "gap of {gap} before {stamp} is not a multiple of the {interval} interval"
                )));
            }
            let absent = gap.num_seconds() / interval.num_seconds() - 1;
            flows.extend(std::iter::repeat_n(None, absent as usize));
        }
        flows.push(flow);
    }
    FlowSeries::from_values(start, interval, flows, profile)
}

/// Imputation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputeConfig {
    /// Refuse to impute when more than this fraction is missing.
    pub max_missing_fraction: f64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        Self { max_missing_fraction: 0.05 }
    }
}

/// Fills every gap with the reading one week earlier.
///
/// Gaps are resolved in time order, so a run of missing weeks is filled
/// forward from the last good week. When the earlier donor does not exist
/// (the first week of the series) the reading one week later is used instead.
pub fn impute_same_period_last_week(series: &FlowSeries) -> Result<FlowSeries> {
    impute_with(series, ImputeConfig::default())
}

pub fn impute_with(series: &FlowSeries, cfg: ImputeConfig) -> Result<FlowSeries> {
    let missing = series.missing_count();
    if missing == 0 {
        return Ok(series.clone());
    }
    let fraction = missing as f64 / series.len() as f64;
    if fraction > cfg.max_missing_fraction {
        return Err(DataError::TooManyMissing { fraction, limit: cfg.max_missing_fraction });
    }
    let week = TimeDelta::days(7);
    if week.num_seconds() % series.interval.num_seconds() != 0 {
        return Err(DataError::Interval(format!("interval {} does not divide a week", series.interval)));
    }
    let lag = (week.num_seconds() / series.interval.num_seconds()) as usize;

    let mut out = series.clone();
    for i in 0..out.len() {
        if out.flows[i].is_some() {
            continue;
        }
        let earlier = i.checked_sub(lag).and_then(|j| out.flows[j]);
        let later = series.flows.get(i + lag).copied().flatten();
        match earlier.or(later) {
            Some(v) => {
                out.flows[i] = Some(v);
                out.imputed[i] = true;
            }
            None => return Err(DataError::NoDonor(out.stamps[i].format(TIMESTAMP_FORMAT).to_string())),
        }
    }
    Ok(out)
}

/// Sums consecutive readings into coarser buckets.
///
/// Flow is a count, so buckets are totals rather than means. A partial
/// trailing bucket is dropped with a warning; a bucket containing a missing
/// reading is itself missing.
pub fn aggregate(series: &FlowSeries, target_interval: TimeDelta) -> Result<FlowSeries> {
    let src = series.interval.num_seconds();
    let dst = target_interval.num_seconds();
    if dst <= 0 || dst % src != 0 {
        return Err(DataError::Interval(format!(
            "target interval {target_interval} is not a positive multiple of {}",
            series.interval
        )));
    }
    let ratio = (dst / src) as usize;
    if ratio == 1 {
        return Ok(series.clone());
    }
    if let Some(start) = series.start() {
        let since_epoch = start.and_utc().timestamp();
        if since_epoch.rem_euclid(dst) != 0 {
            return Err(DataError::Misaligned {
                start: start.format(TIMESTAMP_FORMAT).to_string(),
                minutes: dst / 60,
            });
        }
    }
    let full = series.len() / ratio;
    let dropped = series.len() - full * ratio;
    if dropped > 0 {
        log::warn!("aggregate: dropping partial trailing bucket of {dropped} readings");
    }
    let mut stamps = Vec::with_capacity(full);
    let mut flows = Vec::with_capacity(full);
    let mut imputed = Vec::with_capacity(full);
    for b in 0..full {
        let range = b * ratio..(b + 1) * ratio;
        stamps.push(series.stamps[range.start]);
        flows.push(series.flows[range.clone()].iter().try_fold(0.0, |acc, f| f.map(|v| acc + v)));
        imputed.push(series.imputed[range].iter().any(|&x| x));
    }
    Ok(FlowSeries { stamps, flows, imputed, interval: target_interval, profile: series.profile })
}
