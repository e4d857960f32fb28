//! Stride-1 rolling windows over a complete series.

use chrono::NaiveDateTime;

use crate::error::{DataError, Result};
use crate::flow::FlowSeries;

/// One supervised example: `input_len` observed values followed by
/// `horizon` target values.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Index of the first input value in the source series.
    pub start: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub input_stamps: Vec<NaiveDateTime>,
    pub target_stamps: Vec<NaiveDateTime>,
}

/// Lazily materialised windows; `N - T - T_p + 1` of them, ordered by start.
#[derive(Debug, Clone)]
pub struct RollingWindows {
    values: Vec<f64>,
    stamps: Vec<NaiveDateTime>,
    input_len: usize,
    horizon: usize,
    next: usize,
}

impl RollingWindows {
    pub fn new(values: Vec<f64>, stamps: Vec<NaiveDateTime>, input_len: usize, horizon: usize) -> Result<Self> {
        if input_len == 0 || horizon == 0 {
            return Err(DataError::Invalid("input length and horizon must be positive".into()));
        }
        if values.len() != stamps.len() {
            return Err(DataError::Invalid("values and stamps differ in length".into()));
        }
        let needed = input_len + horizon;
        if values.len() < needed {
            return Err(DataError::TooShort { len: values.len(), needed });
        }
        Ok(Self { values, stamps, input_len, horizon, next: 0 })
    }

    pub fn num_windows(&self) -> usize {
        self.values.len() - self.input_len - self.horizon + 1
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stamps(&self) -> &[NaiveDateTime] {
        &self.stamps
    }

    /// Window starting at series index `start`.
    pub fn get(&self, start: usize) -> Option<Window> {
        if start >= self.num_windows() {
            return None;
        }
        let mid = start + self.input_len;
        let end = mid + self.horizon;
        Some(Window {
            start,
            input: self.values[start..mid].to_vec(),
            target: self.values[mid..end].to_vec(),
            input_stamps: self.stamps[start..mid].to_vec(),
            target_stamps: self.stamps[mid..end].to_vec(),
        })
    }
}

impl Iterator for RollingWindows {
    type Item = Window;

    fn next(&mut self) -> Option<Window> {
        let w = self.get(self.next)?;
        self.next += 1;
        Some(w)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.num_windows().saturating_sub(self.next);
        (left, Some(left))
    }
}

impl ExactSizeIterator for RollingWindows {}

pub fn rolling_windows(series: &FlowSeries, input_len: usize, horizon: usize) -> Result<RollingWindows> {
    RollingWindows::new(series.values()?, series.stamps().to_vec(), input_len, horizon)
}
