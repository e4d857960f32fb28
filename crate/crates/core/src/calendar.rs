//! Calendar features: six timestamp features plus a public-holiday flag.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::flow::parse_date;

/// Number of time features per timestamp.
pub const N_FEATURES: usize = 7;

/// Vocabulary size of each feature, in [`TimeFeatureVector::indices`] order.
pub const FEATURE_VOCAB: [usize; N_FEATURES] = [7, 4, 12, 31, 24, 366, 2];

pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["day_of_week", "quarter", "month", "day_of_month", "hour_of_day", "day_of_year", "is_holiday"];

/// Set of public-holiday dates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

/// Result of parsing a holiday file.
#[derive(Debug, Clone)]
pub struct ParsedCalendar {
    pub calendar: HolidayCalendar,
    /// `(line, date)` of every repeated entry.
    pub duplicates: Vec<(usize, NaiveDate)>,
}

impl HolidayCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dates(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self { dates: dates.into_iter().collect() }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.dates.iter().copied()
    }

    /// One `YYYY-MM-DD` per line; blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str) -> Result<ParsedCalendar> {
        let mut dates = BTreeSet::new();
        let mut duplicates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let date = parse_date(content).ok_or_else(|| DataError::Parse {
                line: line as u64,
                message: format!("malformed date `{content}`"),
            })?;
            if !dates.insert(date) {
                duplicates.push((line, date));
            }
        }
        Ok(ParsedCalendar { calendar: HolidayCalendar { dates }, duplicates })
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::from("# public holidays, one per line\n");
        for d in &self.dates {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            out.push('\n');
        }
        out
    }
}

/// Loads a holiday file, warning about duplicate entries.
pub fn load_holiday_calendar(path: impl AsRef<Path>) -> Result<HolidayCalendar> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
    let parsed = HolidayCalendar::parse_str(&text)?;
    for (line, date) in &parsed.duplicates {
        log::warn!("{}:{line}: duplicate holiday {date}", path.display());
    }
    Ok(parsed.calendar)
}

/// The seven calendar features of one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeFeatureVector {
    /// Monday = 0 .. Sunday = 6.
    pub day_of_week: u8,
    /// 1..=4
    pub quarter: u8,
    /// 1..=12
    pub month: u8,
    /// 1..=31
    pub day_of_month: u8,
    /// 0..=23
    pub hour_of_day: u8,
    /// 1..=366
    pub day_of_year: u16,
    pub is_holiday: bool,
}

impl TimeFeatureVector {
    /// Zero-based category indices, one per embedding table.
    pub fn indices(&self) -> [usize; N_FEATURES] {
        [
            self.day_of_week as usize,
            self.quarter as usize - 1,
            self.month as usize - 1,
            self.day_of_month as usize - 1,
            self.hour_of_day as usize,
            self.day_of_year as usize - 1,
            self.is_holiday as usize,
        ]
    }

    /// Raw feature values as ordinal numbers, for tree models.
    pub fn ordinals(&self) -> [f64; N_FEATURES] {
        [
            self.day_of_week as f64,
            self.quarter as f64,
            self.month as f64,
            self.day_of_month as f64,
            self.hour_of_day as f64,
            self.day_of_year as f64,
            self.is_holiday as u8 as f64,
        ]
    }

    pub fn in_range(&self) -> bool {
        self.indices().iter().zip(FEATURE_VOCAB).all(|(&i, v)| i < v)
    }
}

pub fn extract_time_features(t: NaiveDateTime, cal: &HolidayCalendar) -> TimeFeatureVector {
    let date = t.date();
    let month = date.month() as u8;
    TimeFeatureVector {
        day_of_week: date.weekday().num_days_from_monday() as u8,
        quarter: month.div_ceil(3),
        month,
        day_of_month: date.day() as u8,
        hour_of_day: t.hour() as u8,
        day_of_year: date.ordinal() as u16,
        is_holiday: cal.contains(date),
    }
}
