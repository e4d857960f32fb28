//! Synthetic hourly flow: daily and weekly cycles, holiday dips and
//! multiplicative noise.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate, TimeDelta, Timelike};
use flowcast_core::{DatasetProfile, FlowSeries, HolidayCalendar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub start: NaiveDate,
    pub days: usize,
    /// Mean flow in vehicles per hour.
    pub level: f64,
    /// Amplitude of the 24 h cycle, peaking at noon.
    pub daily_amplitude: f64,
    /// Amplitude of the 12 h harmonic.
    pub daily_harmonic: f64,
    /// Amplitude of the 168 h cycle, lowest over the weekend.
    pub weekly_amplitude: f64,
    /// Holiday dates per calendar year; two are fixed (1 Jan, 25 Dec).
    pub holidays_per_year: usize,
    /// Flow multiplier on holidays.
    pub holiday_factor: f64,
    /// Relative standard deviation of the multiplicative noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date"),
            days: 3 * 365,
            level: 300.0,
            daily_amplitude: 180.0,
            daily_harmonic: 50.0,
            weekly_amplitude: 60.0,
            holidays_per_year: 10,
            holiday_factor: 0.6,
            noise: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(BenchError::Config("synthetic series needs at least one day".into()));
        }
        let finite = [self.level, self.daily_amplitude, self.daily_harmonic, self.weekly_amplitude, self.noise];
        if finite.iter().any(|v| !v.is_finite()) || self.noise < 0.0 {
            return Err(BenchError::Config("synthetic amplitudes must be finite, noise non-negative".into()));
        }
        if !(self.holiday_factor >= 0.0 && self.holiday_factor.is_finite()) {
            return Err(BenchError::Config("holiday_factor must be non-negative".into()));
        }
        if self.holidays_per_year > 300 {
            return Err(BenchError::Config("at most 300 holidays per year".into()));
        }
        Ok(())
    }

    /// Noise-free flow at an hour, given the day of week (Monday = 0).
    pub fn clean_flow(&self, weekday: u32, hour: u32, holiday: bool) -> f64 {
        let h = hour as f64;
        let w = (weekday * 24 + hour) as f64;
        let daily = -self.daily_amplitude * (TAU * h / 24.0).cos() + self.daily_harmonic * (2.0 * TAU * h / 24.0).sin();
        // Peak mid-week, trough on the weekend.
        let weekly = self.weekly_amplitude * (TAU * (w - 60.0) / 168.0).cos();
        let base = self.level + daily + weekly;
        if holiday {
            base * self.holiday_factor
        } else {
            base
        }
    }
}

/// Fixed new-year and christmas dates plus seeded moving dates for every
/// year the range touches.
fn holidays(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> HolidayCalendar {
    let end = cfg.start + TimeDelta::days(cfg.days as i64);
    let mut dates = BTreeSet::new();
    for year in cfg.start.year()..=end.year() {
        let first = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid date");
        let len = if NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date").ordinal() == 366 { 366 } else { 365 };
        let mut year_dates = BTreeSet::new();
        if cfg.holidays_per_year >= 1 {
            year_dates.insert(first);
        }
        if cfg.holidays_per_year >= 2 {
            year_dates.insert(NaiveDate::from_ymd_opt(year, 12, 25).expect("valid date"));
        }
        while year_dates.len() < cfg.holidays_per_year {
            year_dates.insert(first + TimeDelta::days(rng.random_range(0..len)));
        }
        dates.extend(year_dates);
    }
    HolidayCalendar::from_dates(dates)
}

/// Hourly series of `days * 24` values from midnight of `start`.
pub fn generate(cfg: &SynthConfig) -> Result<(FlowSeries, HolidayCalendar)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let calendar = holidays(cfg, &mut rng);
    let start = cfg.start.and_time(chrono::NaiveTime::MIN);
    let n = cfg.days * 24;
    let mut flows = Vec::with_capacity(n);
    for i in 0..n {
        let t = start + TimeDelta::hours(i as i64);
        let clean = cfg.clean_flow(t.weekday().num_days_from_monday(), t.hour(), calendar.contains(t.date()));
        let z: f64 = rng.sample(StandardNormal);
        flows.push(Some((clean * (1.0 + cfg.noise * z)).max(0.0)));
    }
    let series = FlowSeries::from_values(start, TimeDelta::hours(1), flows, DatasetProfile::Freeway)?;
    Ok((series, calendar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SynthConfig { days: 21, ..Default::default() };
        let (a, cal) = generate(&cfg).unwrap();
        let (b, _) = generate(&cfg).unwrap();
        assert_eq!(a.len(), 21 * 24);
        assert_eq!(a, b);
        assert_eq!(cal.len(), 10);
        assert!(a.values().unwrap().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn noiseless_weekly_period() {
        let cfg = SynthConfig { days: 28, noise: 0.0, holidays_per_year: 0, ..Default::default() };
        let v = generate(&cfg).unwrap().0.values().unwrap();
        for i in 0..v.len() - 168 {
            assert!((v[i] - v[i + 168]).abs() < 1e-9);
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - cfg.level).abs() < 1e-9);
    }

    #[test]
    fn holidays_dip() {
        let cfg = SynthConfig { noise: 0.0, ..Default::default() };
        let plain = cfg.clean_flow(2, 12, false);
        assert!((cfg.clean_flow(2, 12, true) - 0.6 * plain).abs() < 1e-9);
        let (s, cal) = generate(&SynthConfig { days: 365, ..cfg }).unwrap();
        let jan1_noon = s.values().unwrap()[12];
        assert!(cal.contains(cfg.start));
        let weekday = cfg.start.weekday().num_days_from_monday();
        assert!((jan1_noon - cfg.clean_flow(weekday, 12, true)).abs() < 1e-9);
    }

    #[test]
    fn holidays_are_seeded() {
        let a = generate(&SynthConfig { days: 365, seed: 1, ..Default::default() }).unwrap().1;
        let b = generate(&SynthConfig { days: 365, seed: 2, ..Default::default() }).unwrap().1;
        assert_ne!(a, b);
    }
}
