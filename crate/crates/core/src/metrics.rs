//! Forecast accuracy metrics.
//!
//! GEH is `sqrt(2 (m - c)^2 / (m + c))` for a modelled hourly volume `m`
//! against a count `c`. Values up to 5 are acceptable, above 10 unacceptable.
//! MAPE is only taken over pairs whose ground truth exceeds 100 veh/h.

use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

/// Ground truth must exceed this for a pair to enter MAPE.
pub const MAPE_FLOOR: f64 = 100.0;
pub const GEH_ACCEPTABLE: f64 = 5.0;
pub const GEH_UNACCEPTABLE: f64 = 10.0;

/// Replaces negative predictions by zero (and `-0.0` by `0.0`).
pub fn clamp_nonnegative(preds: &[f64]) -> Result<Vec<f64>> {
    preds
        .iter()
        .map(|&p| {
            if p.is_nan() {
                Err(DataError::Invalid("NaN prediction".into()))
            } else if p > 0.0 {
                Ok(p)
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

/// GEH statistic for one modelled/observed pair; 0 when both are 0.
pub fn geh(m: f64, c: f64) -> Result<f64> {
    if !(m >= 0.0 && c >= 0.0) {
        return Err(DataError::Invalid(format!("GEH needs non-negative volumes, got m={m}, c={c}")));
    }
    let total = m + c;
    if total == 0.0 {
        return Ok(0.0);
    }
    let d = m - c;
    Ok((2.0 * d * d / total).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GehClass {
    Acceptable,
    Attention,
    Unacceptable,
}

pub fn geh_classify(g: f64) -> GehClass {
    if g <= GEH_ACCEPTABLE {
        GehClass::Acceptable
    } else if g <= GEH_UNACCEPTABLE {
        GehClass::Attention
    } else {
        GehClass::Unacceptable
    }
}

/// Pooled accuracy over a set of (prediction, truth) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when no ground truth exceeded the floor.
    pub mape_100: Option<f64>,
    pub geh_mean: f64,
    pub geh_acceptable_frac: f64,
    pub geh_unacceptable_frac: f64,
    pub n: usize,
    pub n_mape: usize,
}

/// Streaming version of [`error_metrics`]; pairs are pooled uniformly.
#[derive(Debug, Clone, Default)]
pub struct MetricAccumulator {
    n: usize,
    abs_sum: f64,
    sq_sum: f64,
    ape_sum: f64,
    n_mape: usize,
    geh_sum: f64,
    n_acceptable: usize,
    n_unacceptable: usize,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pred: f64, truth: f64) -> Result<()> {
        let g = geh(pred, truth)?;
        let err = pred - truth;
        self.n += 1;
        self.abs_sum += err.abs();
        self.sq_sum += err * err;
        if truth > MAPE_FLOOR {
            self.ape_sum += err.abs() / truth * 100.0;
            self.n_mape += 1;
        }
        self.geh_sum += g;
        match geh_classify(g) {
            GehClass::Acceptable => self.n_acceptable += 1,
            GehClass::Unacceptable => self.n_unacceptable += 1,
            GehClass::Attention => {}
        }
        Ok(())
    }

    pub fn extend(&mut self, preds: &[f64], truth: &[f64]) -> Result<()> {
        if preds.len() != truth.len() {
            return Err(DataError::Invalid(format!(
                "prediction/truth length mismatch: {} vs {}",
                preds.len(),
                truth.len()
            )));
        }
        for (&p, &c) in preds.iter().zip(truth) {
            self.push(p, c)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> Result<MetricReport> {
        if self.n == 0 {
            return Err(DataError::Invalid("no pairs to score".into()));
        }
        let n = self.n as f64;
        Ok(MetricReport {
            mae: self.abs_sum / n,
            rmse: (self.sq_sum / n).sqrt(),
            mape_100: (self.n_mape > 0).then(|| self.ape_sum / self.n_mape as f64),
            geh_mean: self.geh_sum / n,
            geh_acceptable_frac: self.n_acceptable as f64 / n,
            geh_unacceptable_frac: self.n_unacceptable as f64 / n,
            n: self.n,
            n_mape: self.n_mape,
        })
    }
}

/// Scores clamped predictions against non-negative ground truth.
pub fn error_metrics(preds: &[f64], truth: &[f64]) -> Result<MetricReport> {
    let mut acc = MetricAccumulator::new();
    acc.extend(preds, truth)?;
    acc.finish()
}
