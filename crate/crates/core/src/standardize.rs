use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::flow::FlowSeries;

/// Smallest population standard deviation accepted by [`fit_standardizer`].
pub const MIN_STD: f64 = 1e-9;

/// Z-scoring with statistics from the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: f64,
    std: f64,
}

impl Standardizer {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std.is_finite() && std > MIN_STD) || !mean.is_finite() {
            return Err(DataError::Degenerate(std));
        }
        Ok(Self { mean, std })
    }

    /// Population mean and standard deviation of `values`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(DataError::Invalid("cannot fit a standardizer on no data".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self::new(mean, var.sqrt())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn invert_all(&self, zs: &[f64]) -> Vec<f64> {
        zs.iter().map(|&z| self.invert(z)).collect()
    }
}

pub fn fit_standardizer(train: &FlowSeries) -> Result<Standardizer> {
    Standardizer::fit(&train.values()?)
}
