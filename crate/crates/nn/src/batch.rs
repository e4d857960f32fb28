use flowcast_autodiff::Array;
use flowcast_core::calendar::N_FEATURES;

use crate::error::{NnError, Result};

/// Zero-based calendar category indices for one timestamp.
pub type FeatureIndices = [usize; N_FEATURES];

/// A mini-batch of standardized windows, stored row-major by batch entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeqBatch {
    pub size: usize,
    pub input_len: usize,
    pub horizon: usize,
    /// `[size, input_len]`
    pub inputs: Vec<f64>,
    /// `[size, input_len]`, features of each input timestamp.
    pub input_features: Vec<FeatureIndices>,
    /// `[size, horizon]`, features of each target timestamp.
    pub target_features: Vec<FeatureIndices>,
    /// `[size, horizon]`; empty when only predicting.
    pub targets: Vec<f64>,
}

impl SeqBatch {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.input_len == 0 || self.horizon == 0 {
            return Err(NnError::Batch(format!(
                "empty dimension: size {}, input {}, horizon {}",
                self.size, self.input_len, self.horizon
            )));
        }
        let (ni, nt) = (self.size * self.input_len, self.size * self.horizon);
        if self.inputs.len() != ni || self.input_features.len() != ni || self.target_features.len() != nt {
            return Err(NnError::Batch("input or feature lengths do not match the batch shape".into()));
        }
        if !self.targets.is_empty() && self.targets.len() != nt {
            return Err(NnError::Batch(format!("{} targets for shape [{}, {}]", self.targets.len(), self.size, self.horizon)));
        }
        Ok(())
    }

    pub fn inputs_array(&self) -> Array {
        Array::new(vec![self.size, self.input_len, 1], self.inputs.clone()).expect("validated shape")
    }

    pub fn targets_array(&self) -> Result<Array> {
        if self.targets.len() != self.size * self.horizon {
            return Err(NnError::Batch("batch carries no targets".into()));
        }
        Ok(Array::new(vec![self.size, self.horizon], self.targets.clone()).expect("validated shape"))
    }
}
