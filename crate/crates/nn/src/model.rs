use flowcast_autodiff::{Graph, ParamStore, Var};
use rand::RngCore;

use crate::batch::SeqBatch;
use crate::error::Result;

/// A trainable multi-step forecaster over standardized values.
pub trait Forecaster {
    fn store(&self) -> &ParamStore;

    fn store_mut(&mut self) -> &mut ParamStore;

    /// Predictions `[B, T_p]` for a batch. `train` enables dropout.
    fn forward(&self, g: &mut Graph, batch: &SeqBatch, train: bool, rng: &mut dyn RngCore) -> Result<Var>;
}
