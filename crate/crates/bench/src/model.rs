//! Trained models behind one prediction interface.

use std::path::Path;

use flowcast_autodiff::{Graph, ParamStore, Var};
use flowcast_core::calendar::N_FEATURES;
use flowcast_core::Standardizer;
use flowcast_gbrt::{dump, Ensemble};
use flowcast_nn::{Forecaster, Informer, SeqBatch, Seq2Seq};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ModelKind};
use crate::data::Encoded;
use crate::error::{BenchError, Result};

/// Windows per inference graph.
const PREDICT_BATCH: usize = 64;

#[derive(Debug, Clone)]
pub enum NeuralModel {
    Seq2Seq(Seq2Seq),
    Informer(Informer),
}

impl NeuralModel {
    pub fn build(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        match cfg.model {
            ModelKind::Rnn | ModelKind::RnnT | ModelKind::Lstm | ModelKind::LstmT => {
                Ok(NeuralModel::Seq2Seq(Seq2Seq::new(cfg.seq2seq_config(), rng)?))
            }
            ModelKind::Informer | ModelKind::InformerT => Ok(NeuralModel::Informer(Informer::new(cfg.informer_config(), rng)?)),
            ModelKind::XgboostT => Err(BenchError::Config("xgboost-t is not a neural model".into())),
        }
    }

    /// Rebuilds the architecture from `cfg` and loads saved parameters.
    pub fn load(cfg: &ExperimentConfig, path: &Path) -> Result<Self> {
        let mut model = Self::build(cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
        model.store_mut().assign_from(&ParamStore::load(path)?)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.store().save(path)?)
    }
}

impl Forecaster for NeuralModel {
    fn store(&self) -> &ParamStore {
        match self {
            NeuralModel::Seq2Seq(m) => m.store(),
            NeuralModel::Informer(m) => m.store(),
        }
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            NeuralModel::Seq2Seq(m) => m.store_mut(),
            NeuralModel::Informer(m) => m.store_mut(),
        }
    }

    fn forward(
        &self,
        g: &mut Graph,
        batch: &SeqBatch,
        train: bool,
        rng: &mut dyn RngCore,
    ) -> flowcast_nn::Result<Var> {
        match self {
            NeuralModel::Seq2Seq(m) => m.forward(g, batch, train, rng),
            NeuralModel::Informer(m) => m.forward(g, batch, train, rng),
        }
    }
}

/// Produces raw-scale forecasts for windows of an encoded split.
pub trait Predictor {
    /// `starts.len() * horizon` values, window-major.
    fn predict(&mut self, data: &Encoded, starts: &[usize], input_len: usize, horizon: usize) -> Result<Vec<f64>>;
}

/// Inference-mode forward passes, inverted to vehicles per interval.
pub struct NeuralPredictor<'a> {
    model: &'a NeuralModel,
    scaler: Standardizer,
    rng: ChaCha8Rng,
}

impl<'a> NeuralPredictor<'a> {
    pub fn new(model: &'a NeuralModel, scaler: Standardizer, seed: u64) -> Self {
        Self { model, scaler, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Predictor for NeuralPredictor<'_> {
    fn predict(&mut self, data: &Encoded, starts: &[usize], input_len: usize, horizon: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(starts.len() * horizon);
        for chunk in starts.chunks(PREDICT_BATCH) {
            let batch = data.batch(chunk, input_len, horizon, false);
            let mut g = Graph::inference();
            let y = self.model.forward(&mut g, &batch, false, &mut self.rng)?;
            out.extend(g.value(y).data().iter().map(|&z| self.scaler.invert(z)));
        }
        Ok(out)
    }
}

/// Tree forecasts depend only on the target timestamp, so they are computed
/// once per series position.
pub struct TreePredictor {
    per_step: Vec<f64>,
}

impl TreePredictor {
    pub fn new(ensemble: &Ensemble, mask: &[bool; N_FEATURES], data: &Encoded) -> Result<Self> {
        let x = flowcast_gbrt::FeatureMatrix::from_time_features(&data.times, mask)?;
        Ok(Self { per_step: ensemble.predict(&x)? })
    }
}

impl Predictor for TreePredictor {
    fn predict(&mut self, data: &Encoded, starts: &[usize], input_len: usize, horizon: usize) -> Result<Vec<f64>> {
        if data.len() != self.per_step.len() {
            return Err(BenchError::Config("tree predictor was built for a different split".into()));
        }
        let mut out = Vec::with_capacity(starts.len() * horizon);
        for &s in starts {
            let mid = s + input_len;
            out.extend_from_slice(&self.per_step[mid..mid + horizon]);
        }
        Ok(out)
    }
}

/// Either kind of trained model with what produced it.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Neural { model: NeuralModel, scaler: Standardizer },
    Tree { ensemble: Ensemble, mask: [bool; N_FEATURES] },
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            TrainedModel::Neural { model, .. } => model.save(path),
            TrainedModel::Tree { ensemble, .. } => Ok(dump::save(ensemble, path)?),
        }
    }

    pub fn load(cfg: &ExperimentConfig, scaler: Standardizer, path: &Path) -> Result<Self> {
        if cfg.model.is_neural() {
            Ok(TrainedModel::Neural { model: NeuralModel::load(cfg, path)?, scaler })
        } else {
            Ok(TrainedModel::Tree { ensemble: dump::load(path)?, mask: cfg.feature_mask()? })
        }
    }

    pub fn predictor<'a>(&'a self, data: &Encoded, seed: u64) -> Result<Box<dyn Predictor + 'a>> {
        Ok(match self {
            TrainedModel::Neural { model, scaler } => Box::new(NeuralPredictor::new(model, *scaler, seed)),
            TrainedModel::Tree { ensemble, mask } => Box::new(TreePredictor::new(ensemble, mask, data)?),
        })
    }
}
