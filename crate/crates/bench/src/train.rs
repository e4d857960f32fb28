//! The shared training recipe: mini-batch Adam with step-decay learning
//! rate and early stopping that restores the best parameters.

use flowcast_autodiff::{step_decay_lr, Adam, AdamConfig, AutodiffError, Graph};
use flowcast_core::{EarlyStopping, StopDecision};
use flowcast_gbrt::{boost, BoostConfig, FeatureMatrix};
use flowcast_nn::{Forecaster, NnError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, TrainingConfig};
use crate::data::{Encoded, Prepared};
use crate::error::{BenchError, Result};
use crate::model::{NeuralModel, TrainedModel};

/// Windows per validation graph.
const VAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Runs epochs until the validation loss has risen `patience` times in a
/// row or `max_epochs` is reached, then puts back the state from the epoch
/// with the lowest validation loss.
///
/// `train_epoch(state, epoch, lr)` returns the mean training loss and
/// `validate(state, epoch)` the validation loss. Epochs count from 1.
pub fn fit_loop<S, T, V>(state: &mut S, recipe: &TrainingConfig, mut train_epoch: T, mut validate: V) -> Result<FitLog>
where
    S: Clone,
    T: FnMut(&mut S, usize, f64) -> Result<f64>,
    V: FnMut(&S, usize) -> Result<f64>,
{
    let mut stopper = EarlyStopping::new(recipe.patience);
    let mut best: Option<S> = None;
    let mut log = FitLog::default();
    for epoch in 1..=recipe.max_epochs {
        let lr = step_decay_lr(recipe.lr, epoch as u32);
        let train_loss = train_epoch(state, epoch, lr)?;
        let val_loss = validate(state, epoch)?;
        if !val_loss.is_finite() {
            return Err(BenchError::NonFiniteValidation { epoch, loss: val_loss });
        }
        log::info!("epoch {epoch}: lr {lr:.3e}, train {train_loss:.6}, val {val_loss:.6}");
        log.epochs.push(EpochRecord { epoch, lr, train_loss, val_loss });
        let decision = stopper.observe(val_loss);
        if stopper.improved() {
            best = Some(state.clone());
        }
        if decision == StopDecision::Stop {
            log.stopped_early = true;
            break;
        }
    }
    log.best_epoch = stopper.best_epoch().unwrap_or(0);
    if let Some(b) = best {
        *state = b;
    }
    Ok(log)
}

/// `k` indices spread evenly over `0..n` (all of them when `k >= n`).
pub fn evenly_spaced(n: usize, k: Option<usize>) -> Vec<usize> {
    match k {
        Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
        _ => (0..n).collect(),
    }
}

/// Mean squared error on standardized targets, in inference mode.
pub fn validation_loss(
    model: &NeuralModel,
    data: &Encoded,
    starts: &[usize],
    input_len: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sq = 0.0;
    let mut count = 0usize;
    for chunk in starts.chunks(VAL_BATCH) {
        let batch = data.batch(chunk, input_len, horizon, true);
        let mut g = Graph::inference();
        let y = model.forward(&mut g, &batch, false, &mut rng)?;
        sq += g.value(y).data().iter().zip(&batch.targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        count += batch.targets.len();
    }
    Ok(sq / count.max(1) as f64)
}

/// Trains a fresh neural model for one horizon.
pub fn train_neural(cfg: &ExperimentConfig, prep: &Prepared, horizon: usize, seed: u64) -> Result<(NeuralModel, FitLog)> {
    let recipe = &cfg.training;
    let input_len = cfg.input_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NeuralModel::build(cfg, &mut rng)?;
    let mut adam = Adam::new(model.store(), AdamConfig { lr: recipe.lr, ..AdamConfig::default() });
    let n_train = prep.train.num_windows(input_len, horizon)?;
    let val_starts = evenly_spaced(prep.val.num_windows(input_len, horizon)?, recipe.max_val_windows);
    let val_seed = seed ^ 0x76a1;
    let log = fit_loop(
        &mut model,
        recipe,
        |m, epoch, lr| {
            adam.set_lr(lr);
            let mut starts: Vec<usize> = (0..n_train).collect();
            starts.shuffle(&mut rng);
            if let Some(cap) = recipe.max_train_windows {
                starts.truncate(cap);
            }
            let mut total = 0.0;
            for (b, chunk) in starts.chunks(recipe.batch_size).enumerate() {
                let batch = prep.train.batch(chunk, input_len, horizon, true);
                let mut g = Graph::new();
                let nonfinite = |loss| BenchError::NonFiniteLoss { epoch, batch: b + 1, loss };
                let loss = m
                    .forward(&mut g, &batch, true, &mut rng)
                    .map_err(BenchError::from)
                    .and_then(|y| Ok(g.mse_loss(y, &batch.targets_array()?)?))
                    .map_err(|e| if overflowed(&e) { nonfinite(f64::NAN) } else { e })?;
                let value = g.scalar(loss);
                if !value.is_finite() {
                    return Err(nonfinite(value));
                }
                let grads = g.backward(loss)?.for_store(m.store());
                adam.step(m.store_mut(), &grads)?;
                total += value * chunk.len() as f64;
            }
            Ok(total / starts.len() as f64)
        },
        |m, _| validation_loss(m, &prep.val, &val_starts, input_len, horizon, val_seed),
    )?;
    Ok((model, log))
}

/// Whether a forward pass failed because a value left the finite range.
fn overflowed(e: &BenchError) -> bool {
    matches!(
        e,
        BenchError::Autodiff(AutodiffError::NonFinite { .. })
            | BenchError::Nn(NnError::Autodiff(AutodiffError::NonFinite { .. }))
    )
}

/// Fits the tree ensemble on (calendar features, raw flow) pairs, with the
/// validation split driving early stopping.
pub fn train_tree(cfg: &ExperimentConfig, prep: &Prepared) -> Result<(TrainedModel, usize)> {
    let mask = cfg.feature_mask()?;
    let x = FeatureMatrix::from_time_features(&prep.train.times, &mask)?;
    let xv = FeatureMatrix::from_time_features(&prep.val.times, &mask)?;
    let params = BoostConfig { seed: cfg.seed, ..cfg.xgboost.clone() };
    let out = boost(&x, &prep.train.raw, Some((&xv, &prep.val.raw)), &params)?;
    log::info!("boosting kept {} trees", out.best_round);
    Ok((TrainedModel::Tree { ensemble: out.ensemble, mask }, out.best_round))
}

/// What training produced for one horizon.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: FitLog,
    pub best_round: Option<usize>,
}

/// Seed for the model of one horizon, so sweeps do not share streams.
pub fn horizon_seed(seed: u64, horizon: usize) -> u64 {
    seed ^ (horizon as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn train_model(cfg: &ExperimentConfig, prep: &Prepared, horizon: usize) -> Result<TrainOutcome> {
    if cfg.model.is_neural() {
        let (model, log) = train_neural(cfg, prep, horizon, horizon_seed(cfg.seed, horizon))?;
        Ok(TrainOutcome { model: TrainedModel::Neural { model, scaler: prep.scaler }, log, best_round: None })
    } else {
        let (model, rounds) = train_tree(cfg, prep)?;
        Ok(TrainOutcome { model, log: FitLog::default(), best_round: Some(rounds) })
    }
}
