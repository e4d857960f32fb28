//! Horizon sweeps: one model trained and scored per forecast length.

use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::data::{prepare, Prepared};
use crate::error::{BenchError, Result};
use crate::evaluate::{evaluate, Evaluation, SubsetFilter};
use crate::model::TrainedModel;
use crate::report::{HorizonReport, HorizonTiming, RunReport, SCHEMA_VERSION};
use crate::train::{horizon_seed, train_model, TrainOutcome};

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: RunReport,
    pub timings: Vec<HorizonTiming>,
}

pub fn subset_filter(cfg: &ExperimentConfig) -> Option<SubsetFilter> {
    let f = SubsetFilter { ranges: cfg.evaluation.subset.clone(), holidays: cfg.evaluation.holidays_only };
    (!f.is_empty()).then_some(f)
}

/// Scores a trained model on the test split. The tree model ignores its
/// input window but is scored on the same `(T, T_p)` layout, so every model
/// kind sees the same target pairs.
pub fn evaluate_model(cfg: &ExperimentConfig, prep: &Prepared, model: &TrainedModel, horizon: usize) -> Result<Evaluation> {
    let mut predictor = model.predictor(&prep.test, horizon_seed(cfg.seed, horizon) ^ 0xe7a1)?;
    evaluate(
        predictor.as_mut(),
        &prep.test,
        cfg.input_len,
        horizon,
        cfg.evaluation.stride,
        subset_filter(cfg).as_ref(),
    )
}

/// Trains and scores `horizons` (sorted, duplicates dropped) on loaded data.
pub fn sweep_prepared(cfg: &ExperimentConfig, prep: &Prepared, horizons: &[usize]) -> Result<SweepOutcome> {
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    if hs.contains(&0) {
        return Err(BenchError::Config("horizons must be positive".into()));
    }
    let mut cfg = cfg.clone();
    cfg.horizons = hs.clone();
    cfg.validate()?;
    let mut rows = Vec::with_capacity(hs.len());
    let mut timings = Vec::with_capacity(hs.len());
    // The tree model does not depend on the horizon, so it is fitted once.
    let mut shared: Option<(TrainOutcome, f64)> = None;
    for &h in &hs {
        let t0 = Instant::now();
        let (outcome, train_secs) = match &shared {
            Some((o, secs)) => (o.clone(), *secs),
            None => {
                let o = train_model(&cfg, prep, h)?;
                let secs = t0.elapsed().as_secs_f64();
                if !cfg.model.is_neural() {
                    shared = Some((o.clone(), secs));
                }
                (o, secs)
            }
        };
        let t1 = Instant::now();
        let eval = evaluate_model(&cfg, prep, &outcome.model, h)?;
        let inference_secs = t1.elapsed().as_secs_f64();
        log::info!("{} T_p={h}: GEH {:.4} over {} windows", cfg.model, eval.overall.geh_mean, eval.windows);
        rows.push(HorizonReport {
            horizon: h,
            windows: eval.windows,
            metrics: eval.overall,
            subset: eval.subset,
            best_epoch: cfg.model.is_neural().then_some(outcome.log.best_epoch),
            epochs: outcome.log.epochs,
            best_round: outcome.best_round,
        });
        timings.push(HorizonTiming { horizon: h, train_secs, inference_secs });
    }
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        model: cfg.model,
        input_len: cfg.input_len,
        seed: cfg.seed,
        horizons: rows,
    };
    Ok(SweepOutcome { report, timings })
}

pub fn horizon_sweep(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<SweepOutcome> {
    let prep = prepare(cfg)?;
    sweep_prepared(cfg, &prep, horizons)
}
