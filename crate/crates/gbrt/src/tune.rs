//! Random hyperparameter search scored by forward-chaining validation.

use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boost::{boost, BoostConfig};
use crate::error::{GbrtError, Result};
use crate::matrix::FeatureMatrix;

/// Sampling ranges. Continuous bounds are inclusive except the lower end
/// of `learning_rate`, which must stay positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub min_child_weight: (u32, u32),
    pub gamma: (f64, f64),
    pub subsample: (f64, f64),
    pub colsample_bytree: (f64, f64),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub reg_lambda: Vec<f64>,
    pub n_estimators: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            min_child_weight: (1, 5),
            gamma: (0.0, 0.5),
            subsample: (0.5, 1.0),
            colsample_bytree: (0.5, 1.0),
            max_depth: (3, 20),
            learning_rate: (0.0, 0.5),
            reg_lambda: vec![0.0, 0.01, 0.1, 1.0, 10.0],
            n_estimators: vec![1000, 2000],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_child_weight.0 <= self.min_child_weight.1
            && self.max_depth.0 <= self.max_depth.1
            && [self.gamma, self.subsample, self.colsample_bytree, self.learning_rate].iter().all(|r| r.0 <= r.1)
            && self.subsample.0 > 0.0
            && self.colsample_bytree.0 > 0.0
            && self.learning_rate.1 > 0.0
            && !self.reg_lambda.is_empty()
            && !self.n_estimators.is_empty();
        if ok { Ok(()) } else { Err(GbrtError::Config("inconsistent search space".into())) }
    }

    /// One configuration drawn uniformly from the space.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, base: &BoostConfig) -> BoostConfig {
        let cont = |rng: &mut R, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let mut lr = 0.0;
        while lr <= 0.0 {
            lr = cont(rng, self.learning_rate);
        }
        BoostConfig {
            min_child_weight: rng.random_range(self.min_child_weight.0..=self.min_child_weight.1) as f64,
            gamma: cont(rng, self.gamma),
            subsample: cont(rng, self.subsample),
            colsample_bytree: cont(rng, self.colsample_bytree),
            max_depth: rng.random_range(self.max_depth.0..=self.max_depth.1),
            learning_rate: lr,
            reg_lambda: *self.reg_lambda.choose(rng).expect("non-empty"),
            n_estimators: *self.n_estimators.choose(rng).expect("non-empty"),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub val: Range<usize>,
}

/// `n` rows cut into `folds + 1` contiguous blocks; fold `k` trains on
/// blocks `0..k` and validates on block `k`, so the first block is never
/// validated on.
pub fn forward_chaining_folds(n: usize, folds: usize) -> Result<Vec<Fold>> {
    if folds == 0 || n < folds + 1 {
        return Err(GbrtError::Config(format!("cannot cut {n} rows into {} blocks", folds + 1)));
    }
    let blocks = folds + 1;
    let edge = |b: usize| b * n / blocks;
    Ok((1..blocks).map(|k| Fold { train: 0..edge(k), val: edge(k)..edge(k + 1) }).collect())
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub config: BoostConfig,
    /// Mean validation MSE over folds.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct TuneReport {
    pub best: BoostConfig,
    pub trials: Vec<Trial>,
}

/// Mean validation MSE of `cfg` under forward chaining.
pub fn cross_validate(x: &FeatureMatrix, y: &[f64], folds: &[Fold], cfg: &BoostConfig) -> Result<f64> {
    let mut total = 0.0;
    for f in folds {
        if f.train.end > f.val.start {
            return Err(GbrtError::Data(format!("fold trains on rows up to {} past validation start {}", f.train.end, f.val.start)));
        }
        let (tx, vx) = (x.slice_rows(f.train.clone()), x.slice_rows(f.val.clone()));
        let (ty, vy) = (&y[f.train.clone()], &y[f.val.clone()]);
        let out = boost(&tx, ty, Some((&vx, vy)), cfg)?;
        let pred = out.ensemble.predict(&vx)?;
        total += pred.iter().zip(vy).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / vy.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

/// Scores `rounds` random configurations on chronologically ordered data
/// and returns the one with the lowest mean validation error (first wins ties).
pub fn tune_random_search(
    x: &FeatureMatrix,
    y: &[f64],
    space: &SearchSpace,
    base: &BoostConfig,
    rounds: usize,
    folds: usize,
    seed: u64,
) -> Result<TuneReport> {
    space.validate()?;
    if rounds == 0 {
        return Err(GbrtError::Config("at least one search round is required".into()));
    }
    if y.len() != x.n_rows() {
        return Err(GbrtError::Data(format!("{} rows with {} targets", x.n_rows(), y.len())));
    }
    let chain = forward_chaining_folds(x.n_rows(), folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let config = space.sample(&mut rng, base);
        let score = cross_validate(x, y, &chain, &config)?;
        log::info!("search round {r}: score {score:.6}");
        trials.push(Trial { config, score });
    }
    let best = trials
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.score.total_cmp(&b.1.score).then(a.0.cmp(&b.0)))
        .map(|(_, t)| t.config.clone())
        .expect("rounds > 0");
    Ok(TuneReport { best, trials })
}
