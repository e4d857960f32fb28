use flowcast_core::{EarlyStopping, StopDecision};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GbrtError, Result};
use crate::matrix::{FeatureMatrix, SortedColumns};
use crate::objective::grad_hess_squared_loss;
use crate::split::SplitParams;
use crate::tree::{grow_tree, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub reg_lambda: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub seed: u64,
    /// Consecutive validation-loss rises that end training; 0 disables.
    pub early_stopping_rounds: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_estimators: 1000,
            learning_rate: 0.03,
            max_depth: 6,
            min_child_weight: 1.0,
            gamma: 0.1,
            reg_lambda: 0.1,
            subsample: 0.8,
            colsample_bytree: 0.8,
            seed: 0,
            early_stopping_rounds: 3,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.subsample) || !unit(self.colsample_bytree) {
            return Err(GbrtError::Config("subsample and colsample_bytree must lie in (0, 1]".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.gamma >= 0.0) || !(self.reg_lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(GbrtError::Config("learning_rate, gamma, reg_lambda and min_child_weight must be non-negative".into()));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            split: SplitParams { lambda: self.reg_lambda, gamma: self.gamma, min_child_weight: self.min_child_weight },
        }
    }
}

/// `base_score + learning_rate * sum of tree outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_features() != self.n_features {
            return Err(GbrtError::Data(format!("{} features, model expects {}", x.n_features(), self.n_features)));
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub ensemble: Ensemble,
    /// Training MSE after each round.
    pub train_loss: Vec<f64>,
    /// Validation MSE after each round; empty without validation data.
    pub val_loss: Vec<f64>,
    /// Number of trees kept.
    pub best_round: usize,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / a.len().max(1) as f64
}

/// Additive training. With validation data, stops once its loss has risen
/// for `early_stopping_rounds` consecutive rounds and keeps the best prefix.
pub fn boost(x: &FeatureMatrix, y: &[f64], val: Option<(&FeatureMatrix, &[f64])>, cfg: &BoostConfig) -> Result<BoostOutcome> {
    cfg.validate()?;
    let n = x.n_rows();
    if n == 0 || y.len() != n {
        return Err(GbrtError::Data(format!("{n} rows with {} targets", y.len())));
    }
    if let Some((vx, vy)) = val {
        if vx.n_features() != x.n_features() || vy.len() != vx.n_rows() || vy.is_empty() {
            return Err(GbrtError::Data("validation data does not match the training layout".into()));
        }
    }
    let cols = SortedColumns::new(x);
    let nf = x.n_features();
    let base = y.iter().sum::<f64>() / n as f64;
    let params = cfg.tree_params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_rows_round = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols_tree = ((cfg.colsample_bytree * nf as f64).floor() as usize).clamp(1, nf);

    let mut pred = vec![base; n];
    let mut val_pred = val.map(|(vx, _)| vec![base; vx.n_rows()]);
    let mut trees = Vec::new();
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut stopper = EarlyStopping::new(cfg.early_stopping_rounds);
    let all_rows: Vec<usize> = (0..n).collect();
    let all_cols: Vec<usize> = (0..nf).collect();
    for _ in 0..cfg.n_estimators {
        let features =
            if n_cols_tree == nf { all_cols.clone() } else { sorted(sample(&mut rng, nf, n_cols_tree).into_vec()) };
        let rows = if n_rows_round == n { all_rows.clone() } else { sorted(sample(&mut rng, n, n_rows_round).into_vec()) };
        let gh = grad_hess_squared_loss(&pred, y)?;
        let tree = grow_tree(&cols, &rows, &gh.g, &gh.h, &features, &params)?;
        for (i, p) in pred.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.predict(x.row(i));
        }
        train_loss.push(mse(&pred, y));
        trees.push(tree);
        if let (Some((vx, vy)), Some(vp)) = (val, val_pred.as_mut()) {
            let tree = trees.last().expect("just pushed");
            for (i, p) in vp.iter_mut().enumerate() {
                *p += cfg.learning_rate * tree.predict(vx.row(i));
            }
            let l = mse(vp, vy);
            val_loss.push(l);
            if stopper.observe(l) == StopDecision::Stop {
                break;
            }
        }
    }
    let best_round = if val.is_some() { stopper.best_epoch().unwrap_or(0) } else { trees.len() };
    trees.truncate(best_round);
    log::debug!("boosting kept {best_round} of {} trees", train_loss.len());
    Ok(BoostOutcome {
        ensemble: Ensemble { base_score: base, learning_rate: cfg.learning_rate, n_features: nf, trees },
        train_loss,
        val_loss,
        best_round,
    })
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}
