//! Second-order objective pieces for squared error `l = (y - y_hat)^2`.

use crate::error::{GbrtError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

/// `g = 2 (y_hat - y)`, `h = 2`.
pub fn grad_hess_squared_loss(preds: &[f64], targets: &[f64]) -> Result<GradHess> {
    if preds.len() != targets.len() {
        return Err(GbrtError::Data(format!("{} predictions for {} targets", preds.len(), targets.len())));
    }
    let g = preds.iter().zip(targets).map(|(p, y)| 2.0 * (p - y)).collect();
    Ok(GradHess { g, h: vec![2.0; preds.len()] })
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let den = h + lambda;
    if !(den > 0.0) {
        return Err(GbrtError::Denominator(den));
    }
    Ok(-g / den)
}

/// `(w*, Obj)` for a single leaf, where `Obj = -G^2 / (2 (H + lambda)) + gamma`.
pub fn leaf_weight_and_score(g: f64, h: f64, lambda: f64, gamma: f64) -> Result<(f64, f64)> {
    let w = leaf_weight(g, h, lambda)?;
    Ok((w, -0.5 * g * g / (h + lambda) + gamma))
}

/// Structure score of a tree from its per-leaf `(G, H)` sums.
pub fn structure_score(leaves: &[(f64, f64)], lambda: f64, gamma: f64) -> Result<f64> {
    let mut obj = gamma * leaves.len() as f64;
    for &(g, h) in leaves {
        let den = h + lambda;
        if !(den > 0.0) {
            return Err(GbrtError::Denominator(den));
        }
        obj -= 0.5 * g * g / den;
    }
    Ok(obj)
}

/// Loss reduction from splitting a leaf into `(gl, hl)` and `(gr, hr)`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let (g, h) = (gl + gr, hl + hr);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}
