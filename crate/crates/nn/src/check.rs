//! Finite-difference verification of a model's parameter gradients.

use flowcast_autodiff::gradcheck::relative_error;
use flowcast_autodiff::{Graph, ParamId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::SeqBatch;
use crate::error::Result;
use crate::model::Forecaster;

fn loss<M: Forecaster>(model: &M, g: &mut Graph, batch: &SeqBatch, seed: u64) -> Result<flowcast_autodiff::Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pred = model.forward(g, batch, true, &mut rng)?;
    Ok(g.mse_loss(pred, &batch.targets_array()?)?)
}

/// Largest relative error between backward and central differences of the
/// MSE loss. Every evaluation reseeds the model rng with `seed`, so dropout
/// masks and key samples repeat. At most `per_param` coordinates of each
/// parameter tensor are probed, chosen with `pick_seed`.
pub fn check_model_gradients<M: Forecaster>(
    model: &mut M,
    batch: &SeqBatch,
    seed: u64,
    h: f64,
    per_param: usize,
    pick_seed: u64,
) -> Result<f64> {
    let mut g = Graph::new();
    let out = loss(model, &mut g, batch, seed)?;
    let grads = g.backward(out)?.for_store(model.store());
    let mut pick = ChaCha8Rng::seed_from_u64(pick_seed);
    let ids: Vec<ParamId> = model.store().ids().collect();
    let mut worst: f64 = 0.0;
    for (k, id) in ids.into_iter().enumerate() {
        let n = model.store().get(id).len();
        let coords: Vec<usize> = if n <= per_param {
            (0..n).collect()
        } else {
            (0..per_param).map(|_| pick.random_range(0..n)).collect()
        };
        for j in coords {
            let analytic = grads[k].as_ref().map_or(0.0, |a| a.data()[j]);
            let orig = model.store().get(id).data()[j];
            model.store_mut().get_mut(id).data_mut()[j] = orig + h;
            let mut gp = Graph::inference();
            let lp = loss(model, &mut gp, batch, seed).map(|v| gp.scalar(v));
            model.store_mut().get_mut(id).data_mut()[j] = orig - h;
            let mut gm = Graph::inference();
            let lm = loss(model, &mut gm, batch, seed).map(|v| gm.scalar(v));
            model.store_mut().get_mut(id).data_mut()[j] = orig;
            let numeric = (lp? - lm?) / (2.0 * h);
            worst = worst.max(relative_error(analytic, numeric));
        }
    }
    Ok(worst)
}
