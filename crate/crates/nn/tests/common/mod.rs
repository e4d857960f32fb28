#![allow(dead_code)]

use flowcast_core::calendar::{FEATURE_VOCAB, N_FEATURES};
use flowcast_nn::{FeatureIndices, SeqBatch};
use rand::Rng;

pub fn random_features<R: Rng>(rng: &mut R, n: usize) -> Vec<FeatureIndices> {
    (0..n)
        .map(|_| {
            let mut f = [0usize; N_FEATURES];
            for k in 0..N_FEATURES {
                f[k] = rng.random_range(0..FEATURE_VOCAB[k]);
            }
            f
        })
        .collect()
}

pub fn random_batch<R: Rng>(rng: &mut R, size: usize, t: usize, tp: usize) -> SeqBatch {
    SeqBatch {
        size,
        input_len: t,
        horizon: tp,
        inputs: (0..size * t).map(|_| rng.random_range(-1.5..1.5)).collect(),
        input_features: random_features(rng, size * t),
        target_features: random_features(rng, size * tp),
        targets: (0..size * tp).map(|_| rng.random_range(-1.5..1.5)).collect(),
    }
}
