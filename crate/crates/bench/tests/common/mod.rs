#![allow(dead_code)]

use flowcast_bench::data::Encoded;
use flowcast_bench::{ExperimentConfig, Predictor, Result};

/// Eight synthetic weeks split 5/1/2, with a small model and short training.
pub fn tiny(model: &str) -> ExperimentConfig {
    let text = format!(
        r#"
model = "{model}"
input_len = 24
horizons = [6]
seed = 11

[data.synthetic]
days = 56
seed = 3

[split.train]
start = "2017-01-01T00:00:00"
end = "2017-02-05T00:00:00"
[split.val]
start = "2017-02-05T00:00:00"
end = "2017-02-12T00:00:00"
[split.test]
start = "2017-02-12T00:00:00"
end = "2017-02-26T00:00:00"

[seq2seq]
layers = 1
hidden = 8
d = 8
[informer]
d_model = 8
heads = 2
enc_layers = 1
d_ff = 16
label_len = 12
[xgboost]
n_estimators = 40
learning_rate = 0.3
[training]
lr = 0.003
max_epochs = 2
max_train_windows = 64
max_val_windows = 32
"#
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

/// Returns the truth for every target.
pub struct Oracle;

impl Predictor for Oracle {
    fn predict(&mut self, data: &Encoded, starts: &[usize], input_len: usize, horizon: usize) -> Result<Vec<f64>> {
        Ok(starts.iter().flat_map(|&s| data.raw[s + input_len..s + input_len + horizon].to_vec()).collect())
    }
}

/// Emits one value everywhere.
pub struct Constant(pub f64);

impl Predictor for Constant {
    fn predict(&mut self, _: &Encoded, starts: &[usize], _: usize, horizon: usize) -> Result<Vec<f64>> {
        Ok(vec![self.0; starts.len() * horizon])
    }
}
