//! Experiment harness for flow forecasters.
//!
//! An [`ExperimentConfig`] names a dataset, a split, a model kind and a
//! training recipe. [`horizon_sweep`] trains one model per forecast length,
//! scores it on stride-1 test windows and returns a [`RunReport`], which
//! [`emit_report`] writes as CSV and JSON lines.

pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod report;
pub mod sweep;
pub mod synth;
pub mod train;

pub use config::{DataConfig, EvalConfig, ExperimentConfig, ModelKind, TrainingConfig};
pub use data::{load_series, prepare, prepare_series, Encoded, Prepared};
pub use error::{BenchError, Result};
pub use evaluate::{evaluate, Evaluation, SubsetFilter};
pub use model::{NeuralModel, NeuralPredictor, Predictor, TrainedModel, TreePredictor};
pub use report::{emit_report, read_csv, read_jsonl, CsvRow, HorizonReport, HorizonTiming, RunReport, SCHEMA_VERSION};
pub use sweep::{horizon_sweep, sweep_prepared, SweepOutcome};
pub use synth::SynthConfig;
pub use train::{fit_loop, train_model, EpochRecord, FitLog, TrainOutcome};
