//! Experiment configuration, read from TOML.
//!
//! ```toml
//! model = "lstm-t"
//! input_len = 168
//! horizons = [1, 24, 168]
//! seed = 7
//!
//! [data]
//! paths = ["flow.csv"]
//! holidays = "holidays.txt"
//! profile = "melbourne"
//! interval_minutes = 60
//!
//! [split.train]
//! start = "2017-01-01T00:00:00"
//! end = "2018-09-01T00:00:00"
//! # [split.val], [split.test] likewise
//!
//! [seq2seq]      # hidden, layers, dropout_p, d
//! [informer]     # d_model, heads, enc_layers, ...
//! [xgboost]      # n_estimators, learning_rate, max_depth, ...
//! [training]     # batch_size, lr, patience, max_epochs, window caps
//! [evaluation]   # stride, subset ranges, holidays_only
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flowcast_core::calendar::{FEATURE_NAMES, N_FEATURES};
use flowcast_core::split::DateRange;
use flowcast_core::{DatasetProfile, SplitSpec};
use flowcast_gbrt::BoostConfig;
use flowcast_nn::{CellKind, InformerConfig, Seq2SeqConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "rnn")]
    Rnn,
    #[serde(rename = "rnn-t")]
    RnnT,
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "lstm-t")]
    LstmT,
    #[serde(rename = "informer")]
    Informer,
    #[serde(rename = "informer-t")]
    InformerT,
    #[serde(rename = "xgboost-t")]
    XgboostT,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Rnn,
        ModelKind::RnnT,
        ModelKind::Lstm,
        ModelKind::LstmT,
        ModelKind::Informer,
        ModelKind::InformerT,
        ModelKind::XgboostT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rnn => "rnn",
            ModelKind::RnnT => "rnn-t",
            ModelKind::Lstm => "lstm",
            ModelKind::LstmT => "lstm-t",
            ModelKind::Informer => "informer",
            ModelKind::InformerT => "informer-t",
            ModelKind::XgboostT => "xgboost-t",
        }
    }

    /// Kinds ending in `-t` see the calendar features.
    pub fn time_embedding(self) -> bool {
        self.name().ends_with("-t")
    }

    pub fn is_neural(self) -> bool {
        self != ModelKind::XgboostT
    }

    pub fn cell_kind(self) -> Option<CellKind> {
        match self {
            ModelKind::Rnn | ModelKind::RnnT => Some(CellKind::Rnn),
            ModelKind::Lstm | ModelKind::LstmT => Some(CellKind::Lstm),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Flow CSV files, concatenated in order.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    /// Generated series; replaces `paths` when present.
    #[serde(default)]
    pub synthetic: Option<SynthConfig>,
    #[serde(default)]
    pub holidays: Option<PathBuf>,
    #[serde(default = "default_profile")]
    pub profile: DatasetProfile,
    /// Target interval after aggregation.
    #[serde(default = "default_interval")]
    pub interval_minutes: u32,
}

fn default_profile() -> DatasetProfile {
    DatasetProfile::Freeway
}

fn default_interval() -> u32 {
    60
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub max_epochs: usize,
    /// Windows drawn (without replacement) per epoch; all when unset.
    pub max_train_windows: Option<usize>,
    /// Evenly spaced validation windows; all when unset.
    pub max_val_windows: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { batch_size: 32, lr: 1e-4, patience: 3, max_epochs: 100, max_train_windows: None, max_val_windows: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Distance between consecutive test windows.
    pub stride: usize,
    /// Extra report restricted to targets inside these ranges.
    pub subset: Vec<DateRange>,
    /// Extra report restricted to targets on holiday dates.
    pub holidays_only: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { stride: 1, subset: Vec::new(), holidays_only: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Input length `T`. `xgboost-t` reads no inputs but is scored on the same windows.
    pub input_len: usize,
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default = "SplitSpec::three_year_default")]
    pub split: SplitSpec,
    /// `cell_kind` and `time_embedding` are set from `model`.
    #[serde(default)]
    pub seq2seq: Seq2SeqConfig,
    /// `time_embedding` is set from `model`.
    #[serde(default)]
    pub informer: InformerConfig,
    #[serde(default)]
    pub xgboost: BoostConfig,
    /// Calendar features withheld from `xgboost-t`, by name.
    #[serde(default)]
    pub drop_features: Vec<String>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            for p in &mut cfg.data.paths {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
            if let Some(h) = &mut cfg.data.holidays {
                if h.is_relative() {
                    *h = dir.join(&*h);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.is_neural() && self.input_len == 0 {
            return Err(BenchError::Config("input_len must be positive".into()));
        }
        if self.horizons.contains(&0) {
            return Err(BenchError::Config("horizons must be positive".into()));
        }
        if self.data.paths.is_empty() && self.data.synthetic.is_none() {
            return Err(BenchError::Config("data needs `paths` or a `synthetic` table".into()));
        }
        if self.data.interval_minutes == 0 {
            return Err(BenchError::Config("interval_minutes must be positive".into()));
        }
        let t = &self.training;
        if t.batch_size == 0 || t.max_epochs == 0 || !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(BenchError::Config("batch_size, max_epochs and lr must be positive".into()));
        }
        if t.max_train_windows == Some(0) || t.max_val_windows == Some(0) {
            return Err(BenchError::Config("window caps must be positive".into()));
        }
        if self.evaluation.stride == 0 {
            return Err(BenchError::Config("evaluation stride must be positive".into()));
        }
        self.split.validate()?;
        self.feature_mask()?;
        self.seq2seq_config().validate()?;
        self.informer_config().validate()?;
        self.xgboost.validate()?;
        Ok(())
    }

    pub fn seq2seq_config(&self) -> Seq2SeqConfig {
        Seq2SeqConfig {
            cell_kind: self.model.cell_kind().unwrap_or(self.seq2seq.cell_kind),
            time_embedding: self.model.time_embedding(),
            ..self.seq2seq
        }
    }

    pub fn informer_config(&self) -> InformerConfig {
        InformerConfig { time_embedding: self.model.time_embedding(), ..self.informer }
    }

    /// Which calendar features the tree model sees.
    pub fn feature_mask(&self) -> Result<[bool; N_FEATURES]> {
        let mut mask = [true; N_FEATURES];
        for name in &self.drop_features {
            let k = FEATURE_NAMES
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| BenchError::Config(format!("unknown feature `{name}`")))?;
            mask[k] = false;
        }
        if !mask.iter().any(|&m| m) {
            return Err(BenchError::Config("every calendar feature was dropped".into()));
        }
        Ok(mask)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
