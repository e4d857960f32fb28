//! Neural forecasters: recurrent encoder-decoders and a ProbSparse
//! transformer, all built on the reverse-mode graph.

pub mod attention;
pub mod batch;
pub mod check;
pub mod embedding;
pub mod error;
pub mod informer;
pub mod model;
pub mod recurrent;

pub use attention::{attention, MultiHeadAttention, Sparsity};
pub use batch::{FeatureIndices, SeqBatch};
pub use embedding::{positional_encoding, InputMap, TimeEmbedding, ValueEmbedding};
pub use error::{NnError, Result};
pub use informer::{DecoderAttention, Distill, Informer, InformerConfig};
pub use model::Forecaster;
pub use recurrent::{CellKind, DecodeMode, Seq2Seq, Seq2SeqConfig};
