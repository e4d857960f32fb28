//! Encoder-decoder transformer with ProbSparse self-attention, distilling
//! between encoder layers and a one-pass generative decoder.

use flowcast_autodiff::{Array, Graph, ParamId, ParamStore, Var};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::attention::{MultiHeadAttention, Sparsity};
use crate::batch::SeqBatch;
use crate::embedding::{compose, positional_encoding, TimeEmbedding, ValueEmbedding};
use crate::error::{NnError, Result};
use crate::model::Forecaster;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderAttention {
    /// Causal full attention; earlier outputs never depend on later inputs.
    Dense,
    /// Causal ProbSparse attention with a running-mean filler. Query
    /// selection ranks all rows together, so this variant is not leak-free.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InformerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub d_ff: usize,
    pub distill: bool,
    /// Known values copied from the end of the input window into the decoder.
    pub label_len: usize,
    pub sparsity_c: f64,
    pub dropout_p: f64,
    pub time_embedding: bool,
    pub decoder_attention: DecoderAttention,
}

impl Default for InformerConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 4,
            enc_layers: 2,
            dec_layers: 1,
            d_ff: 256,
            distill: true,
            label_len: 48,
            sparsity_c: 5.0,
            dropout_p: 0.05,
            time_embedding: false,
            decoder_attention: DecoderAttention::Dense,
        }
    }
}

impl InformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(NnError::Config(format!("d_model {} is not divisible into {} heads", self.d_model, self.heads)));
        }
        if self.enc_layers == 0 || self.dec_layers == 0 || self.d_ff == 0 {
            return Err(NnError::Config("layer counts and d_ff must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(NnError::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        if !(self.sparsity_c > 0.0) {
            return Err(NnError::Config(format!("sparsity_c {} must be positive", self.sparsity_c)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, prefix: &str, d: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.add_full(format!("{prefix}.gamma"), &[d], 1.0)?,
            beta: store.add_full(format!("{prefix}.beta"), &[d], 0.0)?,
        })
    }

    fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (ga, be) = (g.param(store, self.gamma), g.param(store, self.beta));
        Ok(g.layer_norm(x, ga, be, LN_EPS)?)
    }
}

#[derive(Debug, Clone)]
struct FeedForward {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl FeedForward {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, d_ff: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            w1: store.add_uniform(format!("{prefix}.w1"), &[d, d_ff], d, rng)?,
            b1: store.add_uniform(format!("{prefix}.b1"), &[d_ff], d, rng)?,
            w2: store.add_uniform(format!("{prefix}.w2"), &[d_ff, d], d_ff, rng)?,
            b2: store.add_uniform(format!("{prefix}.b2"), &[d], d_ff, rng)?,
        })
    }

    fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (w1, b1, w2, b2) =
            (g.param(store, self.w1), g.param(store, self.b1), g.param(store, self.w2), g.param(store, self.b2));
        let h = g.linear(x, w1, b1)?;
        let h = g.gelu(h)?;
        Ok(g.linear(h, w2, b2)?)
    }
}

/// Causal width-3 convolution, ELU, then max-pooling with stride 2: a
/// `[B, L, d]` sequence becomes `[B, ceil(L/2), d]`.
#[derive(Debug, Clone)]
pub struct Distill {
    w: ParamId,
    b: ParamId,
}

impl Distill {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            w: store.add_uniform(format!("{prefix}.w"), &[3, d, d], 3 * d, rng)?,
            b: store.add_uniform(format!("{prefix}.b"), &[d], 3 * d, rng)?,
        })
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let len = g.shape(x).get(1).copied().unwrap_or(0);
        if len < 2 {
            return Err(NnError::Config(format!("distilling needs at least 2 steps, got {len}")));
        }
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        let c = g.conv1d(x, w, Some(b), 1, 2, 0)?;
        let a = g.elu(c)?;
        Ok(g.maxpool1d(a, 3, 2, 1)?)
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    attn: MultiHeadAttention,
    norm1: Norm,
    ff: FeedForward,
    norm2: Norm,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    norm1: Norm,
    cross_attn: MultiHeadAttention,
    norm2: Norm,
    ff: FeedForward,
    norm3: Norm,
}

#[derive(Debug, Clone)]
struct Embedder {
    value: ValueEmbedding,
    time: Option<TimeEmbedding>,
}

impl Embedder {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, time: bool, rng: &mut R) -> Result<Self> {
        let value = ValueEmbedding::new(store, prefix, d, rng)?;
        let time = if time { Some(TimeEmbedding::new(store, prefix, d, rng)?) } else { None };
        Ok(Self { value, time })
    }
}

/// ProbSparse encoder-decoder forecaster. Parameter names: `enc_embed.*`,
/// `dec_embed.*`, `enc.l{m}.*`, `enc.distill{m}.*`, `enc.norm.*`,
/// `dec.l{m}.*`, `dec.norm.*`, `proj.*`.
#[derive(Debug, Clone)]
pub struct Informer {
    cfg: InformerConfig,
    store: ParamStore,
    enc_embed: Embedder,
    dec_embed: Embedder,
    enc: Vec<EncoderLayer>,
    distill: Vec<Distill>,
    enc_norm: Norm,
    dec: Vec<DecoderLayer>,
    dec_norm: Norm,
    proj_w: ParamId,
    proj_b: ParamId,
}

impl Informer {
    pub fn new<R: Rng + ?Sized>(cfg: InformerConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let mut store = ParamStore::new();
        let enc_embed = Embedder::new(&mut store, "enc_embed", d, cfg.time_embedding, rng)?;
        let dec_embed = Embedder::new(&mut store, "dec_embed", d, cfg.time_embedding, rng)?;
        let mut enc = Vec::new();
        let mut distill = Vec::new();
        for m in 0..cfg.enc_layers {
            let p = format!("enc.l{m}");
            enc.push(EncoderLayer {
                attn: MultiHeadAttention::new(&mut store, &format!("{p}.attn"), d, cfg.heads, rng)?,
                norm1: Norm::new(&mut store, &format!("{p}.norm1"), d)?,
                ff: FeedForward::new(&mut store, &format!("{p}.ff"), d, cfg.d_ff, rng)?,
                norm2: Norm::new(&mut store, &format!("{p}.norm2"), d)?,
            });
            if cfg.distill && m + 1 < cfg.enc_layers {
                distill.push(Distill::new(&mut store, &format!("enc.distill{m}"), d, rng)?);
            }
        }
        let enc_norm = Norm::new(&mut store, "enc.norm", d)?;
        let mut dec = Vec::new();
        for m in 0..cfg.dec_layers {
            let p = format!("dec.l{m}");
            dec.push(DecoderLayer {
                self_attn: MultiHeadAttention::new(&mut store, &format!("{p}.self_attn"), d, cfg.heads, rng)?,
                norm1: Norm::new(&mut store, &format!("{p}.norm1"), d)?,
                cross_attn: MultiHeadAttention::new(&mut store, &format!("{p}.cross_attn"), d, cfg.heads, rng)?,
                norm2: Norm::new(&mut store, &format!("{p}.norm2"), d)?,
                ff: FeedForward::new(&mut store, &format!("{p}.ff"), d, cfg.d_ff, rng)?,
                norm3: Norm::new(&mut store, &format!("{p}.norm3"), d)?,
            });
        }
        let dec_norm = Norm::new(&mut store, "dec.norm", d)?;
        let proj_w = store.add_uniform("proj.w", &[d, 1], d, rng)?;
        let proj_b = store.add_uniform("proj.b", &[1], d, rng)?;
        Ok(Self { cfg, store, enc_embed, dec_embed, enc, distill, enc_norm, dec, dec_norm, proj_w, proj_b })
    }

    pub fn config(&self) -> &InformerConfig {
        &self.cfg
    }

    #[allow(clippy::too_many_arguments)]
    fn tokens(
        &self,
        g: &mut Graph,
        emb: &Embedder,
        x: Var,
        feats: &[crate::batch::FeatureIndices],
        b: usize,
        len: usize,
        train: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let v = emb.value.tokens(g, &self.store, x)?;
        let pe = g.constant(positional_encoding(len, self.cfg.d_model));
        let v = g.add(v, pe)?;
        let f = match &emb.time {
            Some(t) => Some(t.embed_sum(g, &self.store, feats, b, len)?),
            None => None,
        };
        compose(g, v, f, self.cfg.dropout_p, train, rng)
    }

    /// Encoder output `[B, L', d]`.
    pub fn encode(&self, g: &mut Graph, batch: &SeqBatch, train: bool, rng: &mut dyn RngCore) -> Result<Var> {
        let (b, t) = (batch.size, batch.input_len);
        let inputs = g.constant(batch.inputs_array());
        let mut x = self.tokens(g, &self.enc_embed, inputs, &batch.input_features, b, t, train, rng)?;
        let sparse = Sparsity::Sparse { c: self.cfg.sparsity_c };
        let p = self.cfg.dropout_p;
        for (m, layer) in self.enc.iter().enumerate() {
            let a = layer.attn.forward(g, &self.store, x, x, sparse, false, rng)?;
            let a = g.dropout(a, p, train, rng)?;
            let r = g.add(x, a)?;
            x = layer.norm1.apply(g, &self.store, r)?;
            let f = layer.ff.apply(g, &self.store, x)?;
            let f = g.dropout(f, p, train, rng)?;
            let r = g.add(x, f)?;
            x = layer.norm2.apply(g, &self.store, r)?;
            if let Some(d) = self.distill.get(m) {
                x = d.apply(g, &self.store, x)?;
            }
        }
        self.enc_norm.apply(g, &self.store, x)
    }

    /// Decoder values: the last `label_len` inputs followed by `T_p` zeros.
    pub fn decoder_values(&self, batch: &SeqBatch) -> Result<Array> {
        let (b, t, tp, lab) = (batch.size, batch.input_len, batch.horizon, self.cfg.label_len);
        if lab > t {
            return Err(NnError::Config(format!("label length {lab} exceeds input length {t}")));
        }
        let len = lab + tp;
        let mut vals = vec![0.0; b * len];
        for r in 0..b {
            vals[r * len..r * len + lab].copy_from_slice(&batch.inputs[r * t + t - lab..(r + 1) * t]);
        }
        Ok(Array::new(vec![b, len, 1], vals)?)
    }

    /// Projected decoder outputs `[B, label + T_p]` for decoder values
    /// `[B, label + T_p, 1]`, before the label span is dropped.
    pub fn decoder_outputs(
        &self,
        g: &mut Graph,
        batch: &SeqBatch,
        dec_values: Var,
        train: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        batch.validate()?;
        let (b, t, tp, lab) = (batch.size, batch.input_len, batch.horizon, self.cfg.label_len);
        if lab > t {
            return Err(NnError::Config(format!("label length {lab} exceeds input length {t}")));
        }
        let len = lab + tp;
        if g.shape(dec_values) != [b, len, 1] {
            return Err(NnError::Batch(format!("decoder values {:?}, expected [{b}, {len}, 1]", g.shape(dec_values))));
        }
        let memory = self.encode(g, batch, train, rng)?;
        let mut feats = Vec::with_capacity(b * len);
        for r in 0..b {
            feats.extend_from_slice(&batch.input_features[r * t + t - lab..(r + 1) * t]);
            feats.extend_from_slice(&batch.target_features[r * tp..(r + 1) * tp]);
        }
        let mut y = self.tokens(g, &self.dec_embed, dec_values, &feats, b, len, train, rng)?;
        let self_sparsity = match self.cfg.decoder_attention {
            DecoderAttention::Dense => Sparsity::Dense,
            DecoderAttention::Sparse => Sparsity::Sparse { c: self.cfg.sparsity_c },
        };
        let p = self.cfg.dropout_p;
        for layer in &self.dec {
            let a = layer.self_attn.forward(g, &self.store, y, y, self_sparsity, true, rng)?;
            let a = g.dropout(a, p, train, rng)?;
            let r = g.add(y, a)?;
            y = layer.norm1.apply(g, &self.store, r)?;
            let c = layer.cross_attn.forward(g, &self.store, y, memory, Sparsity::Dense, false, rng)?;
            let c = g.dropout(c, p, train, rng)?;
            let r = g.add(y, c)?;
            y = layer.norm2.apply(g, &self.store, r)?;
            let f = layer.ff.apply(g, &self.store, y)?;
            let f = g.dropout(f, p, train, rng)?;
            let r = g.add(y, f)?;
            y = layer.norm3.apply(g, &self.store, r)?;
        }
        let y = self.dec_norm.apply(g, &self.store, y)?;
        let (w, bias) = (g.param(&self.store, self.proj_w), g.param(&self.store, self.proj_b));
        let out = g.linear(y, w, bias)?;
        Ok(g.reshape(out, &[b, len])?)
    }
}

impl Forecaster for Informer {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, g: &mut Graph, batch: &SeqBatch, train: bool, rng: &mut dyn RngCore) -> Result<Var> {
        let dv = self.decoder_values(batch)?;
        let dv = g.constant(dv);
        let out = self.decoder_outputs(g, batch, dv, train, rng)?;
        let len = self.cfg.label_len + batch.horizon;
        Ok(g.slice(out, 1, self.cfg.label_len, len)?)
    }
}
