//! Input construction: convolutional value tokens, calendar entity
//! embeddings and sinusoidal positions.

use flowcast_autodiff::{Array, Graph, ParamId, ParamStore, Var};
use flowcast_core::calendar::{FEATURE_NAMES, FEATURE_VOCAB, N_FEATURES};
use rand::{Rng, RngCore};

use crate::batch::FeatureIndices;
use crate::error::{NnError, Result};

pub const VALUE_KERNEL: usize = 3;

/// One learnable `[vocab, d]` table per calendar feature. Looking up a row
/// equals multiplying its one-hot vector by the table.
#[derive(Debug, Clone)]
pub struct TimeEmbedding {
    tables: [ParamId; N_FEATURES],
    d: usize,
}

impl TimeEmbedding {
    /// Tables named `{prefix}.time.{feature}`, drawn from the standard normal.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut R) -> Result<Self> {
        let mut tables = Vec::with_capacity(N_FEATURES);
        for k in 0..N_FEATURES {
            tables.push(store.add_normal(format!("{prefix}.time.{}", FEATURE_NAMES[k]), &[FEATURE_VOCAB[k], d], rng)?);
        }
        Ok(Self { tables: tables.try_into().expect("seven tables"), d })
    }

    pub fn width(&self) -> usize {
        self.d
    }

    pub fn table(&self, k: usize) -> ParamId {
        self.tables[k]
    }

    /// Seven `[n, d]` blocks, block `k` holding the rows of table `k`
    /// selected by feature `k` of each entry of `feats`.
    pub fn entity_embed(&self, g: &mut Graph, store: &ParamStore, feats: &[FeatureIndices]) -> Result<[Var; N_FEATURES]> {
        let mut out = Vec::with_capacity(N_FEATURES);
        for k in 0..N_FEATURES {
            let idx: Vec<usize> = feats.iter().map(|f| f[k]).collect();
            let table = g.param(store, self.tables[k]);
            out.push(g.gather_rows(table, &idx)?);
        }
        Ok(out.try_into().expect("seven blocks"))
    }

    /// The sum of the seven feature vectors, shaped `[batch, len, d]`.
    pub fn embed_sum(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        feats: &[FeatureIndices],
        batch: usize,
        len: usize,
    ) -> Result<Var> {
        if feats.len() != batch * len {
            return Err(NnError::Batch(format!("{} feature rows for [{batch}, {len}]", feats.len())));
        }
        let parts = self.entity_embed(g, store, feats)?;
        let mut acc = parts[0];
        for p in &parts[1..] {
            acc = g.add(acc, *p)?;
        }
        Ok(g.reshape(acc, &[batch, len, self.d])?)
    }
}

/// `d` causal convolution filters of width 3 over a scalar sequence.
#[derive(Debug, Clone)]
pub struct ValueEmbedding {
    w: ParamId,
    b: ParamId,
    d: usize,
}

impl ValueEmbedding {
    /// Weight `{prefix}.value.w: [3, 1, d]` and a zero bias `{prefix}.value.b`.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut R) -> Result<Self> {
        let w = store.add_uniform(format!("{prefix}.value.w"), &[VALUE_KERNEL, 1, d], VALUE_KERNEL, rng)?;
        let b = store.add_full(format!("{prefix}.value.b"), &[d], 0.0)?;
        Ok(Self { w, b, d })
    }

    pub fn width(&self) -> usize {
        self.d
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    /// `x: [B, L, 1]` to `[B, L, d]`; step `t` sees `x[t-2..=t]`, zeros before the start.
    pub fn tokens(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        Ok(g.conv1d(x, w, Some(b), 1, VALUE_KERNEL - 1, 0)?)
    }

    /// The token for the newest entry of a `[B, 3]` buffer ordered oldest first.
    pub fn token_from_buffer(&self, g: &mut Graph, store: &ParamStore, buf: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let w = g.reshape(w, &[VALUE_KERNEL, self.d])?;
        let b = g.param(store, self.b);
        Ok(g.linear(buf, w, b)?)
    }
}

/// Learned lift of a raw scalar to width `d`, used when time embedding is off.
#[derive(Debug, Clone)]
pub struct InputMap {
    w: ParamId,
    b: ParamId,
}

impl InputMap {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut R) -> Result<Self> {
        let w = store.add_uniform(format!("{prefix}.map.w"), &[1, d], 1, rng)?;
        let b = store.add_uniform(format!("{prefix}.map.b"), &[d], 1, rng)?;
        Ok(Self { w, b })
    }

    /// `x: [.., 1]` to `[.., d]`.
    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        Ok(g.linear(x, w, b)?)
    }
}

/// Value tokens plus summed feature vectors, followed by dropout.
pub fn compose(
    g: &mut Graph,
    value_tokens: Var,
    feature_sum: Option<Var>,
    p: f64,
    train: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    let x = match feature_sum {
        Some(f) => g.add(value_tokens, f)?,
        None => value_tokens,
    };
    Ok(g.dropout(x, p, train, rng)?)
}

/// Fixed sinusoidal position codes, `[len, d]`.
pub fn positional_encoding(len: usize, d: usize) -> Array {
    let mut data = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as f64 / d as f64;
            let angle = pos as f64 / 10_000f64.powf(exponent);
            data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Array::new(vec![len, d], data).expect("consistent shape")
}
