//! Scaled dot-product attention with ProbSparse query selection.
//!
//! Only the `u` queries with the largest max-minus-mean score against a
//! sample of keys attend over the keys. Every other query row receives the
//! mean of the values (a running mean under a causal mask).

use flowcast_autodiff::{Graph, ParamId, ParamStore, Var};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sparsity {
    /// Every query attends.
    Dense,
    /// `u = ceil(c ln L_Q)` queries, scored on `U = ceil(c ln L_K)` sampled keys.
    Sparse { c: f64 },
    /// Explicit counts, clipped to the sequence lengths. `u = 0` is allowed.
    Fixed { u: usize, samples: usize },
}

/// `ceil(c ln len)` clipped to `1..=len`.
pub fn log_count(c: f64, len: usize) -> usize {
    let n = (c * (len as f64).ln()).ceil();
    (n.max(1.0) as usize).min(len)
}

impl Sparsity {
    /// `(u, U)` for the given lengths, or `None` for dense attention.
    pub fn counts(&self, lq: usize, lk: usize) -> Option<(usize, usize)> {
        match *self {
            Sparsity::Dense => None,
            Sparsity::Sparse { c } => Some((log_count(c, lq), log_count(c, lk))),
            Sparsity::Fixed { u, samples } => Some((u.min(lq), samples.clamp(1, lk.max(1)))),
        }
    }
}

/// `n` distinct key indices drawn uniformly from `0..lk`, ascending.
pub fn sample_keys<R: Rng + ?Sized>(lk: usize, n: usize, rng: &mut R) -> Vec<usize> {
    if n >= lk {
        return (0..lk).collect();
    }
    let mut v = rand::seq::index::sample(rng, lk, n).into_vec();
    v.sort_unstable();
    v
}

/// `max_j(q.k_j/sqrt(d)) - mean_j(q.k_j/sqrt(d))` over the sampled rows of
/// `keys` (row-major, width `d`).
pub fn sparsity_measure(q: &[f64], keys: &[f64], d: usize, sample: &[usize]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &j in sample {
        let s: f64 = q.iter().zip(&keys[j * d..(j + 1) * d]).map(|(a, b)| a * b).sum::<f64>() * scale;
        max = max.max(s);
        sum += s;
    }
    max - sum / sample.len() as f64
}

/// Indices of the `u` queries with the largest measure, ascending. Each
/// query draws its own key sample; ties go to the lower index.
#[allow(clippy::too_many_arguments)]
pub fn select_queries<R: Rng + ?Sized>(
    q: &[f64],
    k: &[f64],
    lq: usize,
    lk: usize,
    d: usize,
    u: usize,
    samples: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = (0..lq)
        .map(|i| {
            let sample = sample_keys(lk, samples, rng);
            (sparsity_measure(&q[i * d..(i + 1) * d], k, d, &sample), i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut top: Vec<usize> = scored.into_iter().take(u).map(|(_, i)| i).collect();
    top.sort_unstable();
    top
}

/// Attention over `q: [N, L_Q, d]`, `k, v: [N, L_K, d]`. With `causal`,
/// query `i` only sees keys `0..=i` (requires `L_Q = L_K`).
pub fn attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    sparsity: Sparsity,
    causal: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    let (sq, sk, sv) = (g.shape(q).to_vec(), g.shape(k).to_vec(), g.shape(v).to_vec());
    if sq.len() != 3 || sk.len() != 3 || sk != sv || sq[0] != sk[0] || sq[2] != sk[2] || sq[1] == 0 || sk[1] == 0 {
        return Err(NnError::Config(format!("attention shapes q {sq:?}, k {sk:?}, v {sv:?}")));
    }
    let (n, lq, lk, d) = (sq[0], sq[1], sk[1], sq[2]);
    if causal && lq != lk {
        return Err(NnError::Config(format!("causal attention needs equal lengths, got {lq} and {lk}")));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let Some((u, samples)) = sparsity.counts(lq, lk) else {
        let s = g.bmm(q, k, false, true)?;
        let s = g.scale(s, scale)?;
        let limits: Vec<usize> = (0..lq).collect();
        let p = g.softmax_limited(s, causal.then_some(&limits[..]))?;
        return Ok(g.bmm(p, v, false, false)?);
    };
    let filler = if causal { g.cummean_rows(v)? } else { g.mean_rows(v, lq)? };
    if u == 0 {
        return Ok(filler);
    }
    let (qd, kd) = (g.value(q).data(), g.value(k).data());
    let idx: Vec<Vec<usize>> = (0..n)
        .map(|b| {
            select_queries(&qd[b * lq * d..(b + 1) * lq * d], &kd[b * lk * d..(b + 1) * lk * d], lq, lk, d, u, samples, rng)
        })
        .collect();
    let qs = g.select_rows(q, &idx)?;
    let s = g.bmm(qs, k, false, true)?;
    let s = g.scale(s, scale)?;
    let limits: Vec<usize> = idx.iter().flatten().copied().collect();
    let p = g.softmax_limited(s, causal.then_some(&limits[..]))?;
    let att = g.bmm(p, v, false, false)?;
    Ok(g.replace_rows(filler, att, &idx)?)
}

/// Per-head projections, attention, concatenation and output projection.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    d: usize,
    heads: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(NnError::Config(format!("width {d} is not divisible into {heads} heads")));
        }
        let mut lin = |name: &str| -> Result<(ParamId, ParamId)> {
            Ok((
                store.add_uniform(format!("{prefix}.w{name}"), &[d, d], d, rng)?,
                store.add_uniform(format!("{prefix}.b{name}"), &[d], d, rng)?,
            ))
        };
        let (wq, bq) = lin("q")?;
        let (wk, bk) = lin("k")?;
        let (wv, bv) = lin("v")?;
        let (wo, bo) = lin("o")?;
        Ok(Self { wq, bq, wk, bk, wv, bv, wo, bo, d, heads })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    fn split(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let dh = self.d / self.heads;
        let r = g.reshape(x, &[s[0], s[1], self.heads, dh])?;
        let t = g.transpose12(r)?;
        Ok(g.reshape(t, &[s[0] * self.heads, s[1], dh])?)
    }

    /// `xq: [B, L_Q, d]` attending over `xkv: [B, L_K, d]`.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        xq: Var,
        xkv: Var,
        sparsity: Sparsity,
        causal: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let sq = g.shape(xq).to_vec();
        let sk = g.shape(xkv).to_vec();
        if sq.len() != 3 || sk.len() != 3 || sq[2] != self.d || sk[2] != self.d || sq[0] != sk[0] {
            return Err(NnError::Config(format!("multi-head inputs {sq:?} and {sk:?} for width {}", self.d)));
        }
        let mut proj = |x: Var, w: ParamId, b: ParamId| -> Result<Var> {
            let (w, b) = (g.param(store, w), g.param(store, b));
            Ok(g.linear(x, w, b)?)
        };
        let q = proj(xq, self.wq, self.bq)?;
        let k = proj(xkv, self.wk, self.bk)?;
        let v = proj(xkv, self.wv, self.bv)?;
        let (q, k, v) = (self.split(g, q)?, self.split(g, k)?, self.split(g, v)?);
        let o = attention(g, q, k, v, sparsity, causal, rng)?;
        let dh = self.d / self.heads;
        let o = g.reshape(o, &[sq[0], self.heads, sq[1], dh])?;
        let o = g.transpose12(o)?;
        let o = g.reshape(o, &[sq[0], sq[1], self.d])?;
        let (wo, bo) = (g.param(store, self.wo), g.param(store, self.bo));
        Ok(g.linear(o, wo, bo)?)
    }
}
