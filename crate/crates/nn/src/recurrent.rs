//! Multilayer sequence-to-sequence RNN and LSTM with a recursive decoder.

use flowcast_autodiff::{Array, Graph, ParamId, ParamStore, Var};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::batch::SeqBatch;
use crate::embedding::{compose, InputMap, TimeEmbedding, ValueEmbedding, VALUE_KERNEL};
use crate::error::{NnError, Result};
use crate::model::Forecaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Rnn,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seq2SeqConfig {
    pub cell_kind: CellKind,
    pub layers: usize,
    pub hidden: usize,
    pub dropout_p: f64,
    pub time_embedding: bool,
    /// Token width fed to the first layer.
    pub d: usize,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Self { cell_kind: CellKind::Lstm, layers: 3, hidden: 512, dropout_p: 0.1, time_embedding: false, d: 512 }
    }
}

impl Seq2SeqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.d == 0 {
            return Err(NnError::Config("layers, hidden and d must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(NnError::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }
}

/// How the decoder obtains the value fed back at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Each prediction becomes the next input.
    Recursive,
    /// The ground-truth target replaces each prediction as the next input.
    Teacher,
}

const LSTM_X: [&str; 4] = ["w_ii", "w_if", "w_ic", "w_io"];
const LSTM_H: [&str; 4] = ["w_hi", "w_hf", "w_hc", "w_ho"];
const LSTM_BX: [&str; 4] = ["b_ii", "b_if", "b_ic", "b_io"];
const LSTM_BH: [&str; 4] = ["b_hi", "b_hf", "b_hc", "b_ho"];

/// Parameter ids of one layer: `[wx.., wh.., bx.., bh..]` with one block per
/// gate for the LSTM (input, forget, candidate, output) and one for the RNN.
#[derive(Debug, Clone)]
pub struct LayerParams {
    kind: CellKind,
    wx: Vec<ParamId>,
    wh: Vec<ParamId>,
    bx: Vec<ParamId>,
    bh: Vec<ParamId>,
}

impl LayerParams {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (nx, nh, nbx, nbh): (&[&str], &[&str], &[&str], &[&str]) = match kind {
            CellKind::Lstm => (&LSTM_X, &LSTM_H, &LSTM_BX, &LSTM_BH),
            CellKind::Rnn => (&["w_i"], &["w_h"], &["b_i"], &["b_h"]),
        };
        // All blocks share the 1/sqrt(hidden) bound, as is usual for recurrent cells.
        let mut add = |names: &[&str], shape: &[usize]| -> Result<Vec<ParamId>> {
            names.iter().map(|n| Ok(store.add_uniform(format!("{prefix}.{n}"), shape, hidden, rng)?)).collect()
        };
        Ok(Self {
            kind,
            wx: add(nx, &[input, hidden])?,
            wh: add(nh, &[hidden, hidden])?,
            bx: add(nbx, &[hidden])?,
            bh: add(nbh, &[hidden])?,
        })
    }

    /// Gate blocks joined into `wx: [in, G]`, `wh: [H, G]` and `b: [G]`.
    fn vars(&self, g: &mut Graph, store: &ParamStore) -> Result<LayerVars> {
        let mut join = |ids: &[ParamId], axis: usize| -> Result<Var> {
            let vs: Vec<Var> = ids.iter().map(|id| g.param(store, *id)).collect();
            Ok(if vs.len() == 1 { vs[0] } else { g.concat(&vs, axis)? })
        };
        let wx = join(&self.wx, 1)?;
        let wh = join(&self.wh, 1)?;
        let bx = join(&self.bx, 0)?;
        let bh = join(&self.bh, 0)?;
        let b = g.add(bx, bh)?;
        Ok(LayerVars { kind: self.kind, wx, wh, b, hidden: store.get(self.wh[0]).shape()[0] })
    }
}

struct LayerVars {
    kind: CellKind,
    wx: Var,
    wh: Var,
    b: Var,
    hidden: usize,
}

impl LayerVars {
    /// One step given the precomputed input product `xw = x @ wx`. Returns
    /// the hidden output and the carried state (`h` for the RNN, `[h | c]`
    /// for the LSTM).
    fn step(&self, g: &mut Graph, xw: Var, state: Option<(Var, Var)>) -> Result<(Var, Var)> {
        let mut pre = g.add(xw, self.b)?;
        if let Some((h, _)) = state {
            let hw = g.matmul(h, self.wh)?;
            pre = g.add(pre, hw)?;
        }
        match self.kind {
            CellKind::Rnn => {
                let h = g.tanh(pre)?;
                Ok((h, h))
            }
            CellKind::Lstm => {
                let st = g.lstm_cell(pre, state.map(|s| s.1))?;
                let h = g.slice(st, 1, 0, self.hidden)?;
                Ok((h, st))
            }
        }
    }
}

/// RNN update `h = tanh(W_i x + b_i + W_h h_prev + b_h)` on row-vector batches.
pub fn rnn_cell_step(g: &mut Graph, x: Var, h_prev: Var, w_i: Var, w_h: Var, b_i: Var, b_h: Var) -> Result<Var> {
    let a = g.linear(x, w_i, b_i)?;
    let c = g.linear(h_prev, w_h, b_h)?;
    let s = g.add(a, c)?;
    Ok(g.tanh(s)?)
}

/// The eight weights and eight biases of one LSTM layer, named by gate.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights {
    pub w_if: Var,
    pub w_hf: Var,
    pub w_ii: Var,
    pub w_hi: Var,
    pub w_ic: Var,
    pub w_hc: Var,
    pub w_io: Var,
    pub w_ho: Var,
    pub b_if: Var,
    pub b_hf: Var,
    pub b_ii: Var,
    pub b_hi: Var,
    pub b_ic: Var,
    pub b_hc: Var,
    pub b_io: Var,
    pub b_ho: Var,
}

/// LSTM update returning `(h, c)`: sigmoid forget, input and output gates,
/// tanh candidate, `c = f*c_prev + i*c~`, `h = o*tanh(c)`.
pub fn lstm_cell_step(g: &mut Graph, x: Var, h_prev: Var, c_prev: Var, w: &LstmWeights) -> Result<(Var, Var)> {
    let wx = g.concat(&[w.w_ii, w.w_if, w.w_ic, w.w_io], 1)?;
    let wh = g.concat(&[w.w_hi, w.w_hf, w.w_hc, w.w_ho], 1)?;
    let bx = g.concat(&[w.b_ii, w.b_if, w.b_ic, w.b_io], 0)?;
    let bh = g.concat(&[w.b_hi, w.b_hf, w.b_hc, w.b_ho], 0)?;
    let a = g.linear(x, wx, bx)?;
    let c = g.linear(h_prev, wh, bh)?;
    let pre = g.add(a, c)?;
    let hidden = g.shape(h_prev)[1];
    let prev = g.concat(&[h_prev, c_prev], 1)?;
    let st = g.lstm_cell(pre, Some(prev))?;
    let h = g.slice(st, 1, 0, hidden)?;
    let c = g.slice(st, 1, hidden, 2 * hidden)?;
    Ok((h, c))
}

#[derive(Debug, Clone)]
enum InputStage {
    Plain(InputMap),
    Embedded { value: ValueEmbedding, time: TimeEmbedding },
}

/// Encoder-decoder forecaster. Parameter names: `input.*` for input
/// construction, `enc.l{m}.*` and `dec.l{m}.*` per layer, `proj.*` for the
/// scalar readout.
#[derive(Debug, Clone)]
pub struct Seq2Seq {
    cfg: Seq2SeqConfig,
    store: ParamStore,
    input: InputStage,
    enc: Vec<LayerParams>,
    dec: Vec<LayerParams>,
    proj_w: ParamId,
    proj_b: ParamId,
}

/// Final per-layer states of the encoder plus the last input token.
pub struct Encoded {
    pub states: Vec<(Var, Var)>,
    pub last_token: Var,
}

impl Seq2Seq {
    pub fn new<R: Rng + ?Sized>(cfg: Seq2SeqConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let input = if cfg.time_embedding {
            let value = ValueEmbedding::new(&mut store, "input", cfg.d, rng)?;
            let time = TimeEmbedding::new(&mut store, "input", cfg.d, rng)?;
            InputStage::Embedded { value, time }
        } else {
            InputStage::Plain(InputMap::new(&mut store, "input", cfg.d, rng)?)
        };
        let mut enc = Vec::with_capacity(cfg.layers);
        let mut dec = Vec::with_capacity(cfg.layers);
        for side in ["enc", "dec"] {
            for m in 0..cfg.layers {
                let input_w = if m == 0 { cfg.d } else { cfg.hidden };
                let lp = LayerParams::new(&mut store, &format!("{side}.l{m}"), cfg.cell_kind, input_w, cfg.hidden, rng)?;
                if side == "enc" { enc.push(lp) } else { dec.push(lp) }
            }
        }
        let proj_w = store.add_uniform("proj.w", &[cfg.hidden, 1], cfg.hidden, rng)?;
        let proj_b = store.add_uniform("proj.b", &[1], cfg.hidden, rng)?;
        Ok(Self { cfg, store, input, enc, dec, proj_w, proj_b })
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        &self.cfg
    }

    pub fn projection(&self) -> (ParamId, ParamId) {
        (self.proj_w, self.proj_b)
    }

    /// Encoder tokens `[B, T, d]` for a batch.
    fn encoder_tokens(&self, g: &mut Graph, batch: &SeqBatch, train: bool, rng: &mut dyn RngCore) -> Result<Var> {
        let x = g.constant(batch.inputs_array());
        match &self.input {
            InputStage::Plain(map) => map.apply(g, &self.store, x),
            InputStage::Embedded { value, time } => {
                let v = value.tokens(g, &self.store, x)?;
                let f = time.embed_sum(g, &self.store, &batch.input_features, batch.size, batch.input_len)?;
                compose(g, v, Some(f), self.cfg.dropout_p, train, rng)
            }
        }
    }

    /// Runs the stacked encoder over the batch inputs.
    pub fn encode(&self, g: &mut Graph, batch: &SeqBatch, train: bool, rng: &mut dyn RngCore) -> Result<Encoded> {
        batch.validate()?;
        let (b, t) = (batch.size, batch.input_len);
        let tokens = self.encoder_tokens(g, batch, train, rng)?;
        let last = g.slice(tokens, 1, t - 1, t)?;
        let last_token = g.reshape(last, &[b, self.cfg.d])?;
        let mut seq = tokens;
        let mut states = Vec::with_capacity(self.cfg.layers);
        for (m, lp) in self.enc.iter().enumerate() {
            let lv = lp.vars(g, &self.store)?;
            let xw_all = g.matmul(seq, lv.wx)?;
            let width = g.shape(xw_all)[2];
            let top = m + 1 == self.cfg.layers;
            let mut state = None;
            let mut outs = Vec::with_capacity(if top { 0 } else { t });
            for step in 0..t {
                let xw = g.slice(xw_all, 1, step, step + 1)?;
                let xw = g.reshape(xw, &[b, width])?;
                let (h, st) = lv.step(g, xw, state)?;
                state = Some((h, st));
                if !top {
                    outs.push(g.reshape(h, &[b, 1, self.cfg.hidden])?);
                }
            }
            states.push(state.expect("at least one step"));
            if !top {
                let hs = g.concat(&outs, 1)?;
                seq = g.dropout(hs, self.cfg.dropout_p, train, rng)?;
            }
        }
        Ok(Encoded { states, last_token })
    }

    /// Recursive decoding; returns `[B, T_p]` standardized predictions.
    pub fn decode(
        &self,
        g: &mut Graph,
        enc: Encoded,
        batch: &SeqBatch,
        mode: DecodeMode,
        train: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let (b, tp, t) = (batch.size, batch.horizon, batch.input_len);
        if tp == 0 {
            return Err(NnError::Config("horizon must be at least 1".into()));
        }
        if mode == DecodeMode::Teacher && batch.targets.len() != b * tp {
            return Err(NnError::Batch("teacher decoding needs targets".into()));
        }
        let dec: Vec<LayerVars> = self.dec.iter().map(|lp| lp.vars(g, &self.store)).collect::<Result<_>>()?;
        let pw = g.param(&self.store, self.proj_w);
        let pb = g.param(&self.store, self.proj_b);
        let features = match &self.input {
            InputStage::Embedded { time, .. } if tp > 1 => {
                Some(time.embed_sum(g, &self.store, &batch.target_features, b, tp)?)
            }
            _ => None,
        };
        // Most recent values, oldest first, seeded with the encoder's tail.
        let mut history: Vec<Var> = Vec::with_capacity(VALUE_KERNEL);
        for k in (1..VALUE_KERNEL).rev() {
            let col: Vec<f64> = (0..b)
                .map(|r| if t >= k { batch.inputs[r * t + t - k] } else { 0.0 })
                .collect();
            history.push(g.constant(Array::new(vec![b, 1], col)?));
        }
        let mut states: Vec<Option<(Var, Var)>> = enc.states.into_iter().map(Some).collect();
        let mut x = enc.last_token;
        let mut preds = Vec::with_capacity(tp);
        for s in 0..tp {
            let mut h_top = x;
            for (m, lv) in dec.iter().enumerate() {
                let xw = g.matmul(x, lv.wx)?;
                let (h, st) = lv.step(g, xw, states[m])?;
                states[m] = Some((h, st));
                x = if m + 1 < dec.len() { g.dropout(h, self.cfg.dropout_p, train, rng)? } else { h };
                h_top = h;
            }
            let y = g.linear(h_top, pw, pb)?;
            preds.push(y);
            if s + 1 == tp {
                break;
            }
            let fed = match mode {
                DecodeMode::Recursive => y,
                DecodeMode::Teacher => {
                    let col: Vec<f64> = (0..b).map(|r| batch.targets[r * tp + s]).collect();
                    g.constant(Array::new(vec![b, 1], col)?)
                }
            };
            x = match &self.input {
                InputStage::Plain(map) => map.apply(g, &self.store, fed)?,
                InputStage::Embedded { value, .. } => {
                    history.push(fed);
                    if history.len() > VALUE_KERNEL {
                        history.remove(0);
                    }
                    let buf = g.concat(&history, 1)?;
                    let tok = value.token_from_buffer(g, &self.store, buf)?;
                    // Paired with the calendar features of the step it helps predict.
                    let f = g.slice(features.expect("built when horizon > 1"), 1, s + 1, s + 2)?;
                    let f = g.reshape(f, &[b, self.cfg.d])?;
                    compose(g, tok, Some(f), self.cfg.dropout_p, train, rng)?
                }
            };
        }
        Ok(g.concat(&preds, 1)?)
    }

    pub fn forward_with_mode(
        &self,
        g: &mut Graph,
        batch: &SeqBatch,
        mode: DecodeMode,
        train: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let enc = self.encode(g, batch, train, rng)?;
        self.decode(g, enc, batch, mode, train, rng)
    }
}

impl Forecaster for Seq2Seq {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, g: &mut Graph, batch: &SeqBatch, train: bool, rng: &mut dyn RngCore) -> Result<Var> {
        self.forward_with_mode(g, batch, DecodeMode::Recursive, train, rng)
    }
}
