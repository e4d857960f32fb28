//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node holding its forward value. `backward` walks the
//! tape from the loss towards the leaves, visiting each node once.

use std::collections::HashMap;

use rand::Rng;

use crate::array::Array;
use crate::error::{shape_err, AutodiffError, Result};
use crate::gemm::{gemm, View};
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Unary {
    Tanh,
    Sigmoid,
    Relu,
    Elu,
    Gelu,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, w: Var },
    Bmm { a: Var, b: Var, ta: bool, tb: bool },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, s: f64 },
    Unary { a: Var, kind: Unary },
    Softmax { a: Var },
    Conv1d { x: Var, w: Var, b: Option<Var>, cols: Vec<f64>, stride: usize, pad_left: usize },
    Dropout { a: Var, mask: Vec<f64> },
    Mse { a: Var, target: Vec<f64> },
    Concat { parts: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    Reshape { a: Var },
    Transpose12 { a: Var },
    Sum { a: Var },
    Mean { a: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    MaxPool { a: Var, argmax: Vec<usize> },
    Gather { table: Var, idx: Vec<usize> },
    SelectRows { a: Var, idx: Vec<Vec<usize>> },
    ReplaceRows { base: Var, src: Var, idx: Vec<Vec<usize>> },
    MeanRows { a: Var },
    CumMeanRows { a: Var },
    LstmCell { gates: Var, prev: Option<Var>, act: Vec<f64>, tanh_c: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
}

/// A computation tape. Build one per forward pass.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    grad_enabled: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar with respect to the leaves of a graph.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
    params: HashMap<ParamId, Var>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Array> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Array> {
        self.params.get(&id).and_then(|v| self.wrt(*v))
    }

    /// Gradient per parameter of `store`, `None` where the loss did not depend on it.
    pub fn for_store(mut self, store: &ParamStore) -> Vec<Option<Array>> {
        store
            .ids()
            .map(|id| self.params.get(&id).and_then(|v| self.grads[v.0].take()))
            .collect()
    }
}

fn suffix_of(b: &[usize], a: &[usize]) -> bool {
    b.len() <= a.len() && a[a.len() - b.len()..] == *b
}

/// `(outer, axis_len, inner)` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: HashMap::new(), grad_enabled: true }
    }

    /// A graph that records no gradient information.
    pub fn inference() -> Self {
        Self { grad_enabled: false, ..Self::new() }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, a: Array) -> Var {
        self.nodes.push(Node { value: a, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is reported by `backward`.
    pub fn input(&mut self, a: Array) -> Var {
        let rg = self.grad_enabled;
        self.nodes.push(Node { value: a, op: Op::Leaf, requires_grad: rg });
        Var(self.nodes.len() - 1)
    }

    /// The graph leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        let v = self.input(store.get(id).clone());
        self.params.insert(id, v);
        v
    }

    pub fn param_named(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let id = store.require(name)?;
        Ok(self.param(store, id))
    }

    fn needs(&self, vars: &[Var]) -> bool {
        self.grad_enabled && vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn push(&mut self, name: &'static str, value: Array, op: Op, rg: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(AutodiffError::NonFinite { op: name });
        }
        let op = if rg { op } else { Op::Leaf };
        self.nodes.push(Node { value, op, requires_grad: rg });
        Ok(Var(self.nodes.len() - 1))
    }

    /// `a @ w` with `a: [.., k]` and `w: [k, n]`.
    pub fn matmul(&mut self, a: Var, w: Var) -> Result<Var> {
        let (sa, sw) = (self.shape(a), self.shape(w));
        if sw.len() != 2 || sa.is_empty() || sa[sa.len() - 1] != sw[0] {
            return Err(shape_err("matmul", format!("{sa:?} x {sw:?}")));
        }
        let (k, n) = (sw[0], sw[1]);
        let m = self.value(a).len() / k.max(1);
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(n);
        let mut out = vec![0.0; m * n];
        gemm(
            self.value(a).data(),
            View::stored(m, k, false),
            self.value(w).data(),
            View::stored(k, n, false),
            &mut out,
            View::stored(m, n, false),
            0.0,
        );
        let rg = self.needs(&[a, w]);
        self.push("matmul", Array::from_parts(shape, out), Op::MatMul { a, w }, rg)
    }

    /// `a @ w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add(y, b)
    }

    /// Batched product over matching leading dims; `ta`/`tb` transpose the
    /// last two axes of the operand.
    pub fn bmm(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() < 3 || sa.len() != sb.len() || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(shape_err("bmm", format!("{sa:?} x {sb:?}")));
        }
        let r = sa.len();
        let av = View::stored(sa[r - 2], sa[r - 1], ta);
        let bv = View::stored(sb[r - 2], sb[r - 1], tb);
        if av.cols != bv.rows {
            return Err(shape_err("bmm", format!("{sa:?} (t={ta}) x {sb:?} (t={tb})")));
        }
        let batch: usize = sa[..r - 2].iter().product();
        let (m, n) = (av.rows, bv.cols);
        let (asz, bsz, csz) = (sa[r - 2] * sa[r - 1], sb[r - 2] * sb[r - 1], m * n);
        let mut out = vec![0.0; batch * csz];
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            gemm(
                &ad[i * asz..(i + 1) * asz],
                av,
                &bd[i * bsz..(i + 1) * bsz],
                bv,
                &mut out[i * csz..(i + 1) * csz],
                View::stored(m, n, false),
                0.0,
            );
        }
        let mut shape = sa[..r - 2].to_vec();
        shape.extend([m, n]);
        let rg = self.needs(&[a, b]);
        self.push("bmm", Array::from_parts(shape, out), Op::Bmm { a, b, ta, tb }, rg)
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if !suffix_of(self.shape(b), self.shape(a)) {
            return Err(shape_err(op, format!("{:?} with {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_bcast(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Array {
        let (av, bv) = (self.value(a), self.value(b));
        let bd = bv.data();
        let p = bd.len().max(1);
        let data = av.data().iter().enumerate().map(|(i, &x)| f(x, bd[i % p])).collect();
        Array::from_parts(av.shape().to_vec(), data)
    }

    /// Elementwise sum; `b` may have a suffix of `a`'s shape and is repeated.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("add", a, b)?;
        let v = self.zip_bcast(a, b, |x, y| x + y);
        let rg = self.needs(&[a, b]);
        self.push("add", v, Op::Add { a, b }, rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("sub", a, b)?;
        let v = self.zip_bcast(a, b, |x, y| x - y);
        let rg = self.needs(&[a, b]);
        self.push("sub", v, Op::Sub { a, b }, rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("mul", a, b)?;
        let v = self.zip_bcast(a, b, |x, y| x * y);
        let rg = self.needs(&[a, b]);
        self.push("mul", v, Op::Mul { a, b }, rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let av = self.value(a);
        let v = Array::from_parts(av.shape().to_vec(), av.data().iter().map(|x| x * s).collect());
        let rg = self.needs(&[a]);
        self.push("scale", v, Op::Scale { a, s }, rg)
    }

    fn unary(&mut self, name: &'static str, a: Var, kind: Unary) -> Result<Var> {
        let f: fn(f64) -> f64 = match kind {
            Unary::Tanh => f64::tanh,
            Unary::Sigmoid => |x| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            },
            Unary::Relu => |x| x.max(0.0),
            Unary::Elu => |x| if x > 0.0 { x } else { x.exp_m1() },
            Unary::Gelu => |x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
        };
        let av = self.value(a);
        let v = Array::from_parts(av.shape().to_vec(), av.data().iter().map(|&x| f(x)).collect());
        let rg = self.needs(&[a]);
        self.push(name, v, Op::Unary { a, kind }, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, Unary::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, Unary::Relu)
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        self.unary("elu", a, Unary::Elu)
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.unary("gelu", a, Unary::Gelu)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.softmax_limited(a, None)
    }

    /// Softmax over the last axis where row `r` only sees columns
    /// `0..=limits[r % limits.len()]`. Hidden columns get probability 0.
    pub fn softmax_limited(&mut self, a: Var, limits: Option<&[usize]>) -> Result<Var> {
        let av = self.value(a);
        let shape = av.shape().to_vec();
        if shape.is_empty() || shape[shape.len() - 1] == 0 {
            return Err(shape_err("softmax", format!("{shape:?}")));
        }
        if limits.is_some_and(<[usize]>::is_empty) {
            return Err(shape_err("softmax", "empty limit list"));
        }
        let cols = shape[shape.len() - 1];
        let mut out = vec![0.0; av.len()];
        for (r, (row, orow)) in av.data().chunks(cols).zip(out.chunks_mut(cols)).enumerate() {
            let lim = limits.map_or(cols, |l| (l[r % l.len()] + 1).min(cols));
            let m = row[..lim].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for j in 0..lim {
                orow[j] = (row[j] - m).exp();
                s += orow[j];
            }
            for o in &mut orow[..lim] {
                *o /= s;
            }
        }
        let rg = self.needs(&[a]);
        self.push("softmax", Array::from_parts(shape, out), Op::Softmax { a }, rg)
    }

    /// 1-D convolution on channels-last input `x: [B, L, Cin]` with
    /// `w: [K, Cin, Cout]` and optional bias `[Cout]`. Output position `o`
    /// reads input positions `o*stride - pad_left + k` (zeros outside).
    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad_left: usize,
        pad_right: usize,
    ) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 3 || sw.len() != 3 || sx[2] != sw[1] || stride == 0 {
            return Err(shape_err("conv1d", format!("input {sx:?}, weight {sw:?}, stride {stride}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [sw[2]] {
                return Err(shape_err("conv1d", format!("bias {:?} for {} channels", self.shape(b), sw[2])));
            }
        }
        let (bsz, l, cin) = (sx[0], sx[1], sx[2]);
        let (k, cout) = (sw[0], sw[2]);
        let padded = l + pad_left + pad_right;
        if padded < k {
            return Err(shape_err("conv1d", format!("length {l} with padding is shorter than kernel {k}")));
        }
        let lout = (padded - k) / stride + 1;
        let kc = k * cin;
        let xd = self.value(x).data();
        let mut cols = vec![0.0; bsz * lout * kc];
        for bi in 0..bsz {
            for o in 0..lout {
                let row = &mut cols[(bi * lout + o) * kc..(bi * lout + o + 1) * kc];
                for kk in 0..k {
                    let pos = (o * stride + kk) as isize - pad_left as isize;
                    if pos >= 0 && (pos as usize) < l {
                        let src = (bi * l + pos as usize) * cin;
                        row[kk * cin..(kk + 1) * cin].copy_from_slice(&xd[src..src + cin]);
                    }
                }
            }
        }
        let rows = bsz * lout;
        let mut out = vec![0.0; rows * cout];
        gemm(
            &cols,
            View::stored(rows, kc, false),
            self.value(w).data(),
            View::stored(kc, cout, false),
            &mut out,
            View::stored(rows, cout, false),
            0.0,
        );
        if let Some(b) = b {
            let bd = self.value(b).data();
            for row in out.chunks_mut(cout) {
                for (o, bv) in row.iter_mut().zip(bd) {
                    *o += bv;
                }
            }
        }
        let mut parents = vec![x, w];
        parents.extend(b);
        let rg = self.needs(&parents);
        let cols = if rg { cols } else { Vec::new() };
        self.push(
            "conv1d",
            Array::from_parts(vec![bsz, lout, cout], out),
            Op::Conv1d { x, w, b, cols, stride, pad_left },
            rg,
        )
    }

    /// Inverted dropout. Identity when `train` is false or `p` is 0.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::Invalid(format!("dropout probability {p} outside [0, 1)")));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let av = self.value(a);
        let mask: Vec<f64> = (0..av.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let v = Array::from_parts(
            av.shape().to_vec(),
            av.data().iter().zip(&mask).map(|(x, m)| x * m).collect(),
        );
        let rg = self.needs(&[a]);
        self.push("dropout", v, Op::Dropout { a, mask }, rg)
    }

    /// Mean squared error against a fixed target.
    pub fn mse_loss(&mut self, pred: Var, target: &Array) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() || pv.is_empty() {
            return Err(shape_err("mse_loss", format!("{:?} vs target {:?}", pv.shape(), target.shape())));
        }
        let n = pv.len() as f64;
        let loss = pv.data().iter().zip(target.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
        let rg = self.needs(&[pred]);
        self.push("mse_loss", Array::scalar(loss), Op::Mse { a: pred, target: target.data().to_vec() }, rg)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| shape_err("concat", "no inputs"))?;
        let s0 = self.shape(*first).to_vec();
        if axis >= s0.len() {
            return Err(shape_err("concat", format!("axis {axis} for {s0:?}")));
        }
        let mut total = 0;
        for p in parts {
            let s = self.shape(*p);
            if s.len() != s0.len() || s[..axis] != s0[..axis] || s[axis + 1..] != s0[axis + 1..] {
                return Err(shape_err("concat", format!("{s0:?} with {s:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&s0, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let chunk = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = s0;
        shape[axis] = total;
        let rg = self.needs(parts);
        self.push("concat", Array::from_parts(shape, out), Op::Concat { parts: parts.to_vec(), axis }, rg)
    }

    /// Entries `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || start > end || end > s[axis] {
            return Err(shape_err("slice", format!("{start}..{end} on axis {axis} of {s:?}")));
        }
        let (outer, len, inner) = split_axis(&s, axis);
        let d = self.value(a).data();
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * len * inner;
            out.extend_from_slice(&d[base + start * inner..base + end * inner]);
        }
        let mut shape = s;
        shape[axis] = end - start;
        let rg = self.needs(&[a]);
        self.push("slice", Array::from_parts(shape, out), Op::Slice { a, axis, start }, rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).clone().reshaped(shape).map_err(|_| {
            shape_err("reshape", format!("{:?} to {shape:?}", self.shape(a)))
        })?;
        let rg = self.needs(&[a]);
        self.push("reshape", v, Op::Reshape { a }, rg)
    }

    /// Swaps axes 1 and 2.
    pub fn transpose12(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() < 3 {
            return Err(shape_err("transpose12", format!("{s:?}")));
        }
        let out = transpose12_data(self.value(a).data(), &s);
        let mut shape = s;
        shape.swap(1, 2);
        let rg = self.needs(&[a]);
        self.push("transpose12", Array::from_parts(shape, out), Op::Transpose12 { a }, rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push("sum", Array::scalar(s), Op::Sum { a }, rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(shape_err("mean", "empty input"));
        }
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.needs(&[a]);
        self.push("mean", Array::scalar(m), Op::Mean { a }, rg)
    }

    /// Normalises the last axis, then applies `gamma` and `beta` of that size.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let d = *s.last().ok_or_else(|| shape_err("layer_norm", "scalar input"))?;
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err(
                "layer_norm",
                format!("input {s:?}, gamma {:?}, beta {:?}", self.shape(gamma), self.shape(beta)),
            ));
        }
        let (xd, gd, bd) = (self.value(x).data(), self.value(gamma).data(), self.value(beta).data());
        let rows = xd.len() / d.max(1);
        let mut xhat = vec![0.0; xd.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gd[j] + bd[j];
            }
        }
        let rg = self.needs(&[x, gamma, beta]);
        self.push("layer_norm", Array::from_parts(s, out), Op::LayerNorm { x, gamma, beta, xhat, inv_std }, rg)
    }

    /// Max pooling along axis 1 of `[B, L, C]`, padding both ends with `pad`
    /// positions that never win.
    pub fn maxpool1d(&mut self, a: Var, kernel: usize, stride: usize, pad: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 3 || kernel == 0 || stride == 0 || pad >= kernel || s[1] + 2 * pad < kernel {
            return Err(shape_err("maxpool1d", format!("{s:?} kernel {kernel} stride {stride} pad {pad}")));
        }
        let (b, l, c) = (s[0], s[1], s[2]);
        let lout = (l + 2 * pad - kernel) / stride + 1;
        let d = self.value(a).data();
        let mut out = vec![0.0; b * lout * c];
        let mut argmax = vec![0usize; b * lout * c];
        for bi in 0..b {
            for o in 0..lout {
                let lo = (o * stride) as isize - pad as isize;
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = usize::MAX;
                    for kk in 0..kernel as isize {
                        let p = lo + kk;
                        if p < 0 || p as usize >= l {
                            continue;
                        }
                        let idx = (bi * l + p as usize) * c + ch;
                        if d[idx] > best {
                            best = d[idx];
                            arg = idx;
                        }
                    }
                    let oi = (bi * lout + o) * c + ch;
                    out[oi] = best;
                    argmax[oi] = arg;
                }
            }
        }
        let rg = self.needs(&[a]);
        self.push("maxpool1d", Array::from_parts(vec![b, lout, c], out), Op::MaxPool { a, argmax }, rg)
    }

    /// Rows of `table: [V, d]` picked by `idx`, giving `[idx.len(), d]`.
    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 {
            return Err(shape_err("gather_rows", format!("table {s:?}")));
        }
        let (v, d) = (s[0], s[1]);
        let td = self.value(table).data();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            if i >= v {
                return Err(AutodiffError::Index { op: "gather_rows", index: i, size: v });
            }
            out.extend_from_slice(&td[i * d..(i + 1) * d]);
        }
        let rg = self.needs(&[table]);
        self.push("gather_rows", Array::from_parts(vec![idx.len(), d], out), Op::Gather { table, idx: idx.to_vec() }, rg)
    }

    fn check_row_index(&self, op: &'static str, s: &[usize], idx: &[Vec<usize>], unique: bool) -> Result<usize> {
        if s.len() != 3 || idx.len() != s[0] {
            return Err(shape_err(op, format!("{s:?} with {} index lists", idx.len())));
        }
        let u = idx.first().map_or(0, Vec::len);
        for list in idx {
            if list.len() != u {
                return Err(shape_err(op, "index lists differ in length"));
            }
            for (k, &i) in list.iter().enumerate() {
                if i >= s[1] {
                    return Err(AutodiffError::Index { op, index: i, size: s[1] });
                }
                if unique && list[..k].contains(&i) {
                    return Err(AutodiffError::Invalid(format!("{op}: repeated row {i}")));
                }
            }
        }
        Ok(u)
    }

    /// For each batch entry `n` of `a: [N, L, d]`, the rows `idx[n]`.
    pub fn select_rows(&mut self, a: Var, idx: &[Vec<usize>]) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let u = self.check_row_index("select_rows", &s, idx, false)?;
        let (l, d) = (s[1], s[2]);
        let ad = self.value(a).data();
        let mut out = Vec::with_capacity(s[0] * u * d);
        for (n, list) in idx.iter().enumerate() {
            for &i in list {
                let o = (n * l + i) * d;
                out.extend_from_slice(&ad[o..o + d]);
            }
        }
        let rg = self.needs(&[a]);
        self.push("select_rows", Array::from_parts(vec![s[0], u, d], out), Op::SelectRows { a, idx: idx.to_vec() }, rg)
    }

    /// `base` with rows `idx[n]` of batch entry `n` overwritten by `src[n]`.
    pub fn replace_rows(&mut self, base: Var, src: Var, idx: &[Vec<usize>]) -> Result<Var> {
        let s = self.shape(base).to_vec();
        let u = self.check_row_index("replace_rows", &s, idx, true)?;
        let ss = self.shape(src);
        if ss != [s[0], u, s[2]] {
            return Err(shape_err("replace_rows", format!("base {s:?}, source {ss:?}, {u} rows")));
        }
        let (l, d) = (s[1], s[2]);
        let mut out = self.value(base).data().to_vec();
        let sd = self.value(src).data();
        for (n, list) in idx.iter().enumerate() {
            for (k, &i) in list.iter().enumerate() {
                let o = (n * l + i) * d;
                let so = (n * u + k) * d;
                out[o..o + d].copy_from_slice(&sd[so..so + d]);
            }
        }
        let rg = self.needs(&[base, src]);
        self.push("replace_rows", Array::from_parts(s, out), Op::ReplaceRows { base, src, idx: idx.to_vec() }, rg)
    }

    /// The mean over axis 1 of `a: [N, L, d]`, repeated `rows` times: `[N, rows, d]`.
    pub fn mean_rows(&mut self, a: Var, rows: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 3 || s[1] == 0 {
            return Err(shape_err("mean_rows", format!("{s:?}")));
        }
        let (n, l, d) = (s[0], s[1], s[2]);
        let ad = self.value(a).data();
        let mut out = Vec::with_capacity(n * rows * d);
        for bi in 0..n {
            let mut m = vec![0.0; d];
            for t in 0..l {
                for (mj, x) in m.iter_mut().zip(&ad[(bi * l + t) * d..(bi * l + t + 1) * d]) {
                    *mj += x;
                }
            }
            m.iter_mut().for_each(|x| *x /= l as f64);
            for _ in 0..rows {
                out.extend_from_slice(&m);
            }
        }
        let rg = self.needs(&[a]);
        self.push("mean_rows", Array::from_parts(vec![n, rows, d], out), Op::MeanRows { a }, rg)
    }

    /// Running mean over axis 1: row `t` is the mean of rows `0..=t`.
    pub fn cummean_rows(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 3 {
            return Err(shape_err("cummean_rows", format!("{s:?}")));
        }
        let (n, l, d) = (s[0], s[1], s[2]);
        let ad = self.value(a).data();
        let mut out = vec![0.0; ad.len()];
        for bi in 0..n {
            let mut acc = vec![0.0; d];
            for t in 0..l {
                let o = (bi * l + t) * d;
                for j in 0..d {
                    acc[j] += ad[o + j];
                    out[o + j] = acc[j] / (t + 1) as f64;
                }
            }
        }
        let rg = self.needs(&[a]);
        self.push("cummean_rows", Array::from_parts(s, out), Op::CumMeanRows { a }, rg)
    }

    /// One LSTM update from pre-activations `gates: [B, 4H]` laid out as
    /// input, forget, candidate, output blocks, and the previous state
    /// `[B, 2H]` holding `h` then `c` (zeros when `None`). Returns the new
    /// state `[B, 2H]`.
    pub fn lstm_cell(&mut self, gates: Var, prev: Option<Var>) -> Result<Var> {
        let s = self.shape(gates).to_vec();
        if s.len() != 2 || s[1] % 4 != 0 || s[1] == 0 {
            return Err(shape_err("lstm_cell", format!("gates {s:?}")));
        }
        let (b, h) = (s[0], s[1] / 4);
        if let Some(p) = prev {
            if self.shape(p) != [b, 2 * h] {
                return Err(shape_err("lstm_cell", format!("gates {s:?}, state {:?}", self.shape(p))));
            }
        }
        let gd = self.value(gates).data();
        let pd = prev.map(|p| self.value(p).data());
        let mut act = vec![0.0; b * 4 * h];
        let mut tanh_c = vec![0.0; b * h];
        let mut out = vec![0.0; b * 2 * h];
        let sig = |x: f64| if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { let e = x.exp(); e / (1.0 + e) };
        for r in 0..b {
            let (gr, ar) = (&gd[r * 4 * h..(r + 1) * 4 * h], &mut act[r * 4 * h..(r + 1) * 4 * h]);
            for j in 0..h {
                let i = sig(gr[j]);
                let f = sig(gr[h + j]);
                let c_tilde = gr[2 * h + j].tanh();
                let o = sig(gr[3 * h + j]);
                let c_prev = pd.map_or(0.0, |p| p[r * 2 * h + h + j]);
                let c = f * c_prev + i * c_tilde;
                let tc = c.tanh();
                ar[j] = i;
                ar[h + j] = f;
                ar[2 * h + j] = c_tilde;
                ar[3 * h + j] = o;
                tanh_c[r * h + j] = tc;
                out[r * 2 * h + j] = o * tc;
                out[r * 2 * h + h + j] = c;
            }
        }
        let mut parents = vec![gates];
        parents.extend(prev);
        let rg = self.needs(&parents);
        let (act, tanh_c) = if rg { (act, tanh_c) } else { (Vec::new(), Vec::new()) };
        self.push("lstm_cell", Array::from_parts(vec![b, 2 * h], out), Op::LstmCell { gates, prev, act, tanh_c }, rg)
    }

    /// Gradients of the scalar `loss` with respect to every leaf that requires one.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Array::full(lv.shape(), 1.0));
        }
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backprop(i, &gy, &mut grads);
        }
        Ok(Gradients { grads, params: self.params.clone() })
    }

    fn buf<'a>(&self, grads: &'a mut [Option<Array>], v: Var) -> Option<&'a mut Array> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| Array::zeros(node.value.shape())))
    }

    fn backprop(&self, i: usize, gy: &Array, grads: &mut [Option<Array>]) {
        let g = gy.data();
        let val = |v: Var| self.nodes[v.0].value.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul { a, w } => {
                let sw = self.shape(*w);
                let (k, n) = (sw[0], sw[1]);
                let m = g.len() / n.max(1);
                if let Some(ga) = self.buf(grads, *a) {
                    gemm(g, View::stored(m, n, false), val(*w), View::stored(k, n, true), ga.data_mut(), View::stored(m, k, false), 1.0);
                }
                if let Some(gw) = self.buf(grads, *w) {
                    gemm(val(*a), View::stored(m, k, true), g, View::stored(m, n, false), gw.data_mut(), View::stored(k, n, false), 1.0);
                }
            }
            Op::Bmm { a, b, ta, tb } => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let r = sa.len();
                let av = View::stored(sa[r - 2], sa[r - 1], *ta);
                let bv = View::stored(sb[r - 2], sb[r - 1], *tb);
                let batch: usize = sa[..r - 2].iter().product();
                let (m, n) = (av.rows, bv.cols);
                let (asz, bsz, csz) = (sa[r - 2] * sa[r - 1], sb[r - 2] * sb[r - 1], m * n);
                let cv = View::stored(m, n, false);
                if let Some(ga) = self.buf(grads, *a) {
                    let gad = ga.data_mut();
                    for j in 0..batch {
                        gemm(&g[j * csz..(j + 1) * csz], cv, &val(*b)[j * bsz..(j + 1) * bsz], bv.t(), &mut gad[j * asz..(j + 1) * asz], av, 1.0);
                    }
                }
                if let Some(gb) = self.buf(grads, *b) {
                    let gbd = gb.data_mut();
                    for j in 0..batch {
                        gemm(&val(*a)[j * asz..(j + 1) * asz], av.t(), &g[j * csz..(j + 1) * csz], cv, &mut gbd[j * bsz..(j + 1) * bsz], bv, 1.0);
                    }
                }
            }
            Op::Add { a, b } | Op::Sub { a, b } => {
                let sign = if matches!(self.nodes[i].op, Op::Sub { .. }) { -1.0 } else { 1.0 };
                if let Some(ga) = self.buf(grads, *a) {
                    ga.add_assign(g);
                }
                if let Some(gb) = self.buf(grads, *b) {
                    let p = gb.len().max(1);
                    let gbd = gb.data_mut();
                    for (j, x) in g.iter().enumerate() {
                        gbd[j % p] += sign * x;
                    }
                }
            }
            Op::Mul { a, b } => {
                let (ad, bd) = (val(*a), val(*b));
                let p = bd.len().max(1);
                if let Some(ga) = self.buf(grads, *a) {
                    for (j, (o, x)) in ga.data_mut().iter_mut().zip(g).enumerate() {
                        *o += x * bd[j % p];
                    }
                }
                if let Some(gb) = self.buf(grads, *b) {
                    let gbd = gb.data_mut();
                    for (j, x) in g.iter().enumerate() {
                        gbd[j % p] += x * ad[j];
                    }
                }
            }
            Op::Scale { a, s } => {
                if let Some(ga) = self.buf(grads, *a) {
                    for (o, x) in ga.data_mut().iter_mut().zip(g) {
                        *o += s * x;
                    }
                }
            }
            Op::Unary { a, kind } => {
                let (xd, yd) = (val(*a), self.nodes[i].value.data());
                let kind = *kind;
                if let Some(ga) = self.buf(grads, *a) {
                    for (j, o) in ga.data_mut().iter_mut().enumerate() {
                        let (x, y) = (xd[j], yd[j]);
                        let dy = match kind {
                            Unary::Tanh => 1.0 - y * y,
                            Unary::Sigmoid => y * (1.0 - y),
                            Unary::Relu => f64::from(u8::from(x > 0.0)),
                            Unary::Elu => {
                                if x > 0.0 {
                                    1.0
                                } else {
                                    y + 1.0
                                }
                            }
                            Unary::Gelu => {
                                let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
                                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
                            }
                        };
                        *o += g[j] * dy;
                    }
                }
            }
            Op::Softmax { a } => {
                let y = &self.nodes[i].value;
                let cols = y.shape()[y.ndim() - 1];
                if let Some(ga) = self.buf(grads, *a) {
                    for ((orow, yrow), grow) in ga.data_mut().chunks_mut(cols).zip(y.data().chunks(cols)).zip(g.chunks(cols)) {
                        let dot: f64 = yrow.iter().zip(grow).map(|(p, q)| p * q).sum();
                        for j in 0..cols {
                            orow[j] += yrow[j] * (grow[j] - dot);
                        }
                    }
                }
            }
            Op::Conv1d { x, w, b, cols, stride, pad_left } => {
                let (sx, sw) = (self.shape(*x), self.shape(*w));
                let (bsz, l, cin) = (sx[0], sx[1], sx[2]);
                let (k, cout) = (sw[0], sw[2]);
                let kc = k * cin;
                let lout = self.nodes[i].value.shape()[1];
                let rows = bsz * lout;
                if let Some(gw) = self.buf(grads, *w) {
                    gemm(cols, View::stored(rows, kc, true), g, View::stored(rows, cout, false), gw.data_mut(), View::stored(kc, cout, false), 1.0);
                }
                if let Some(b) = b {
                    if let Some(gb) = self.buf(grads, *b) {
                        let gbd = gb.data_mut();
                        for row in g.chunks(cout) {
                            for (o, x) in gbd.iter_mut().zip(row) {
                                *o += x;
                            }
                        }
                    }
                }
                if self.nodes[x.0].requires_grad {
                    let mut gcols = vec![0.0; rows * kc];
                    gemm(g, View::stored(rows, cout, false), val(*w), View::stored(kc, cout, true), &mut gcols, View::stored(rows, kc, false), 0.0);
                    let gx = self.buf(grads, *x).expect("requires grad").data_mut();
                    for bi in 0..bsz {
                        for o in 0..lout {
                            let row = &gcols[(bi * lout + o) * kc..(bi * lout + o + 1) * kc];
                            for kk in 0..k {
                                let pos = (o * stride + kk) as isize - *pad_left as isize;
                                if pos >= 0 && (pos as usize) < l {
                                    let dst = (bi * l + pos as usize) * cin;
                                    for c in 0..cin {
                                        gx[dst + c] += row[kk * cin + c];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::Dropout { a, mask } => {
                if let Some(ga) = self.buf(grads, *a) {
                    for ((o, x), m) in ga.data_mut().iter_mut().zip(g).zip(mask) {
                        *o += x * m;
                    }
                }
            }
            Op::Mse { a, target } => {
                let pd = val(*a);
                let scale = 2.0 * g[0] / pd.len() as f64;
                if let Some(ga) = self.buf(grads, *a) {
                    for ((o, p), t) in ga.data_mut().iter_mut().zip(pd).zip(target) {
                        *o += scale * (p - t);
                    }
                }
            }
            Op::Concat { parts, axis } => {
                let shape = self.nodes[i].value.shape();
                let (outer, total, inner) = split_axis(shape, *axis);
                let mut offset = 0;
                for p in parts {
                    let len = self.shape(*p)[*axis];
                    if let Some(gp) = self.buf(grads, *p) {
                        let gpd = gp.data_mut();
                        let chunk = len * inner;
                        for o in 0..outer {
                            let src = o * total * inner + offset * inner;
                            for (d, s) in gpd[o * chunk..(o + 1) * chunk].iter_mut().zip(&g[src..src + chunk]) {
                                *d += s;
                            }
                        }
                    }
                    offset += len;
                }
            }
            Op::Slice { a, axis, start } => {
                let sa = self.shape(*a);
                let (outer, len, inner) = split_axis(sa, *axis);
                let width = self.nodes[i].value.shape()[*axis] * inner;
                if let Some(ga) = self.buf(grads, *a) {
                    let gad = ga.data_mut();
                    for o in 0..outer {
                        let dst = o * len * inner + start * inner;
                        for (d, s) in gad[dst..dst + width].iter_mut().zip(&g[o * width..(o + 1) * width]) {
                            *d += s;
                        }
                    }
                }
            }
            Op::Reshape { a } => {
                if let Some(ga) = self.buf(grads, *a) {
                    ga.add_assign(g);
                }
            }
            Op::Transpose12 { a } => {
                if let Some(ga) = self.buf(grads, *a) {
                    let back = transpose12_data(g, gy.shape());
                    ga.add_assign(&back);
                }
            }
            Op::Sum { a } => {
                if let Some(ga) = self.buf(grads, *a) {
                    ga.data_mut().iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Mean { a } => {
                if let Some(ga) = self.buf(grads, *a) {
                    let s = g[0] / ga.len() as f64;
                    ga.data_mut().iter_mut().for_each(|o| *o += s);
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let d = self.shape(*gamma)[0];
                let gd = val(*gamma);
                if let Some(gg) = self.buf(grads, *gamma) {
                    let ggd = gg.data_mut();
                    for (j, (x, h)) in g.iter().zip(xhat).enumerate() {
                        ggd[j % d] += x * h;
                    }
                }
                if let Some(gb) = self.buf(grads, *beta) {
                    let gbd = gb.data_mut();
                    for (j, x) in g.iter().enumerate() {
                        gbd[j % d] += x;
                    }
                }
                if let Some(gx) = self.buf(grads, *x) {
                    let gxd = gx.data_mut();
                    let mut gh = vec![0.0; d];
                    for (r, is) in inv_std.iter().enumerate() {
                        let hrow = &xhat[r * d..(r + 1) * d];
                        let grow = &g[r * d..(r + 1) * d];
                        for j in 0..d {
                            gh[j] = grow[j] * gd[j];
                        }
                        let s1: f64 = gh.iter().sum();
                        let s2: f64 = gh.iter().zip(hrow).map(|(a, b)| a * b).sum();
                        for j in 0..d {
                            gxd[r * d + j] += is / d as f64 * (d as f64 * gh[j] - s1 - hrow[j] * s2);
                        }
                    }
                }
            }
            Op::MaxPool { a, argmax } => {
                if let Some(ga) = self.buf(grads, *a) {
                    let gad = ga.data_mut();
                    for (x, &src) in g.iter().zip(argmax) {
                        gad[src] += x;
                    }
                }
            }
            Op::Gather { table, idx } => {
                let d = self.shape(*table)[1];
                if let Some(gt) = self.buf(grads, *table) {
                    let gtd = gt.data_mut();
                    for (r, &k) in idx.iter().enumerate() {
                        for j in 0..d {
                            gtd[k * d + j] += g[r * d + j];
                        }
                    }
                }
            }
            Op::SelectRows { a, idx } => {
                let s = self.shape(*a);
                let (l, d) = (s[1], s[2]);
                let u = idx.first().map_or(0, Vec::len);
                if let Some(ga) = self.buf(grads, *a) {
                    let gad = ga.data_mut();
                    for (n, list) in idx.iter().enumerate() {
                        for (k, &r) in list.iter().enumerate() {
                            for j in 0..d {
                                gad[(n * l + r) * d + j] += g[(n * u + k) * d + j];
                            }
                        }
                    }
                }
            }
            Op::ReplaceRows { base, src, idx } => {
                let s = self.shape(*base);
                let (l, d) = (s[1], s[2]);
                let u = idx.first().map_or(0, Vec::len);
                if let Some(gb) = self.buf(grads, *base) {
                    let gbd = gb.data_mut();
                    let mut tmp = g.to_vec();
                    for (n, list) in idx.iter().enumerate() {
                        for &r in list {
                            tmp[(n * l + r) * d..(n * l + r + 1) * d].fill(0.0);
                        }
                    }
                    for (o, x) in gbd.iter_mut().zip(&tmp) {
                        *o += x;
                    }
                }
                if let Some(gs) = self.buf(grads, *src) {
                    let gsd = gs.data_mut();
                    for (n, list) in idx.iter().enumerate() {
                        for (k, &r) in list.iter().enumerate() {
                            for j in 0..d {
                                gsd[(n * u + k) * d + j] += g[(n * l + r) * d + j];
                            }
                        }
                    }
                }
            }
            Op::MeanRows { a } => {
                let s = self.shape(*a);
                let (n, l, d) = (s[0], s[1], s[2]);
                let rows = self.nodes[i].value.shape()[1];
                if let Some(ga) = self.buf(grads, *a) {
                    let gad = ga.data_mut();
                    for bi in 0..n {
                        let mut tot = vec![0.0; d];
                        for r in 0..rows {
                            for j in 0..d {
                                tot[j] += g[(bi * rows + r) * d + j];
                            }
                        }
                        for t in 0..l {
                            for j in 0..d {
                                gad[(bi * l + t) * d + j] += tot[j] / l as f64;
                            }
                        }
                    }
                }
            }
            Op::CumMeanRows { a } => {
                let s = self.shape(*a);
                let (n, l, d) = (s[0], s[1], s[2]);
                if let Some(ga) = self.buf(grads, *a) {
                    let gad = ga.data_mut();
                    for bi in 0..n {
                        let mut acc = vec![0.0; d];
                        for t in (0..l).rev() {
                            let o = (bi * l + t) * d;
                            for j in 0..d {
                                acc[j] += g[o + j] / (t + 1) as f64;
                                gad[o + j] += acc[j];
                            }
                        }
                    }
                }
            }
            Op::LstmCell { gates, prev, act, tanh_c } => {
                let s = self.shape(*gates);
                let (b, h) = (s[0], s[1] / 4);
                let pd = prev.map(|p| val(p));
                let mut dgates = vec![0.0; b * 4 * h];
                let mut dprev = vec![0.0; b * 2 * h];
                for r in 0..b {
                    for j in 0..h {
                        let a = &act[r * 4 * h..(r + 1) * 4 * h];
                        let (i, f, ct, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
                        let tc = tanh_c[r * h + j];
                        let dh = g[r * 2 * h + j];
                        let dc = g[r * 2 * h + h + j] + dh * o * (1.0 - tc * tc);
                        let c_prev = pd.map_or(0.0, |p| p[r * 2 * h + h + j]);
                        let dg = &mut dgates[r * 4 * h..(r + 1) * 4 * h];
                        dg[j] = dc * ct * i * (1.0 - i);
                        dg[h + j] = dc * c_prev * f * (1.0 - f);
                        dg[2 * h + j] = dc * i * (1.0 - ct * ct);
                        dg[3 * h + j] = dh * tc * o * (1.0 - o);
                        dprev[r * 2 * h + h + j] = dc * f;
                    }
                }
                if let Some(gg) = self.buf(grads, *gates) {
                    gg.add_assign(&dgates);
                }
                if let Some(p) = prev {
                    if let Some(gp) = self.buf(grads, *p) {
                        gp.add_assign(&dprev);
                    }
                }
            }
        }
    }
}

fn transpose12_data(d: &[f64], s: &[usize]) -> Vec<f64> {
    let (a, b, c) = (s[0], s[1], s[2]);
    let inner: usize = s[3..].iter().product();
    let mut out = vec![0.0; d.len()];
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                let src = ((i * b + j) * c + k) * inner;
                let dst = ((i * c + k) * b + j) * inner;
                out[dst..dst + inner].copy_from_slice(&d[src..src + inner]);
            }
        }
    }
    out
}
