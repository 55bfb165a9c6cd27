//! LSTM cell, bidirectional encoder and the convolutional front end that
//! feeds it.
//!
//! Gates are computed on the concatenation `[x_t, h_{t−1}]` in the order
//! input, forget, output, candidate:
//!
//! ```text
//! i, f, o = σ(·)   g = tanh(·)
//! c_t = f ⊙ c_{t−1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::layers::{
    relu_backward, relu_forward, text_conv_backward, text_conv_forward, ConvCache, ConvGeometry, ConvParams, ReluCache,
};
use crate::math::{sigmoid, sqrt, tanh};
use crate::params::{push, NamedParam, ParamSet, Role};
use crate::{Error, Result, Rng, Tensor};

pub const GATES: [&str; 4] = ["i", "f", "o", "g"];
const FORGET: usize = 1;
const CANDIDATE: usize = 3;
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// Per-gate weights `[H × (E + H)]` and biases `[H]`, gate order `i, f, o, g`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub weights: [Tensor; 4],
    pub biases: [Tensor; 4],
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            weights: core::array::from_fn(|_| Tensor::zeros(&[hidden, input + hidden])),
            biases: core::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    /// Weights uniform in `±1/√H`, biases zero except the forget gate.
    pub fn random(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let bound = 1.0 / sqrt(hidden as f64);
        let mut p = Self::zeros(input, hidden);
        for w in &mut p.weights {
            *w = rng.uniform(w.shape(), -bound, bound)?;
        }
        p.biases[FORGET] = Tensor::full(&[hidden], FORGET_BIAS_INIT);
        Ok(p)
    }

    pub fn hidden(&self) -> usize {
        self.weights[0].dim(0)
    }

    pub fn input(&self) -> usize {
        self.weights[0].dim(1) - self.hidden()
    }
}

impl ParamSet for LstmParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        for (k, gate) in GATES.iter().enumerate() {
            push(out, prefix, &format!("w_{gate}"), &self.weights[k], Role::Trainable);
            push(out, prefix, &format!("b_{gate}"), &self.biases[k], Role::Trainable);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
    }
}

/// Hidden and cell state, each `[B × H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self { h: Tensor::zeros(&[batch, hidden]), c: Tensor::zeros(&[batch, hidden]) }
    }
}

#[derive(Debug, Clone)]
pub struct LstmCellCache {
    xh: Tensor,
    gates: [Tensor; 4],
    c_prev: Tensor,
    tanh_c: Tensor,
}

/// One LSTM step.
pub fn lstm_cell(x: &Tensor, prev: &LstmState, params: &LstmParams) -> Result<(LstmState, LstmCellCache)> {
    let (hidden, input) = (params.hidden(), params.input());
    let batch = x.dim(0);
    let expected_state = [batch, hidden];
    if x.rank() != 2 || x.dim(1) != input || prev.h.shape() != expected_state || prev.c.shape() != expected_state {
        return Err(Error::Dimension(format!(
            "lstm cell (E={input}, H={hidden}) got x {:?}, h {:?}, c {:?}",
            x.shape(),
            prev.h.shape(),
            prev.c.shape()
        )));
    }
    let xh = Tensor::concat(&[x, &prev.h], 1)?;
    let mut gates: [Tensor; 4] = core::array::from_fn(|_| Tensor::zeros(&[1]));
    for k in 0..4 {
        let pre = xh.matmul_t(&params.weights[k])?.add_bias(&params.biases[k])?;
        gates[k] = if k == CANDIDATE { pre.map(tanh) } else { pre.map(sigmoid) };
    }
    let [i, f, o, g] = &gates;
    let c = f.mul(&prev.c)?.add(&i.mul(g)?)?;
    let tanh_c = c.map(tanh);
    let h = o.mul(&tanh_c)?;
    let cache = LstmCellCache { xh, gates, c_prev: prev.c.clone(), tanh_c };
    Ok((LstmState { h, c }, cache))
}

/// Backward through one step. `grad` carries `dL/dh_t` and `dL/dc_t`; the
/// returned state carries `dL/dh_{t−1}` and `dL/dc_{t−1}`.
pub fn lstm_cell_backward(
    grad: &LstmState,
    cache: LstmCellCache,
    params: &LstmParams,
) -> Result<(Tensor, LstmState, LstmParams)> {
    let [i, f, o, g] = &cache.gates;
    let input = params.input();
    let dtanh = cache.tanh_c.map(|t| 1.0 - t * t);
    let dc = grad.c.add(&grad.h.mul(o)?.mul(&dtanh)?)?;
    let d_o = grad.h.mul(&cache.tanh_c)?;
    let d_i = dc.mul(g)?;
    let d_f = dc.mul(&cache.c_prev)?;
    let d_g = dc.mul(i)?;
    let dc_prev = dc.mul(f)?;
    let sig_grad = |d: &Tensor, s: &Tensor| -> Result<Tensor> { d.mul(&s.map(|v| v * (1.0 - v))) };
    let pre = [sig_grad(&d_i, i)?, sig_grad(&d_f, f)?, sig_grad(&d_o, o)?, d_g.mul(&g.map(|v| 1.0 - v * v))?];
    let mut grads = LstmParams::zeros(input, params.hidden());
    let mut dxh = cache.xh.zeros_like();
    for k in 0..4 {
        grads.weights[k] = pre[k].t_matmul(&cache.xh)?;
        grads.biases[k] = pre[k].sum_rows()?;
        dxh.add_assign(&pre[k].matmul(&params.weights[k])?)?;
    }
    let dx = dxh.slice_axis(1, 0, input)?;
    let dh_prev = dxh.slice_axis(1, input, params.hidden())?;
    Ok((dx, LstmState { h: dh_prev, c: dc_prev }, grads))
}

/// How forward and backward hidden states are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// `[h→; h←]`, width `2H`.
    Concat,
    /// `ω·h→ + ϑ·h← + b`, width `H`.
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MergeParams {
    Concat,
    WeightedSum { omega: Tensor, theta: Tensor, bias: Tensor },
}

impl MergeParams {
    pub fn random(mode: MergeMode, hidden: usize, rng: &mut Rng) -> Result<Self> {
        Ok(match mode {
            MergeMode::Concat => MergeParams::Concat,
            MergeMode::WeightedSum => {
                let bound = 1.0 / sqrt(hidden as f64);
                MergeParams::WeightedSum {
                    omega: rng.uniform(&[hidden, hidden], -bound, bound)?,
                    theta: rng.uniform(&[hidden, hidden], -bound, bound)?,
                    bias: Tensor::zeros(&[hidden]),
                }
            }
        })
    }

    pub fn mode(&self) -> MergeMode {
        match self {
            MergeParams::Concat => MergeMode::Concat,
            MergeParams::WeightedSum { .. } => MergeMode::WeightedSum,
        }
    }

    pub fn out_width(&self, hidden: usize) -> usize {
        match self {
            MergeParams::Concat => 2 * hidden,
            MergeParams::WeightedSum { .. } => hidden,
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            MergeParams::Concat => MergeParams::Concat,
            MergeParams::WeightedSum { omega, theta, bias } => MergeParams::WeightedSum {
                omega: omega.zeros_like(),
                theta: theta.zeros_like(),
                bias: bias.zeros_like(),
            },
        }
    }

    /// Same merge with the roles of the two directions exchanged.
    pub fn swapped(&self) -> Self {
        match self {
            MergeParams::Concat => MergeParams::Concat,
            MergeParams::WeightedSum { omega, theta, bias } => {
                MergeParams::WeightedSum { omega: theta.clone(), theta: omega.clone(), bias: bias.clone() }
            }
        }
    }

    pub fn apply(&self, fwd: &Tensor, bwd: &Tensor) -> Result<Tensor> {
        match self {
            MergeParams::Concat => Tensor::concat(&[fwd, bwd], 1),
            MergeParams::WeightedSum { omega, theta, bias } => {
                fwd.matmul_t(omega)?.add(&bwd.matmul_t(theta)?)?.add_bias(bias)
            }
        }
    }

    /// Returns `(d_fwd, d_bwd)` and accumulates parameter gradients into `grads`.
    fn backward(&self, grad: &Tensor, fwd: &Tensor, bwd: &Tensor, grads: &mut MergeParams) -> Result<(Tensor, Tensor)> {
        match (self, grads) {
            (MergeParams::Concat, _) => {
                let h = fwd.dim(1);
                Ok((grad.slice_axis(1, 0, h)?, grad.slice_axis(1, h, h)?))
            }
            (
                MergeParams::WeightedSum { omega, theta, .. },
                MergeParams::WeightedSum { omega: d_omega, theta: d_theta, bias: d_bias },
            ) => {
                d_omega.add_assign(&grad.t_matmul(fwd)?)?;
                d_theta.add_assign(&grad.t_matmul(bwd)?)?;
                d_bias.add_assign(&grad.sum_rows()?)?;
                Ok((grad.matmul(omega)?, grad.matmul(theta)?))
            }
            _ => Err(Error::Config("merge gradient container does not match merge mode".into())),
        }
    }
}

impl ParamSet for MergeParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        if let MergeParams::WeightedSum { omega, theta, bias } = self {
            push(out, prefix, "omega", omega, Role::Trainable);
            push(out, prefix, "theta", theta, Role::Trainable);
            push(out, prefix, "bias", bias, Role::Trainable);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        if let MergeParams::WeightedSum { omega, theta, bias } = self {
            out.push(omega);
            out.push(theta);
            out.push(bias);
        }
    }
}

/// Forward/backward LSTM pair plus merge rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub merge: MergeParams,
}

impl BiLstmParams {
    pub fn random(input: usize, hidden: usize, merge: MergeMode, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            fwd: LstmParams::random(input, hidden, rng)?,
            bwd: LstmParams::random(input, hidden, rng)?,
            merge: MergeParams::random(merge, hidden, rng)?,
        })
    }

    pub fn out_width(&self) -> usize {
        self.merge.out_width(self.fwd.hidden())
    }

    fn zeros_like(&self) -> Self {
        Self {
            fwd: LstmParams::zeros(self.fwd.input(), self.fwd.hidden()),
            bwd: LstmParams::zeros(self.bwd.input(), self.bwd.hidden()),
            merge: self.merge.zeros_like(),
        }
    }
}

impl ParamSet for BiLstmParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        self.fwd.collect(&crate::params::join(prefix, "fwd"), out);
        self.bwd.collect(&crate::params::join(prefix, "bwd"), out);
        self.merge.collect(&crate::params::join(prefix, "merge"), out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.fwd.collect_mut(out);
        self.bwd.collect_mut(out);
        self.merge.collect_mut(out);
    }
}

/// Encoder outputs: merged states per token `[B × L × D]` and the final
/// representation `[B × D]` (merge of `h→_L` with `h←_1`).
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmOutput {
    pub per_token: Tensor,
    pub last: Tensor,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    batch: usize,
    len: usize,
    input: usize,
    fwd_h: Vec<Tensor>,
    bwd_h: Vec<Tensor>,
    fwd_steps: Vec<LstmCellCache>,
    bwd_steps: Vec<LstmCellCache>,
}

fn token_slice(x: &Tensor, t: usize) -> Result<Tensor> {
    let (b, l, e) = (x.dim(0), x.dim(1), x.dim(2));
    let mut out = Vec::with_capacity(b * e);
    for bi in 0..b {
        let o = (bi * l + t) * e;
        out.extend_from_slice(&x.data()[o..o + e]);
    }
    Tensor::new(&[b, e], out)
}

/// Runs one direction; hidden states are returned indexed by token position.
fn run_direction(x: &Tensor, params: &LstmParams, reverse: bool) -> Result<(Vec<Tensor>, Vec<LstmCellCache>)> {
    let (batch, len) = (x.dim(0), x.dim(1));
    let mut state = LstmState::zeros(batch, params.hidden());
    let mut hs = vec![Tensor::zeros(&[1]); len];
    let mut steps = Vec::with_capacity(len);
    for step in 0..len {
        let t = if reverse { len - 1 - step } else { step };
        let (next, cache) = lstm_cell(&token_slice(x, t)?, &state, params)?;
        hs[t] = next.h.clone();
        steps.push(cache);
        state = next;
    }
    Ok((hs, steps))
}

/// BPTT for one direction given `dL/dh` per position.
fn backprop_direction(
    dh: &[Tensor],
    steps: Vec<LstmCellCache>,
    params: &LstmParams,
    reverse: bool,
    dx: &mut [f64],
    input: usize,
) -> Result<LstmParams> {
    let len = dh.len();
    let batch = dh[0].dim(0);
    let hidden = params.hidden();
    let mut grads = LstmParams::zeros(input, hidden);
    let mut carry = LstmState::zeros(batch, hidden);
    for (step, cache) in steps.into_iter().enumerate().rev() {
        let t = if reverse { len - 1 - step } else { step };
        let upstream = LstmState { h: carry.h.add(&dh[t])?, c: carry.c };
        let (dxt, prev, g) = lstm_cell_backward(&upstream, cache, params)?;
        for k in 0..4 {
            grads.weights[k].add_assign(&g.weights[k])?;
            grads.biases[k].add_assign(&g.biases[k])?;
        }
        for b in 0..batch {
            let o = (b * len + t) * input;
            for e in 0..input {
                dx[o + e] += dxt.data()[b * input + e];
            }
        }
        carry = prev;
    }
    Ok(grads)
}

/// Bidirectional encoding of `x: [B × L × E]`.
pub fn bilstm_encode(x: &Tensor, params: &BiLstmParams) -> Result<(BiLstmOutput, BiLstmCache)> {
    if x.rank() != 3 {
        return Err(Error::Dimension(format!("bilstm expects [B × L × E], got {:?}", x.shape())));
    }
    let (batch, len, input) = (x.dim(0), x.dim(1), x.dim(2));
    if len == 0 {
        return Err(Error::Argument("bilstm needs at least one token".into()));
    }
    let (fwd_h, fwd_steps) = run_direction(x, &params.fwd, false)?;
    let (bwd_h, bwd_steps) = run_direction(x, &params.bwd, true)?;
    let width = params.out_width();
    let mut per_token = Vec::with_capacity(batch * len * width);
    let merged: Vec<Tensor> = (0..len).map(|t| params.merge.apply(&fwd_h[t], &bwd_h[t])).collect::<Result<_>>()?;
    for b in 0..batch {
        for m in &merged {
            per_token.extend_from_slice(&m.data()[b * width..(b + 1) * width]);
        }
    }
    let last = params.merge.apply(&fwd_h[len - 1], &bwd_h[0])?;
    let output = BiLstmOutput { per_token: Tensor::new(&[batch, len, width], per_token)?, last };
    Ok((output, BiLstmCache { batch, len, input, fwd_h, bwd_h, fwd_steps, bwd_steps }))
}

/// Backward through [`bilstm_encode`]. Either upstream gradient may be absent.
/// Returns `dL/dx` and parameter gradients.
pub fn bilstm_backward(
    d_per_token: Option<&Tensor>,
    d_last: Option<&Tensor>,
    cache: BiLstmCache,
    params: &BiLstmParams,
) -> Result<(Tensor, BiLstmParams)> {
    let BiLstmCache { batch, len, input, fwd_h, bwd_h, fwd_steps, bwd_steps } = cache;
    let hidden = params.fwd.hidden();
    let width = params.out_width();
    let mut grads = params.zeros_like();
    let mut d_fwd = vec![Tensor::zeros(&[batch, hidden]); len];
    let mut d_bwd = vec![Tensor::zeros(&[batch, hidden]); len];
    if let Some(g) = d_per_token {
        if g.shape() != [batch, len, width] {
            return Err(Error::Dimension(format!("per-token gradient {:?}", g.shape())));
        }
        for t in 0..len {
            let gt = token_slice(g, t)?;
            let (a, b) = params.merge.backward(&gt, &fwd_h[t], &bwd_h[t], &mut grads.merge)?;
            d_fwd[t].add_assign(&a)?;
            d_bwd[t].add_assign(&b)?;
        }
    }
    if let Some(g) = d_last {
        if g.shape() != [batch, width] {
            return Err(Error::Dimension(format!("final-state gradient {:?}", g.shape())));
        }
        let (a, b) = params.merge.backward(g, &fwd_h[len - 1], &bwd_h[0], &mut grads.merge)?;
        d_fwd[len - 1].add_assign(&a)?;
        d_bwd[0].add_assign(&b)?;
    }
    let mut dx = vec![0.0; batch * len * input];
    grads.fwd = backprop_direction(&d_fwd, fwd_steps, &params.fwd, false, &mut dx, input)?;
    grads.bwd = backprop_direction(&d_bwd, bwd_steps, &params.bwd, true, &mut dx, input)?;
    Ok((Tensor::new(&[batch, len, input], dx)?, grads))
}

/// Multi-scale convolutions with same-length padding, concatenated on the
/// channel axis and passed through ReLU. Kernel heights must be odd.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFrontend {
    pub convs: Vec<ConvParams>,
}

impl ConvFrontend {
    pub fn random(heights: &[usize], filters: usize, channels: usize, emb_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut convs = Vec::with_capacity(heights.len());
        for &h in heights {
            same_padding(h)?;
            let bound = 1.0 / sqrt((channels * h * emb_dim) as f64);
            convs.push(ConvParams {
                weight: rng.uniform(&[filters, channels, h, emb_dim], -bound, bound)?,
                bias: Some(Tensor::zeros(&[filters])),
            });
        }
        Ok(Self { convs })
    }

    pub fn out_channels(&self) -> usize {
        self.convs.iter().map(|c| c.weight.dim(0)).sum()
    }

    fn zeros_like(&self) -> Self {
        Self {
            convs: self
                .convs
                .iter()
                .map(|c| ConvParams { weight: c.weight.zeros_like(), bias: c.bias.as_ref().map(Tensor::zeros_like) })
                .collect(),
        }
    }
}

impl ParamSet for ConvFrontend {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        for c in &self.convs {
            c.collect(&crate::params::join(prefix, &format!("conv{}", c.height())), out);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for c in &mut self.convs {
            c.collect_mut(out);
        }
    }
}

/// Padding that keeps the sequence length for kernel height `h`.
pub fn same_padding(h: usize) -> Result<usize> {
    if h == 0 || h % 2 == 0 {
        return Err(Error::Config(format!(
            "front-end kernel height {h} cannot preserve sequence length; use an odd height"
        )));
    }
    Ok((h - 1) / 2)
}

#[derive(Debug, Clone)]
pub struct HybridCache {
    front: Option<(Vec<ConvCache>, ReluCache)>,
    lstm: BiLstmCache,
    emb_shape: Vec<usize>,
}

/// Embeddings `[B × C × L × E]` → optional conv front end → Bi-LSTM → final
/// merged state `[B × D]`. Without a front end the input must have one channel.
pub fn hybrid_encode(
    emb: &Tensor,
    frontend: Option<&ConvFrontend>,
    bilstm: &BiLstmParams,
) -> Result<(Tensor, HybridCache)> {
    if emb.rank() != 4 {
        return Err(Error::Dimension(format!("hybrid encoder expects [B × C × L × E], got {:?}", emb.shape())));
    }
    let (batch, channels, len, dim) = (emb.dim(0), emb.dim(1), emb.dim(2), emb.dim(3));
    let (seq, front) = match frontend {
        None => {
            if channels != 1 {
                return Err(Error::Config("a multi-channel input needs a convolutional front end".into()));
            }
            (emb.clone().reshape(&[batch, len, dim])?, None)
        }
        Some(fe) => {
            let mut maps = Vec::with_capacity(fe.convs.len());
            let mut caches = Vec::with_capacity(fe.convs.len());
            for conv in &fe.convs {
                let geometry = ConvGeometry::padded(same_padding(conv.height())?);
                let (y, cache) = text_conv_forward(emb, &conv.weight, conv.bias.as_ref(), geometry)?;
                if y.dim(2) != len {
                    return Err(Error::Config(format!(
                        "front-end conv of height {} changes the sequence length {len} to {}",
                        conv.height(),
                        y.dim(2)
                    )));
                }
                maps.push(y);
                caches.push(cache);
            }
            let refs: Vec<&Tensor> = maps.iter().collect();
            let (act, relu) = relu_forward(&Tensor::concat(&refs, 1)?);
            (act.swap_last_axes()?, Some((caches, relu)))
        }
    };
    let (out, lstm) = bilstm_encode(&seq, bilstm)?;
    Ok((out.last, HybridCache { front, lstm, emb_shape: emb.shape().to_vec() }))
}

/// Returns `dL/d(embeddings)`, front-end gradients (if any) and Bi-LSTM gradients.
pub fn hybrid_backward(
    d_last: &Tensor,
    cache: HybridCache,
    frontend: Option<&ConvFrontend>,
    bilstm: &BiLstmParams,
) -> Result<(Tensor, Option<ConvFrontend>, BiLstmParams)> {
    let (d_seq, lstm_grads) = bilstm_backward(None, Some(d_last), cache.lstm, bilstm)?;
    match (cache.front, frontend) {
        (None, _) => Ok((d_seq.reshape(&cache.emb_shape)?, None, lstm_grads)),
        (Some((caches, relu)), Some(fe)) => {
            let d_act = relu_backward(&d_seq.swap_last_axes()?, relu)?;
            let sizes: Vec<usize> = fe.convs.iter().map(|c| c.weight.dim(0)).collect();
            let pieces = d_act.split_axis(1, &sizes)?;
            let mut d_emb = Tensor::zeros(&cache.emb_shape);
            let mut grads = fe.zeros_like();
            for (((piece, conv_cache), conv), slot) in pieces.iter().zip(caches).zip(&fe.convs).zip(&mut grads.convs) {
                let g = text_conv_backward(piece, conv_cache, &conv.weight)?;
                d_emb.add_assign(&g.input)?;
                slot.weight = g.weight;
                slot.bias = g.bias;
            }
            Ok((d_emb, Some(grads), lstm_grads))
        }
        (Some(_), None) => Err(Error::Config("front-end cache without front-end parameters".into())),
    }
}
