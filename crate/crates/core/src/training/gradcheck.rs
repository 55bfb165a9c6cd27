//! Central finite-difference gradient checking.
//!
//! A [`GradCase`] bundles a list of named input tensors with a function
//! returning a scalar loss and its analytic gradient with respect to every
//! tensor. Layer cases reduce the layer output to a scalar with a fixed random
//! projection, so the upstream gradient is that projection.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::layers::{
    batchnorm_backward, batchnorm_forward, bce_with_logits, conv1d_backward, conv1d_forward, dense_backward,
    dense_forward, dropout_backward, dropout_forward, embedding_backward, embedding_forward, pool_backward,
    pool_forward, relu_backward, relu_forward, text_conv_backward, text_conv_forward, BatchNormParams, ConvGeometry,
    DenseParams, Mode, Pooling,
};
use crate::models::IdBatch;
use crate::params::{ParamSet, Role};
use crate::rnn::{
    bilstm_backward, bilstm_encode, lstm_cell, lstm_cell_backward, BiLstmParams, LstmParams, LstmState, MergeMode,
};
use crate::tensor::dot;
use crate::{Arch, Error, Model, ModelConfig, Result, Rng, Tensor};

pub const LAYER_TOL: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-4;
/// Roundoff allowance of a central difference, in units of `ε·max(|L|, 1)/h`.
pub const ROUNDOFF_UNITS: f64 = 32.0;
/// One-sided slopes differing by more than this fraction mark a kink
/// (ReLU at zero, a max-pool tie) inside `[θ − h, θ + h]`.
pub const KINK_JUMP: f64 = 1e-2;
/// How closely the analytic gradient must match the smooth side of a kink.
pub const KINK_SIDE_TOL: f64 = 1e-3;

pub const LAYER_CASES: &[&str] = &[
    "dense",
    "text_conv",
    "conv1d",
    "batchnorm",
    "relu",
    "pool_max1",
    "pool_kmax",
    "pool_avg",
    "dropout",
    "bce",
    "embedding",
    "lstm_cell",
    "bilstm_encoder",
    "merge_weighted",
];

pub const MODEL_CASES: &[&str] = &["kim_cnn", "deep_cnn", "bilstm", "cnn_bilstm"];

type EvalFn = Box<dyn Fn(&[Tensor]) -> Result<(f64, Vec<Tensor>)>>;

pub struct GradCase {
    pub name: String,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
    /// Leading coordinates of each tensor excluded from differencing; their
    /// analytic gradient must be exactly zero (the embedding pad row).
    pub pinned: Vec<usize>,
    pub tol: f64,
    eval: EvalFn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Overrides the case tolerance when set.
    pub tol: Option<f64>,
    pub min_samples: usize,
    pub seed: u64,
    /// Doubles the analytic gradient, to confirm the harness can fail.
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, tol: None, min_samples: 20, seed: 7, corrupt: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub name: String,
    pub checked: usize,
    /// Largest relative error among coordinates resolvable above roundoff.
    pub max_rel_err: f64,
    /// Coordinates whose relative error exceeded the tolerance but whose
    /// absolute disagreement lies within the central-difference roundoff bound.
    pub roundoff_limited: usize,
    /// Failing coordinates explained by a kink within `h`: the analytic
    /// gradient matches one of the one-sided slopes, or a central difference
    /// at `h/10` agrees.
    pub kinks: usize,
    /// Whether all pinned coordinates had an exactly zero analytic gradient.
    pub pinned_zero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub case: String,
    pub tol: f64,
    pub tensors: Vec<TensorReport>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_err <= self.tol && t.pinned_zero)
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

impl GradCase {
    pub fn new(
        name: &str,
        named: Vec<(String, Tensor)>,
        tol: f64,
        eval: impl Fn(&[Tensor]) -> Result<(f64, Vec<Tensor>)> + 'static,
    ) -> Self {
        let pinned = vec![0; named.len()];
        let (names, tensors) = named.into_iter().unzip();
        Self { name: name.into(), names, tensors, pinned, tol, eval: Box::new(eval) }
    }

    /// Loss and analytic gradients at `tensors`.
    pub fn evaluate(&self, tensors: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
        (self.eval)(tensors)
    }

    /// Builds a named case with a deterministic seed.
    pub fn named(name: &str, seed: u64) -> Result<Self> {
        let mut rng = Rng::new(seed);
        if let Some(arch) = Arch::from_name(name) {
            return model_case(arch, &mut rng);
        }
        layer_case(name, &mut rng)
    }
}

/// Compares analytic and central-difference gradients on sampled coordinates.
pub fn grad_check(case: &GradCase, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let (loss, mut analytic) = (case.eval)(&case.tensors)?;
    let (again, _) = (case.eval)(&case.tensors)?;
    if loss.to_bits() != again.to_bits() {
        return Err(Error::Harness(format!("{}: forward is not deterministic ({loss} vs {again})", case.name)));
    }
    if analytic.len() != case.tensors.len() || analytic.iter().zip(&case.tensors).any(|(g, t)| g.shape() != t.shape()) {
        return Err(Error::Harness(format!("{}: gradient list does not match the inputs", case.name)));
    }
    if opts.corrupt {
        analytic = analytic.iter().map(|g| g.scale(2.0)).collect();
    }
    let tol = opts.tol.unwrap_or(case.tol);
    let roundoff = ROUNDOFF_UNITS * f64::EPSILON * loss.abs().max(1.0) / opts.h;
    let mut rng = Rng::with_stream(opts.seed, 0x6c3c);
    let mut point = case.tensors.clone();
    let mut reports = Vec::with_capacity(point.len());
    for k in 0..point.len() {
        let pinned = case.pinned[k];
        let pinned_zero = analytic[k].data()[..pinned].iter().all(|&g| g == 0.0);
        let free = point[k].len() - pinned;
        let mut coords: Vec<usize> = rng.permutation(free).into_iter().map(|i| i + pinned).collect();
        coords.truncate(opts.min_samples.max(1));
        coords.sort_unstable();
        let mut max_rel_err: f64 = 0.0;
        let mut roundoff_limited = 0;
        let mut kinks = 0;
        for &i in &coords {
            let orig = point[k].data()[i];
            point[k].data_mut()[i] = orig + opts.h;
            let (plus, _) = (case.eval)(&point)?;
            point[k].data_mut()[i] = orig - opts.h;
            let (minus, _) = (case.eval)(&point)?;
            point[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.h);
            let a = analytic[k].data()[i];
            let err = rel_err(a, numeric);
            let right = (plus - loss) / opts.h;
            let left = (loss - minus) / opts.h;
            if err <= tol {
                max_rel_err = max_rel_err.max(err);
            } else if (a - numeric).abs() <= roundoff {
                roundoff_limited += 1;
            } else if (rel_err(right, left) > KINK_JUMP && rel_err(a, right).min(rel_err(a, left)) <= KINK_SIDE_TOL)
                || refined_agrees(case, &mut point, k, i, a, opts.h / 10.0, tol, roundoff * 10.0)?
            {
                kinks += 1;
            } else {
                max_rel_err = max_rel_err.max(err);
            }
        }
        reports.push(TensorReport {
            name: case.names[k].clone(),
            checked: coords.len(),
            max_rel_err,
            roundoff_limited,
            kinks,
            pinned_zero,
        });
    }
    Ok(GradCheckReport { case: case.name.clone(), tol, tensors: reports })
}

/// Central difference at a smaller step: agreement there means the kink lay
/// between `h_small` and the original step.
#[allow(clippy::too_many_arguments)]
fn refined_agrees(
    case: &GradCase,
    point: &mut [Tensor],
    k: usize,
    i: usize,
    analytic: f64,
    h_small: f64,
    tol: f64,
    roundoff: f64,
) -> Result<bool> {
    let orig = point[k].data()[i];
    point[k].data_mut()[i] = orig + h_small;
    let (plus, _) = (case.eval)(point)?;
    point[k].data_mut()[i] = orig - h_small;
    let (minus, _) = (case.eval)(point)?;
    point[k].data_mut()[i] = orig;
    let numeric = (plus - minus) / (2.0 * h_small);
    Ok(rel_err(analytic, numeric) <= tol || (analytic - numeric).abs() <= roundoff)
}

fn named(pairs: &[(&str, &Tensor)]) -> Vec<(String, Tensor)> {
    pairs.iter().map(|(n, t)| (String::from(*n), (*t).clone())).collect()
}

fn assign<P: ParamSet + Clone>(template: &P, values: &[Tensor]) -> P {
    let mut p = template.clone();
    for (slot, v) in p.tensors_mut().into_iter().zip(values) {
        *slot = v.clone();
    }
    p
}

fn param_pairs<P: ParamSet>(p: &P, prefix: &str) -> Vec<(String, Tensor)> {
    let mut out = Vec::new();
    p.collect(prefix, &mut out);
    out.into_iter().map(|n| (n.name, n.tensor.clone())).collect()
}

/// Values spaced at least 0.05 apart so max selection never flips within `h`.
fn separated(shape: &[usize], rng: &mut Rng) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let perm = rng.permutation(n);
    let jitter = rng.uniform(&[n], -0.01, 0.01)?;
    let data = perm.iter().zip(jitter.data()).map(|(&p, j)| (p as f64 - n as f64 / 2.0) * 0.05 + j).collect();
    Tensor::new(shape, data)
}

fn projection_for(output: &Tensor, rng: &mut Rng) -> Result<Tensor> {
    rng.uniform(output.shape(), -1.0, 1.0)
}

fn layer_case(name: &str, rng: &mut Rng) -> Result<GradCase> {
    let tol = LAYER_TOL;
    let case = match name {
        "dense" => {
            let x = rng.uniform(&[4, 3], -1.0, 1.0)?;
            let p = DenseParams { weight: rng.uniform(&[2, 3], -1.0, 1.0)?, bias: rng.uniform(&[2], -1.0, 1.0)? };
            let r = projection_for(&dense_forward(&x, &p)?.0, rng)?;
            GradCase::new(name, named(&[("x", &x), ("weight", &p.weight), ("bias", &p.bias)]), tol, move |t| {
                let p = DenseParams { weight: t[1].clone(), bias: t[2].clone() };
                let (y, cache) = dense_forward(&t[0], &p)?;
                let g = dense_backward(&r, cache, &p)?;
                Ok((dot(y.data(), r.data()), vec![g.input, g.weight, g.bias]))
            })
        }
        "text_conv" | "conv1d" => {
            let text = name == "text_conv";
            let geometry = ConvGeometry { padding: 1, dilation: 2, stride: 2 };
            let (x, w) = if text {
                (rng.uniform(&[2, 2, 7, 3], -1.0, 1.0)?, rng.uniform(&[3, 2, 2, 3], -1.0, 1.0)?)
            } else {
                (rng.uniform(&[2, 2, 7], -1.0, 1.0)?, rng.uniform(&[3, 2, 3], -1.0, 1.0)?)
            };
            let b = rng.uniform(&[3], -1.0, 1.0)?;
            let run = move |t: &[Tensor]| {
                if text {
                    text_conv_forward(&t[0], &t[1], Some(&t[2]), geometry)
                } else {
                    conv1d_forward(&t[0], &t[1], Some(&t[2]), geometry)
                }
            };
            let r = projection_for(&run(&[x.clone(), w.clone(), b.clone()])?.0, rng)?;
            GradCase::new(name, named(&[("x", &x), ("weight", &w), ("bias", &b)]), tol, move |t| {
                let (y, cache) = run(t)?;
                let g = if text { text_conv_backward(&r, cache, &t[1])? } else { conv1d_backward(&r, cache, &t[1])? };
                Ok((dot(y.data(), r.data()), vec![g.input, g.weight, g.bias.expect("bias given")]))
            })
        }
        "batchnorm" => {
            let x = rng.uniform(&[3, 2, 4], -2.0, 2.0)?;
            let gamma = rng.uniform(&[2], 0.5, 1.5)?;
            let beta = rng.uniform(&[2], -0.5, 0.5)?;
            let r = projection_for(&x, rng)?;
            GradCase::new(name, named(&[("x", &x), ("gamma", &gamma), ("beta", &beta)]), tol, move |t| {
                let mut p = BatchNormParams::new(2);
                p.gamma = t[1].clone();
                p.beta = t[2].clone();
                let (y, cache, _) = batchnorm_forward(&t[0], &p, Mode::Check)?;
                let (dx, dg, db) = batchnorm_backward(&r, cache, &p.gamma)?;
                Ok((dot(y.data(), r.data()), vec![dx, dg, db]))
            })
        }
        "relu" => {
            let x = separated(&[3, 7], rng)?.add_scalar(0.025);
            let r = projection_for(&x, rng)?;
            GradCase::new(name, named(&[("x", &x)]), tol, move |t| {
                let (y, cache) = relu_forward(&t[0]);
                Ok((dot(y.data(), r.data()), vec![relu_backward(&r, cache)?]))
            })
        }
        "pool_max1" | "pool_kmax" | "pool_avg" => {
            let kind = match name {
                "pool_max1" => Pooling::Max1,
                "pool_kmax" => Pooling::KMax(3),
                _ => Pooling::Avg,
            };
            let x = separated(&[2, 2, 5], rng)?;
            let r = projection_for(&pool_forward(&x, kind)?.0, rng)?;
            GradCase::new(name, named(&[("x", &x)]), tol, move |t| {
                let (y, cache) = pool_forward(&t[0], kind)?;
                Ok((dot(y.data(), r.data()), vec![pool_backward(&r, cache)?]))
            })
        }
        "dropout" => {
            let x = rng.uniform(&[3, 5], -1.0, 1.0)?;
            let r = projection_for(&x, rng)?;
            let seed = rng.next_u32() as u64;
            GradCase::new(name, named(&[("x", &x)]), tol, move |t| {
                let (y, cache) = dropout_forward(&t[0], 0.4, &mut Rng::new(seed), Mode::Train)?;
                Ok((dot(y.data(), r.data()), vec![dropout_backward(&r, cache)?]))
            })
        }
        "bce" => {
            let z = rng.uniform(&[6], -4.0, 4.0)?;
            let labels = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
            GradCase::new(name, named(&[("logits", &z)]), tol, move |t| {
                let (loss, g) = bce_with_logits(&t[0], &labels)?;
                Ok((loss, vec![g]))
            })
        }
        "embedding" => {
            let (vocab, dim) = (6, 3);
            let mut table = rng.uniform(&[vocab, dim], -1.0, 1.0)?;
            table.data_mut()[..dim].fill(0.0);
            let ids = vec![0, 2, 5, 0, 1, 2, 4, 3];
            let r = rng.uniform(&[2, 1, 4, dim], -1.0, 1.0)?;
            let mut case = GradCase::new(name, named(&[("table", &table)]), tol, move |t| {
                let y = embedding_forward(&[&t[0]], &ids, 2)?;
                Ok((dot(y.data(), r.data()), vec![embedding_backward(&r, &ids, 0, vocab)?]))
            });
            case.pinned[0] = dim;
            case
        }
        "lstm_cell" => {
            let (b, e, hd) = (2, 3, 4);
            let x = rng.uniform(&[b, e], -1.0, 1.0)?;
            let h = rng.uniform(&[b, hd], -1.0, 1.0)?;
            let c = rng.uniform(&[b, hd], -1.0, 1.0)?;
            let mut params = LstmParams::random(e, hd, rng)?;
            for bias in &mut params.biases {
                *bias = bias.add(&rng.uniform(&[hd], -0.5, 0.5)?)?;
            }
            let rh = rng.uniform(&[b, hd], -1.0, 1.0)?;
            let rc = rng.uniform(&[b, hd], -1.0, 1.0)?;
            let mut pairs = named(&[("x", &x), ("h_prev", &h), ("c_prev", &c)]);
            pairs.extend(param_pairs(&params, ""));
            GradCase::new(name, pairs, tol, move |t| {
                let p = assign(&params, &t[3..]);
                let prev = LstmState { h: t[1].clone(), c: t[2].clone() };
                let (next, cache) = lstm_cell(&t[0], &prev, &p)?;
                let loss = dot(next.h.data(), rh.data()) + dot(next.c.data(), rc.data());
                let grad = LstmState { h: rh.clone(), c: rc.clone() };
                let (dx, dprev, dp) = lstm_cell_backward(&grad, cache, &p)?;
                let mut grads = vec![dx, dprev.h, dprev.c];
                grads.extend(dp.named().into_iter().map(|n| n.tensor.clone()));
                Ok((loss, grads))
            })
        }
        "bilstm_encoder" | "merge_weighted" => {
            let merge = if name == "merge_weighted" { MergeMode::WeightedSum } else { MergeMode::Concat };
            let x = rng.uniform(&[2, 4, 3], -1.0, 1.0)?;
            let params = BiLstmParams::random(3, 3, merge, rng)?;
            let out = bilstm_encode(&x, &params)?.0;
            let r_tok = projection_for(&out.per_token, rng)?;
            let r_last = projection_for(&out.last, rng)?;
            let mut pairs = named(&[("x", &x)]);
            pairs.extend(param_pairs(&params, ""));
            GradCase::new(name, pairs, tol, move |t| {
                let p = assign(&params, &t[1..]);
                let (out, cache) = bilstm_encode(&t[0], &p)?;
                let loss = dot(out.per_token.data(), r_tok.data()) + dot(out.last.data(), r_last.data());
                let (dx, dp) = bilstm_backward(Some(&r_tok), Some(&r_last), cache, &p)?;
                let mut grads = vec![dx];
                grads.extend(dp.named().into_iter().map(|n| n.tensor.clone()));
                Ok((loss, grads))
            })
        }
        _ => return Err(Error::Argument(format!("unknown gradient-check case `{name}`"))),
    };
    Ok(case)
}

/// The tiny configuration used for end-to-end checks: vocabulary 6,
/// length 6, width 3, two filters per size.
pub fn tiny_config(arch: Arch) -> ModelConfig {
    let mut c = ModelConfig::new(arch);
    c.filter_sizes = match arch {
        Arch::Bilstm => vec![],
        Arch::CnnBilstm => vec![1, 3],
        _ => vec![2, 3],
    };
    c.num_filters = 2;
    c.emb_dim = 3;
    c.max_len = 6;
    c.hidden = 3;
    c.fc_hidden = 4;
    c
}

fn model_case(arch: Arch, rng: &mut Rng) -> Result<GradCase> {
    const VOCAB: usize = 6;
    const BATCH: usize = 4;
    let config = tiny_config(arch);
    let mut model = Model::build(config.clone(), VOCAB, rng)?;
    // zero biases over zero pad embeddings would sit exactly on ReLU kinks
    let bias_names: Vec<String> =
        model.named_params().into_iter().filter(|p| p.name.ends_with(".bias")).map(|p| p.name).collect();
    for name in bias_names {
        let b = model.param_mut(&name).expect("listed parameter");
        *b = rng.uniform(b.shape(), -0.2, 0.2)?;
    }
    let len = config.max_len;
    let ids = IdBatch { ids: (0..BATCH * len).map(|_| rng.below(VOCAB)).collect(), batch: BATCH, len };
    let labels: Vec<f64> = (0..BATCH).map(|i| (i % 2) as f64).collect();
    let pairs: Vec<(String, Tensor)> = model
        .named_params()
        .into_iter()
        .filter(|p| p.role == Role::Trainable)
        .map(|p| (p.name, p.tensor.clone()))
        .collect();
    let pinned = pairs.iter().map(|(n, _)| if n == "embedding.trainable" { config.emb_dim } else { 0 }).collect();
    let mask: Vec<bool> = model.named_params().iter().map(|p| p.role == Role::Trainable).collect();
    let mut case = GradCase::new(arch.name(), pairs, MODEL_TOL, move |t| {
        let mut m = model.clone();
        let mut values = t.iter();
        for (slot, keep) in m.params_mut().into_iter().zip(&mask) {
            if *keep {
                *slot = values.next().expect("one value per trainable tensor").clone();
            }
        }
        let step = m.loss_and_grads(&ids, &labels, Mode::Check, &mut Rng::new(0))?;
        let grads = step.grads.named().into_iter().zip(&mask).filter(|(_, k)| **k).map(|(g, _)| g.tensor.clone());
        Ok((step.loss, grads.collect()))
    });
    case.pinned = pinned;
    Ok(case)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_passes() {
        for name in LAYER_CASES {
            let case = GradCase::named(name, 1).unwrap();
            let report = grad_check(&case, &GradCheckOptions::default()).unwrap();
            assert!(report.passed(), "{report:#?}");
        }
    }

    #[test]
    fn dense_at_tight_tolerance() {
        let case = GradCase::named("dense", 2).unwrap();
        let opts = GradCheckOptions { tol: Some(1e-6), ..GradCheckOptions::default() };
        assert!(grad_check(&case, &opts).unwrap().passed());
    }

    #[test]
    fn corrupted_gradient_fails() {
        let case = GradCase::named("dense", 3).unwrap();
        let report = grad_check(&case, &GradCheckOptions { corrupt: true, ..GradCheckOptions::default() }).unwrap();
        assert!(!report.passed());
        assert!(report.max_rel_err() >= 0.3);
    }

    #[test]
    fn pad_row_gradient_is_exactly_zero() {
        let case = GradCase::named("embedding", 4).unwrap();
        let report = grad_check(&case, &GradCheckOptions::default()).unwrap();
        assert!(report.tensors[0].pinned_zero);
    }

    #[test]
    fn nondeterminism_detected() {
        use core::sync::atomic::{AtomicU64, Ordering};
        static CALLS: AtomicU64 = AtomicU64::new(0);
        let case = GradCase::new("flaky", vec![(String::from("x"), Tensor::zeros(&[1]))], 1e-5, |t| {
            let n = CALLS.fetch_add(1, Ordering::Relaxed) as f64;
            Ok((n, vec![t[0].zeros_like()]))
        });
        assert!(matches!(grad_check(&case, &GradCheckOptions::default()), Err(Error::Harness(_))));
    }

    #[test]
    fn unknown_case() {
        assert!(matches!(GradCase::named("softmax", 1), Err(Error::Argument(_))));
    }
}
