use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Mode;
use crate::math::sqrt;
use crate::{Error, Result, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel scale/shift plus running statistics for `[B × C × L]` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

/// Batch mean and (biased) variance per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

impl BatchNormParams {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// `r ← (1 − m)·r + m·batch_stat` with `m = BN_MOMENTUM`.
    pub fn update_running(&mut self, stats: &BnStats) {
        let m = BN_MOMENTUM;
        for (r, s) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = (1.0 - m) * *r + m * s;
        }
        for (r, s) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = (1.0 - m) * *r + m * s;
        }
    }
}

fn channel_values(x: &Tensor, c: usize) -> impl Iterator<Item = usize> + '_ {
    let (b, ch, l) = (x.dim(0), x.dim(1), x.dim(2));
    (0..b).flat_map(move |bi| {
        let start = (bi * ch + c) * l;
        start..start + l
    })
}

/// Normalizes each channel over the batch and length axes.
///
/// Returns batch statistics in `Mode::Train` so the caller can fold them into
/// the running averages.
pub fn batchnorm_forward(
    x: &Tensor,
    params: &BatchNormParams,
    mode: Mode,
) -> Result<(Tensor, BnCache, Option<BnStats>)> {
    if x.rank() != 3 || x.dim(1) != params.channels() {
        return Err(Error::Dimension(format!(
            "batchnorm over {} channels got input {:?}",
            params.channels(),
            x.shape()
        )));
    }
    let channels = x.dim(1);
    let n = x.dim(0) * x.dim(2);
    let batch_stats = mode != Mode::Eval;
    if batch_stats && n < 2 {
        return Err(Error::Config(format!("batchnorm in training needs at least 2 values per channel, got {n}")));
    }
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    if batch_stats {
        for c in 0..channels {
            let mu = channel_values(x, c).map(|i| x.data()[i]).sum::<f64>() / n as f64;
            let v = channel_values(x, c).map(|i| (x.data()[i] - mu) * (x.data()[i] - mu)).sum::<f64>() / n as f64;
            mean[c] = mu;
            var[c] = v;
        }
    } else {
        mean.copy_from_slice(params.running_mean.data());
        var.copy_from_slice(params.running_var.data());
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / sqrt(v + BN_EPS)).collect();
    let mut xhat = x.clone();
    let mut y = x.clone();
    for c in 0..channels {
        let (g, b) = (params.gamma.data()[c], params.beta.data()[c]);
        for i in channel_values(x, c) {
            let h = (x.data()[i] - mean[c]) * inv_std[c];
            xhat.data_mut()[i] = h;
            y.data_mut()[i] = g * h + b;
        }
    }
    let stats = (mode == Mode::Train).then_some(BnStats { mean, var });
    Ok((y, BnCache { xhat, inv_std, batch_stats }, stats))
}

/// Returns `(d_input, d_gamma, d_beta)`.
pub fn batchnorm_backward(grad: &Tensor, cache: BnCache, gamma: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let xhat = &cache.xhat;
    if grad.shape() != xhat.shape() {
        return Err(Error::Dimension(format!("batchnorm gradient {:?} vs cached {:?}", grad.shape(), xhat.shape())));
    }
    let channels = xhat.dim(1);
    let n = (xhat.dim(0) * xhat.dim(2)) as f64;
    let mut dx = grad.zeros_like();
    let mut dgamma = vec![0.0; channels];
    let mut dbeta = vec![0.0; channels];
    for c in 0..channels {
        let g = gamma.data()[c];
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for i in channel_values(xhat, c) {
            sum_dy += grad.data()[i];
            sum_dy_xhat += grad.data()[i] * xhat.data()[i];
        }
        dgamma[c] = sum_dy_xhat;
        dbeta[c] = sum_dy;
        let s = cache.inv_std[c];
        for i in channel_values(xhat, c) {
            dx.data_mut()[i] = if cache.batch_stats {
                g * s / n * (n * grad.data()[i] - sum_dy - xhat.data()[i] * sum_dy_xhat)
            } else {
                g * s * grad.data()[i]
            };
        }
    }
    Ok((dx, Tensor::new(&[channels], dgamma)?, Tensor::new(&[channels], dbeta)?))
}
