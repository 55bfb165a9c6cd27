//! Token-axis convolutions.
//!
//! `text_conv_*` slides kernels whose width equals the word-vector width, so
//! every window covers whole words. `conv1d_*` is the same operation over
//! feature maps without the embedding axis. Both share one kernel routine that
//! treats the input as `[B × C_in × L × E]` (with `E = 1` for `conv1d`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tensor::dot;
use crate::{Error, Result, Tensor};

/// Padding, dilation and stride along the token axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub padding: usize,
    pub dilation: usize,
    pub stride: usize,
}

impl Default for ConvGeometry {
    fn default() -> Self {
        Self { padding: 0, dilation: 1, stride: 1 }
    }
}

impl ConvGeometry {
    pub fn padded(padding: usize) -> Self {
        Self { padding, ..Self::default() }
    }
}

/// Output length of a convolution along one axis:
/// `floor((L_in + 2·padding − dilation·(kernel_size − 1) − 1) / stride + 1)`.
pub fn conv_out_len(l_in: usize, padding: usize, dilation: usize, kernel_size: usize, stride: usize) -> Result<usize> {
    if l_in == 0 || dilation == 0 || kernel_size == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "convolution arguments must be positive (L_in={l_in}, dilation={dilation}, \
             kernel_size={kernel_size}, stride={stride})"
        )));
    }
    let span = dilation * (kernel_size - 1) + 1;
    let padded = l_in + 2 * padding;
    if span > padded {
        return Err(Error::Config(format!(
            "kernel of size {kernel_size} (dilation {dilation}) spans {span} positions but the \
             padded input has only {padded}"
        )));
    }
    Ok((padded - span) / stride + 1)
}

/// Kernel `[C_out × C_in × h × E]` (text) or `[C_out × C_in × h]` (1-D) and optional bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl ConvParams {
    pub fn height(&self) -> usize {
        self.weight.dim(2)
    }
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    geometry: ConvGeometry,
    out_len: usize,
    has_bias: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

#[derive(Clone, Copy)]
struct Dims {
    batch: usize,
    c_in: usize,
    len: usize,
    width: usize,
    c_out: usize,
    height: usize,
    out_len: usize,
}

fn check_bias(bias: Option<&Tensor>, c_out: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::Dimension(format!("conv bias {:?} does not match {c_out} output channels", b.shape())));
        }
    }
    Ok(())
}

fn source_pos(t: usize, delta: usize, len: usize, g: ConvGeometry) -> Option<usize> {
    let p = t * g.stride + delta * g.dilation;
    if p < g.padding || p - g.padding >= len {
        None
    } else {
        Some(p - g.padding)
    }
}

fn forward_kernel(x: &[f64], w: &[f64], bias: Option<&[f64]>, d: Dims, g: ConvGeometry) -> Vec<f64> {
    let mut out = vec![0.0; d.batch * d.c_out * d.out_len];
    for b in 0..d.batch {
        for f in 0..d.c_out {
            let base = bias.map_or(0.0, |bs| bs[f]);
            for t in 0..d.out_len {
                let mut s = base;
                for c in 0..d.c_in {
                    for delta in 0..d.height {
                        let Some(pos) = source_pos(t, delta, d.len, g) else { continue };
                        let xo = ((b * d.c_in + c) * d.len + pos) * d.width;
                        let wo = ((f * d.c_in + c) * d.height + delta) * d.width;
                        s += dot(&x[xo..xo + d.width], &w[wo..wo + d.width]);
                    }
                }
                out[(b * d.c_out + f) * d.out_len + t] = s;
            }
        }
    }
    out
}

fn backward_kernel(grad: &[f64], x: &[f64], w: &[f64], d: Dims, g: ConvGeometry) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    for b in 0..d.batch {
        for f in 0..d.c_out {
            for t in 0..d.out_len {
                let gv = grad[(b * d.c_out + f) * d.out_len + t];
                if gv == 0.0 {
                    continue;
                }
                for c in 0..d.c_in {
                    for delta in 0..d.height {
                        let Some(pos) = source_pos(t, delta, d.len, g) else { continue };
                        let xo = ((b * d.c_in + c) * d.len + pos) * d.width;
                        let wo = ((f * d.c_in + c) * d.height + delta) * d.width;
                        for e in 0..d.width {
                            dw[wo + e] += gv * x[xo + e];
                            dx[xo + e] += gv * w[wo + e];
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

fn bias_grad(grad: &[f64], d: Dims) -> Vec<f64> {
    let mut db = vec![0.0; d.c_out];
    for b in 0..d.batch {
        for (f, slot) in db.iter_mut().enumerate() {
            let o = (b * d.c_out + f) * d.out_len;
            *slot += grad[o..o + d.out_len].iter().sum::<f64>();
        }
    }
    db
}

fn forward_4d(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: ConvGeometry) -> Result<(Tensor, ConvCache)> {
    let (batch, c_in, len, width) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let (c_out, height) = (w.dim(0), w.dim(2));
    if w.dim(1) != c_in {
        return Err(Error::Dimension(format!(
            "kernel {:?} expects {} input channels, input {:?} has {c_in}",
            w.shape(),
            w.dim(1),
            x.shape()
        )));
    }
    check_bias(bias, c_out)?;
    let out_len = conv_out_len(len, g.padding, g.dilation, height, g.stride)?;
    let d = Dims { batch, c_in, len, width, c_out, height, out_len };
    let out = forward_kernel(x.data(), w.data(), bias.map(Tensor::data), d, g);
    let cache = ConvCache { input: x.clone(), geometry: g, out_len, has_bias: bias.is_some() };
    Ok((Tensor::new(&[batch, c_out, out_len], out)?, cache))
}

fn backward_4d(grad: &Tensor, cache: ConvCache, w: &Tensor) -> Result<(Vec<f64>, Vec<f64>, Option<Tensor>)> {
    let x = &cache.input;
    let d = Dims {
        batch: x.dim(0),
        c_in: x.dim(1),
        len: x.dim(2),
        width: x.dim(3),
        c_out: w.dim(0),
        height: w.dim(2),
        out_len: cache.out_len,
    };
    if grad.shape() != [d.batch, d.c_out, d.out_len] {
        return Err(Error::Dimension(format!(
            "conv upstream gradient {:?}, expected {:?}",
            grad.shape(),
            [d.batch, d.c_out, d.out_len]
        )));
    }
    let (dx, dw) = backward_kernel(grad.data(), x.data(), w.data(), d, cache.geometry);
    let db = if cache.has_bias { Some(Tensor::new(&[d.c_out], bias_grad(grad.data(), d))?) } else { None };
    Ok((dx, dw, db))
}

/// `x: [B × C_in × L × E]`, `w: [C_out × C_in × h × E]` → `[B × C_out × L']`.
pub fn text_conv_forward(
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    geometry: ConvGeometry,
) -> Result<(Tensor, ConvCache)> {
    if x.rank() != 4 || w.rank() != 4 {
        return Err(Error::Dimension(format!(
            "text conv needs rank-4 input and kernel, got {:?} and {:?}",
            x.shape(),
            w.shape()
        )));
    }
    if w.dim(3) != x.dim(3) {
        return Err(Error::Config(format!("kernel width {} must equal the embedding width {}", w.dim(3), x.dim(3))));
    }
    forward_4d(x, w, bias, geometry)
}

pub fn text_conv_backward(grad: &Tensor, cache: ConvCache, w: &Tensor) -> Result<ConvGrads> {
    let shape = cache.input.shape().to_vec();
    let (dx, dw, bias) = backward_4d(grad, cache, w)?;
    Ok(ConvGrads { input: Tensor::new(&shape, dx)?, weight: Tensor::new(w.shape(), dw)?, bias })
}

/// `x: [B × C_in × L]`, `w: [C_out × C_in × h]` → `[B × C_out × L']`.
pub fn conv1d_forward(
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    geometry: ConvGeometry,
) -> Result<(Tensor, ConvCache)> {
    if x.rank() != 3 || w.rank() != 3 {
        return Err(Error::Dimension(format!(
            "conv1d needs rank-3 input and kernel, got {:?} and {:?}",
            x.shape(),
            w.shape()
        )));
    }
    let x4 = x.clone().reshape(&[x.dim(0), x.dim(1), x.dim(2), 1])?;
    let w4 = w.clone().reshape(&[w.dim(0), w.dim(1), w.dim(2), 1])?;
    forward_4d(&x4, &w4, bias, geometry)
}

pub fn conv1d_backward(grad: &Tensor, cache: ConvCache, w: &Tensor) -> Result<ConvGrads> {
    let s = cache.input.shape().to_vec();
    let w4 = w.clone().reshape(&[w.dim(0), w.dim(1), w.dim(2), 1])?;
    let (dx, dw, bias) = backward_4d(grad, cache, &w4)?;
    Ok(ConvGrads { input: Tensor::new(&s[..3], dx)?, weight: Tensor::new(w.shape(), dw)?, bias })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    #[test]
    fn out_len_examples() {
        assert_eq!(conv_out_len(8, 0, 1, 5, 1).unwrap(), 4);
        assert_eq!(conv_out_len(7, 0, 1, 4, 1).unwrap(), 4);
        assert_eq!(conv_out_len(11, 0, 1, 1, 1).unwrap(), 11);
        assert!(conv_out_len(3, 0, 1, 4, 1).is_err());
        assert!(conv_out_len(3, 0, 1, 1, 0).is_err());
    }

    #[test]
    fn all_ones_window_sum() {
        let x = Tensor::full(&[1, 1, 3, 2], 1.0);
        let w = Tensor::full(&[1, 1, 2, 2], 1.0);
        let (y, _) = text_conv_forward(&x, &w, Some(&Tensor::zeros(&[1])), ConvGeometry::default()).unwrap();
        assert_eq!(y.data(), &[4.0, 4.0]);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut rng = Rng::new(5);
        let x = rng.uniform(&[2, 1, 5, 3], -1.0, 1.0).unwrap();
        let w = Tensor::zeros(&[2, 1, 3, 3]);
        let b = Tensor::from_vec(alloc::vec![0.5, -2.0]).unwrap();
        let (y, _) = text_conv_forward(&x, &w, Some(&b), ConvGeometry::default()).unwrap();
        for row in y.data().chunks(3).enumerate() {
            assert!(row.1.iter().all(|&v| v == b.data()[row.0 % 2]));
        }
    }

    #[test]
    fn conv1d_identity_kernel() {
        let mut rng = Rng::new(6);
        let x = rng.uniform(&[2, 1, 6], -1.0, 1.0).unwrap();
        let w = Tensor::full(&[1, 1, 1], 1.0);
        let (y, _) = conv1d_forward(&x, &w, None, ConvGeometry::default()).unwrap();
        assert_eq!(y.data(), x.data());
        let (z, _) =
            conv1d_forward(&Tensor::zeros(&[1, 1, 4]), &w, Some(&Tensor::full(&[1], 0.3)), ConvGeometry::default())
                .unwrap();
        assert!(z.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn config_errors() {
        let x = Tensor::zeros(&[1, 1, 3, 2]);
        let wide = Tensor::zeros(&[1, 1, 2, 3]);
        assert!(matches!(text_conv_forward(&x, &wide, None, ConvGeometry::default()), Err(Error::Config(_))));
        let tall = Tensor::zeros(&[1, 1, 4, 2]);
        assert!(matches!(text_conv_forward(&x, &tall, None, ConvGeometry::default()), Err(Error::Config(_))));
    }

    #[test]
    fn same_padding_keeps_length() {
        let x = Tensor::full(&[1, 1, 5, 2], 1.0);
        let w = Tensor::full(&[1, 1, 3, 2], 1.0);
        let (y, _) = text_conv_forward(&x, &w, None, ConvGeometry::padded(1)).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 6.0, 6.0, 4.0]);
    }
}
