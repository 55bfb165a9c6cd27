//! Reference implementations written independently of the library: plain
//! loops over explicit indices, no shared helpers.

#![allow(dead_code)]

use textcnn_core::layers::ConvGeometry;
use textcnn_core::Tensor;

pub fn matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k, n) = (a.dim(0), a.dim(1), b.dim(1));
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a.data()[i * k + p] * b.data()[p * n + j];
            }
            out[i * n + j] = s;
        }
    }
    out
}

fn out_len(l: usize, h: usize, g: ConvGeometry) -> usize {
    let span = g.dilation * (h - 1) + 1;
    (l + 2 * g.padding - span) / g.stride + 1
}

/// `x: [B × C × L × E]`, `w: [F × C × h × E]` → `[B × F × L']`, zero padding on the token axis.
pub fn text_conv(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: ConvGeometry) -> Vec<f64> {
    let (b, c, l, e) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let (f, h) = (w.dim(0), w.dim(2));
    let lo = out_len(l, h, g);
    let mut out = vec![0.0; b * f * lo];
    for bi in 0..b {
        for fi in 0..f {
            for t in 0..lo {
                let mut s = bias.map_or(0.0, |bb| bb.data()[fi]);
                for ci in 0..c {
                    for k in 0..h {
                        let pos = (t * g.stride + k * g.dilation) as isize - g.padding as isize;
                        if pos < 0 || pos >= l as isize {
                            continue;
                        }
                        for d in 0..e {
                            let xv = x.data()[((bi * c + ci) * l + pos as usize) * e + d];
                            let wv = w.data()[((fi * c + ci) * h + k) * e + d];
                            s += xv * wv;
                        }
                    }
                }
                out[(bi * f + fi) * lo + t] = s;
            }
        }
    }
    out
}

/// `x: [B × C × L]`, `w: [F × C × h]` → `[B × F × L']`.
pub fn conv1d(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: ConvGeometry) -> Vec<f64> {
    let (b, c, l) = (x.dim(0), x.dim(1), x.dim(2));
    let (f, h) = (w.dim(0), w.dim(2));
    let lo = out_len(l, h, g);
    let mut out = vec![0.0; b * f * lo];
    for bi in 0..b {
        for fi in 0..f {
            for t in 0..lo {
                let mut s = bias.map_or(0.0, |bb| bb.data()[fi]);
                for ci in 0..c {
                    for k in 0..h {
                        let pos = (t * g.stride + k * g.dilation) as isize - g.padding as isize;
                        if pos >= 0 && pos < l as isize {
                            s += x.data()[(bi * c + ci) * l + pos as usize] * w.data()[(fi * c + ci) * h + k];
                        }
                    }
                }
                out[(bi * f + fi) * lo + t] = s;
            }
        }
    }
    out
}

/// `P(score_pos > score_neg) + ½·P(tie)` over all positive/negative pairs.
pub fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Posterior `[P(0 | probe), P(1 | probe)]` by direct counting in linear
/// space: prior from document counts, smoothed token frequencies, the joint
/// probability as a product over every probe token occurrence.
pub fn nb_posterior(docs: &[Vec<usize>], labels: &[u8], vocab: usize, alpha: f64, probe: &[usize]) -> [f64; 2] {
    let mut joint = [0.0; 2];
    for c in 0..2u8 {
        let n_class = labels.iter().filter(|&&l| l == c).count() as f64;
        let mut p = n_class / labels.len() as f64;
        let mut total = 0.0;
        let mut count = vec![0.0; vocab];
        for (doc, &l) in docs.iter().zip(labels) {
            if l == c {
                for &tok in doc {
                    count[tok] += 1.0;
                    total += 1.0;
                }
            }
        }
        for &tok in probe {
            p *= (count[tok] + alpha) / (total + alpha * vocab as f64);
        }
        joint[usize::from(c)] = p;
    }
    let z = joint[0] + joint[1];
    [joint[0] / z, joint[1] / z]
}

/// χ² from an explicit 2-row contingency table of summed counts.
pub fn chi2(docs: &[Vec<usize>], labels: &[u8], vocab: usize) -> Vec<f64> {
    let n = labels.len() as f64;
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let class_share = [(n - n1) / n, n1 / n];
    (0..vocab)
        .map(|f| {
            let mut table = [0.0f64; 2];
            for (doc, &l) in docs.iter().zip(labels) {
                table[usize::from(l)] += doc.iter().filter(|&&t| t == f).count() as f64;
            }
            let total = table[0] + table[1];
            let mut stat = 0.0;
            for c in 0..2 {
                let expected = class_share[c] * total;
                if expected > 0.0 {
                    stat += (table[c] - expected).powi(2) / expected;
                }
            }
            stat
        })
        .collect()
}

/// Scalar Adam with bias correction, written out per step.
pub fn adam_scalar(theta0: f64, grads: &[f64], lr: f64) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut theta) = (0.0, 0.0, theta0);
    let mut trace = Vec::new();
    for (t, &g) in grads.iter().enumerate() {
        let step = (t + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(step));
        let v_hat = v / (1.0 - b2.powi(step));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        trace.push(theta);
    }
    trace
}
