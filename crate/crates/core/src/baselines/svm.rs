use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_two_class, check_vocab, BowVector};
use crate::{Error, Result, Rng};

/// Linear classifier `sign(w·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn decision(&self, doc: &BowVector) -> f64 {
        let dot: f64 = doc
            .entries()
            .iter()
            .filter(|&&(id, _)| id < self.weights.len())
            .map(|&(id, c)| self.weights[id] * f64::from(c))
            .sum();
        dot + self.bias
    }

    /// Label 1 iff the decision value is positive.
    pub fn predict(&self, doc: &BowVector) -> u8 {
        u8::from(self.decision(doc) > 0.0)
    }
}

/// `λ/2·(‖w‖² + b²) + mean hinge loss`, with labels mapped to ±1.
pub fn svm_objective(model: &SvmModel, docs: &[BowVector], labels: &[u8], lambda: f64) -> f64 {
    let reg = model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias;
    let hinge: f64 = docs
        .iter()
        .zip(labels)
        .map(|(d, &l)| {
            let y = if l == 1 { 1.0 } else { -1.0 };
            (1.0 - y * model.decision(d)).max(0.0)
        })
        .sum();
    lambda / 2.0 * reg + hinge / docs.len() as f64
}

/// Pegasos: one pass per epoch over a seeded permutation, step `1/(λt)`.
/// The bias is treated as the weight of a constant feature and regularized
/// with the others.
pub fn svm_fit(
    docs: &[BowVector],
    labels: &[u8],
    vocab_size: usize,
    lambda: f64,
    epochs: usize,
    rng: &mut Rng,
) -> Result<SvmModel> {
    check_two_class(docs.len(), labels)?;
    check_vocab(docs, vocab_size)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("λ = {lambda} must be positive")));
    }
    // w = scale · v, so the per-step shrink costs O(1)
    let mut v = vec![0.0; vocab_size];
    let mut v_bias = 0.0;
    let mut scale = 1.0;
    let mut t = 0u64;
    for _ in 0..epochs {
        for i in rng.permutation(docs.len()) {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = if labels[i] == 1 { 1.0 } else { -1.0 };
            let doc = &docs[i];
            let margin = y * scale * (doc.entries().iter().map(|&(id, c)| v[id] * f64::from(c)).sum::<f64>() + v_bias);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.fill(0.0);
                v_bias = 0.0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for &(id, c) in doc.entries() {
                    v[id] += step * f64::from(c);
                }
                v_bias += step;
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|x| *x *= scale);
                v_bias *= scale;
                scale = 1.0;
            }
        }
    }
    Ok(SvmModel { weights: v.iter().map(|x| x * scale).collect(), bias: v_bias * scale })
}
