use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_two_class, check_vocab, BowVector};
use crate::math::{exp, ln};
use crate::{Error, Result};

/// Multinomial Naive Bayes with additive smoothing, stored in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub log_prior: [f64; 2],
    /// `log P(w | c)` per class, `vocab_size` entries each.
    pub log_likelihood: [Vec<f64>; 2],
    pub alpha: f64,
}

pub fn nb_fit(docs: &[BowVector], labels: &[u8], vocab_size: usize, alpha: f64) -> Result<NbModel> {
    let class_docs = check_two_class(docs.len(), labels)?;
    check_vocab(docs, vocab_size)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("smoothing α = {alpha} must be finite and non-negative")));
    }
    let mut counts = [vec![0.0; vocab_size], vec![0.0; vocab_size]];
    for (doc, &l) in docs.iter().zip(labels) {
        for &(id, c) in doc.entries() {
            counts[usize::from(l)][id] += f64::from(c);
        }
    }
    let n = docs.len() as f64;
    let log_prior = [ln(class_docs[0] as f64 / n), ln(class_docs[1] as f64 / n)];
    let log_likelihood = counts.map(|row| {
        let denom = row.iter().sum::<f64>() + alpha * vocab_size as f64;
        row.iter().map(|&c| ln((c + alpha) / denom)).collect()
    });
    Ok(NbModel { log_prior, log_likelihood, alpha })
}

fn class_scores(model: &NbModel, doc: &BowVector) -> [f64; 2] {
    let mut s = model.log_prior;
    for &(id, c) in doc.entries() {
        if id < model.log_likelihood[0].len() {
            for k in 0..2 {
                s[k] += f64::from(c) * model.log_likelihood[k][id];
            }
        }
    }
    s
}

/// Predicted label and the log-posterior margin `score(1) − score(0)`.
/// Ties go to label 0; ids outside the vocabulary are ignored.
pub fn nb_predict(model: &NbModel, doc: &BowVector) -> (u8, f64) {
    let [s0, s1] = class_scores(model, doc);
    let margin = s1 - s0;
    (u8::from(margin > 0.0), margin)
}

/// Normalized class posteriors `[P(0 | doc), P(1 | doc)]`.
pub fn nb_posterior(model: &NbModel, doc: &BowVector) -> [f64; 2] {
    let s = class_scores(model, doc);
    let m = s[0].max(s[1]);
    let e = [exp(s[0] - m), exp(s[1] - m)];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}
