//! Accuracy, confusion matrix, ROC curve and AUC for binary labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Class decision at probability 0.5, i.e. logit 0. A logit of exactly 0 maps to 0.
pub fn label_from_logit(z: f64) -> u8 {
    u8::from(z > 0.0)
}

pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    check_pair(preds.len(), labels.len())?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `[[TN, FP], [FN, TP]]`.
pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<[[usize; 2]; 2]> {
    check_pair(preds.len(), labels.len())?;
    let mut m = [[0; 2]; 2];
    for (&p, &l) in preds.iter().zip(labels) {
        m[usize::from(l != 0)][usize::from(p != 0)] += 1;
    }
    Ok(m)
}

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Argument(format!("{a} predictions for {b} labels")));
    }
    if a == 0 {
        return Err(Error::Argument("metrics need at least one example".into()));
    }
    Ok(())
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Argument("ROC needs both classes present".into()));
    }
    Ok((pos, neg))
}

/// `(FPR, TPR)` points for thresholds at each distinct score in descending
/// order, starting at `(0, 0)`. Equal scores move together.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under [`roc_curve`].
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let pts = roc_curve(scores, labels)?;
    Ok(pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: [[usize; 2]; 2],
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
}

impl EvalReport {
    /// Thresholds logits at 0 for accuracy and confusion; ranks them for ROC.
    pub fn from_logits(logits: &[f64], labels: &[u8]) -> Result<Self> {
        let preds: Vec<u8> = logits.iter().map(|&z| label_from_logit(z)).collect();
        Ok(Self {
            accuracy: accuracy(&preds, labels)?,
            confusion: confusion(&preds, labels)?,
            roc: roc_curve(logits, labels)?,
            auc: auc(logits, labels)?,
        })
    }
}
