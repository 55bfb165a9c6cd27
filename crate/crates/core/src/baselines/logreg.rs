use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_two_class, check_vocab, BowVector};
use crate::math::{exp, ln_1p, sigmoid};
use crate::{Error, Result, Rng};

pub const DEFAULT_C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const ITERATIONS: usize = 500;
const LEARNING_RATE: f64 = 0.1;

/// χ² statistic of every feature against the class, on summed counts:
/// observed `O[c][f]` is the total count of `f` in class `c`, expected is the
/// feature total split by the class document proportions. Features that never
/// occur score 0.
pub fn chi2_scores(docs: &[BowVector], labels: &[u8], vocab_size: usize) -> Result<Vec<f64>> {
    let class_docs = check_two_class(docs.len(), labels)?;
    check_vocab(docs, vocab_size)?;
    let mut observed = [vec![0.0; vocab_size], vec![0.0; vocab_size]];
    for (doc, &l) in docs.iter().zip(labels) {
        for &(id, c) in doc.entries() {
            observed[usize::from(l)][id] += f64::from(c);
        }
    }
    let n = docs.len() as f64;
    let prob = [class_docs[0] as f64 / n, class_docs[1] as f64 / n];
    Ok((0..vocab_size)
        .map(|f| {
            let total = observed[0][f] + observed[1][f];
            (0..2)
                .map(|c| {
                    let e = prob[c] * total;
                    if e > 0.0 {
                        (observed[c][f] - e) * (observed[c][f] - e) / e
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect())
}

/// The `k` highest-scoring feature ids with their scores; ties go to the lower id.
pub fn chi2_select(docs: &[BowVector], labels: &[u8], vocab_size: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    if k > vocab_size {
        return Err(Error::Argument(format!("cannot select {k} of {vocab_size} features")));
    }
    let scores = chi2_scores(docs, labels, vocab_size)?;
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

/// Sparse feature row `(column, value)`.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LogReg {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Inverse regularization strength.
    pub c: f64,
}

impl LogReg {
    pub fn decision(&self, x: &[(usize, f64)]) -> f64 {
        x.iter().map(|&(j, v)| self.weights[j] * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[(usize, f64)]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

fn margin(w: &[f64], b: f64, x: &[(usize, f64)]) -> f64 {
    x.iter().map(|&(j, v)| w[j] * v).sum::<f64>() + b
}

/// Mean logistic loss plus `‖w‖²/(2C)`; the bias is not penalized.
pub fn logreg_objective(w: &[f64], b: f64, xs: &[Row], ys: &[u8], c: f64) -> f64 {
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = margin(w, b, x);
            z.max(0.0) - z * f64::from(y) + ln_1p(exp(-z.abs()))
        })
        .sum();
    loss / xs.len() as f64 + w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c)
}

fn loss_gradient(w: &[f64], b: f64, xs: &[Row], ys: &[u8]) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let r = (sigmoid(margin(w, b, x)) - f64::from(y)) / n;
        for &(j, v) in x {
            gw[j] += r * v;
        }
        gb += r;
    }
    (gw, gb)
}

/// Gradient of [`logreg_objective`].
pub fn logreg_gradient(w: &[f64], b: f64, xs: &[Row], ys: &[u8], c: f64) -> (Vec<f64>, f64) {
    let (mut gw, gb) = loss_gradient(w, b, xs, ys);
    for (g, v) in gw.iter_mut().zip(w) {
        *g += v / c;
    }
    (gw, gb)
}

/// Full-batch proximal gradient descent: a gradient step on the mean loss,
/// then the exact proximal map of the penalty, `w ← w / (1 + lr/C)`. Plain
/// gradient steps diverge once `lr/C > 2`.
pub fn logreg_fit(xs: &[Row], ys: &[u8], dim: usize, c: f64) -> Result<LogReg> {
    check_two_class(xs.len(), ys)?;
    if !(c > 0.0) {
        return Err(Error::Argument(format!("C = {c} must be positive")));
    }
    if let Some(&(j, _)) = xs.iter().flatten().find(|(j, _)| *j >= dim) {
        return Err(Error::Argument(format!("feature column {j} outside dimension {dim}")));
    }
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let shrink = 1.0 / (1.0 + LEARNING_RATE / c);
    for _ in 0..ITERATIONS {
        let (gw, gb) = loss_gradient(&w, b, xs, ys);
        for (v, g) in w.iter_mut().zip(&gw) {
            *v = (*v - LEARNING_RATE * g) * shrink;
        }
        b -= LEARNING_RATE * gb;
    }
    Ok(LogReg { weights: w, bias: b, c })
}

/// Picks `C` from `grid` by mean validation accuracy over stratified folds
/// (ties go to the larger `C`), then refits on all rows.
pub fn logreg_cv_fit(xs: &[Row], ys: &[u8], dim: usize, grid: &[f64], folds: usize, seed: u64) -> Result<LogReg> {
    let counts = check_two_class(xs.len(), ys)?;
    if folds < 2 || counts.iter().any(|&n| n < folds) {
        return Err(Error::Argument(format!(
            "{folds}-fold cross-validation needs at least {folds} examples per class, got {counts:?}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Argument("empty C grid".into()));
    }
    let mut rng = Rng::with_stream(seed, 0xc5);
    let mut fold_of = vec![0; xs.len()];
    for class in 0..2u8 {
        let members: Vec<usize> = (0..xs.len()).filter(|&i| ys[i] == class).collect();
        for (pos, k) in rng.permutation(members.len()).into_iter().enumerate() {
            fold_of[members[k]] = pos % folds;
        }
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &c in &sorted {
        let mut acc = 0.0;
        for f in 0..folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..xs.len() {
                if fold_of[i] == f {
                    vx.push(xs[i].clone());
                    vy.push(ys[i]);
                } else {
                    tx.push(xs[i].clone());
                    ty.push(ys[i]);
                }
            }
            let m = logreg_fit(&tx, &ty, dim, c)?;
            acc += vx.iter().zip(&vy).filter(|(x, &y)| m.predict(x) == y).count() as f64 / vx.len() as f64;
        }
        let mean = acc / folds as f64;
        if mean >= best.0 {
            best = (mean, c);
        }
    }
    logreg_fit(xs, ys, dim, best.1)
}

/// Count vectors → χ² top-`k` features → cross-validated logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Chi2LogReg {
    pub selected: Vec<usize>,
    column: Vec<Option<usize>>,
    pub model: LogReg,
}

impl Chi2LogReg {
    pub fn fit(
        docs: &[BowVector],
        labels: &[u8],
        vocab_size: usize,
        k: usize,
        grid: &[f64],
        folds: usize,
        seed: u64,
    ) -> Result<Self> {
        let selected: Vec<usize> = chi2_select(docs, labels, vocab_size, k)?.into_iter().map(|(id, _)| id).collect();
        let mut column = vec![None; vocab_size];
        for (j, &id) in selected.iter().enumerate() {
            column[id] = Some(j);
        }
        let rows: Vec<Row> = docs.iter().map(|d| project(&column, d)).collect();
        let model = logreg_cv_fit(&rows, labels, selected.len(), grid, folds, seed)?;
        Ok(Self { selected, column, model })
    }

    pub fn decision(&self, doc: &BowVector) -> f64 {
        self.model.decision(&project(&self.column, doc))
    }

    pub fn predict(&self, doc: &BowVector) -> u8 {
        u8::from(self.decision(doc) > 0.0)
    }
}

fn project(column: &[Option<usize>], doc: &BowVector) -> Row {
    doc.entries().iter().filter_map(|&(id, c)| column.get(id).copied().flatten().map(|j| (j, f64::from(c)))).collect()
}
