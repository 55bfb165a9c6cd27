//! Library-versus-oracle sweeps shared by the oracle tests and the acceptance
//! run. Each returns the largest absolute disagreement it saw.

#![allow(dead_code)]

use textcnn_core::baselines::{nb_fit, nb_posterior, BowVector};
use textcnn_core::layers::{conv1d_forward, text_conv_forward, ConvGeometry};
use textcnn_core::metrics::auc;
use textcnn_core::rnn::{bilstm_encode, BiLstmParams, MergeMode};
use textcnn_core::{Rng, Tensor};

use super::oracles;

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random shapes, geometries and biases for both convolutions.
pub fn conv_sweep(cases: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (b, c, e, f) = (1 + rng.below(3), 1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(3));
        let h = 1 + rng.below(4);
        let g = ConvGeometry { padding: rng.below(3), dilation: 1 + rng.below(2), stride: 1 + rng.below(2) };
        let span = g.dilation * (h - 1) + 1;
        let l = span.saturating_sub(2 * g.padding).max(1) + rng.below(6);
        let bias = rng.uniform(&[f], -1.0, 1.0).unwrap();
        let use_bias = rng.below(2) == 0;
        let x = rng.uniform(&[b, c, l, e], -1.0, 1.0).unwrap();
        let w = rng.uniform(&[f, c, h, e], -1.0, 1.0).unwrap();
        let (y, _) = text_conv_forward(&x, &w, use_bias.then_some(&bias), g).unwrap();
        worst = worst.max(max_abs(y.data(), &oracles::text_conv(&x, &w, use_bias.then_some(&bias), g)));
        let x = rng.uniform(&[b, c, l], -1.0, 1.0).unwrap();
        let w = rng.uniform(&[f, c, h], -1.0, 1.0).unwrap();
        let (y, _) = conv1d_forward(&x, &w, use_bias.then_some(&bias), g).unwrap();
        worst = worst.max(max_abs(y.data(), &oracles::conv1d(&x, &w, use_bias.then_some(&bias), g)));
    }
    worst
}

/// Trapezoid AUC against pairwise Mann-Whitney on instances with ties.
pub fn auc_sweep(instances: usize, n: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let scores: Vec<f64> = (0..n).map(|_| (rng.next_f64() * 40.0).floor() / 8.0).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.next_f64() < 0.4)).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            continue;
        }
        worst = worst.max((auc(&scores, &labels).unwrap() - oracles::mann_whitney(&scores, &labels)).abs());
        done += 1;
    }
    worst
}

/// Every document of up to two tokens over a three-token vocabulary.
fn small_docs() -> Vec<Vec<usize>> {
    let mut docs = vec![vec![]];
    for a in 0..3 {
        docs.push(vec![a]);
        for b in a..3 {
            docs.push(vec![a, b]);
        }
    }
    docs
}

fn bow(doc: &[usize]) -> BowVector {
    let pairs: Vec<(usize, u32)> = doc.iter().map(|&t| (t, 1)).collect();
    BowVector::from_counts(&pairs)
}

/// NB posteriors against direct enumeration, over every corpus of 2 to
/// `max_docs` labelled documents (as multisets) with both classes present,
/// probed with every small document. Returns `(worst error, corpora checked)`.
pub fn nb_exhaustive(max_docs: usize, alpha: f64) -> (f64, usize) {
    let docs = small_docs();
    let options: Vec<(usize, u8)> = (0..docs.len()).flat_map(|d| [(d, 0u8), (d, 1u8)]).collect();
    let mut probes = docs.clone();
    probes.push(vec![0, 1, 2]);
    probes.push(vec![2, 2, 2]);
    let mut worst: f64 = 0.0;
    let mut corpora = 0;
    let mut picks = Vec::new();
    enumerate(&options, 0, max_docs, &mut picks, &mut |picks: &[usize]| {
        if picks.len() < 2 {
            return;
        }
        let corpus: Vec<Vec<usize>> = picks.iter().map(|&p| docs[options[p].0].clone()).collect();
        let labels: Vec<u8> = picks.iter().map(|&p| options[p].1).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            return;
        }
        corpora += 1;
        let bows: Vec<BowVector> = corpus.iter().map(|d| bow(d)).collect();
        let model = nb_fit(&bows, &labels, 3, alpha).unwrap();
        for probe in &probes {
            let got = nb_posterior(&model, &bow(probe));
            let want = oracles::nb_posterior(&corpus, &labels, 3, alpha, probe);
            worst = worst.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
        }
    });
    (worst, corpora)
}

/// Non-decreasing index sequences of length up to `max_len`.
fn enumerate(
    options: &[(usize, u8)],
    start: usize,
    max_len: usize,
    picks: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    visit(picks);
    if picks.len() == max_len {
        return;
    }
    for i in start..options.len() {
        picks.push(i);
        enumerate(options, i, max_len, picks, visit);
        picks.pop();
    }
}

fn reverse_tokens(x: &Tensor) -> Tensor {
    let (b, l, e) = (x.dim(0), x.dim(1), x.dim(2));
    let mut out = Vec::with_capacity(x.len());
    for bi in 0..b {
        for t in (0..l).rev() {
            out.extend_from_slice(&x.data()[(bi * l + t) * e..(bi * l + t + 1) * e]);
        }
    }
    Tensor::new(&[b, l, e], out).unwrap()
}

/// Encodes `x` with `(fwd, bwd)` and the token-reversed `x` with `(bwd, fwd)`
/// and the merge operands exchanged. The reversed per-token output must equal
/// the original bit for bit. Returns how many instances matched.
pub fn reversal_duality(instances: usize, seed: u64) -> usize {
    let mut rng = Rng::new(seed);
    let mut matched = 0;
    for i in 0..instances {
        let mode = if i % 2 == 0 { MergeMode::Concat } else { MergeMode::WeightedSum };
        let (b, l, e, h) = (1 + rng.below(3), 1 + rng.below(6), 1 + rng.below(4), 1 + rng.below(4));
        let params = BiLstmParams::random(e, h, mode, &mut rng).unwrap();
        let x = rng.uniform(&[b, l, e], -2.0, 2.0).unwrap();
        let (out, _) = bilstm_encode(&x, &params).unwrap();
        let mirrored = BiLstmParams { fwd: params.bwd.clone(), bwd: params.fwd.clone(), merge: params.merge.swapped() };
        let (rev, _) = bilstm_encode(&reverse_tokens(&x), &mirrored).unwrap();
        let rev = reverse_tokens(&rev.per_token);
        // Concatenation has no operand order to exchange, so the halves swap instead.
        let rev = match mode {
            MergeMode::Concat => {
                let halves = rev.split_axis(2, &[h, h]).unwrap();
                Tensor::concat(&[&halves[1], &halves[0]], 2).unwrap()
            }
            MergeMode::WeightedSum => rev,
        };
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&out.per_token) == bits(&rev) {
            matched += 1;
        }
    }
    matched
}

/// Output widths of both merges for each hidden size, as `(H, concat, weighted)`.
pub fn merge_widths(hidden: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut rng = Rng::new(1);
    hidden
        .iter()
        .map(|&h| {
            let x = rng.uniform(&[2, 3, 4], -1.0, 1.0).unwrap();
            let width = |mode| {
                let p = BiLstmParams::random(4, h, mode, &mut Rng::new(h as u64)).unwrap();
                let (out, _) = bilstm_encode(&x, &p).unwrap();
                assert_eq!(out.per_token.dim(2), out.last.dim(1));
                out.last.dim(1)
            };
            (h, width(MergeMode::Concat), width(MergeMode::WeightedSum))
        })
        .collect()
}
