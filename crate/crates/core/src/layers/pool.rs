//! Pooling over the token axis: 1-max, k-max and average.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Max1,
    /// The `k` largest values per channel, kept in sequence order.
    #[serde(rename = "kmax")]
    KMax(usize),
    Avg,
}

impl Pooling {
    /// Features produced per channel.
    pub fn width(self) -> usize {
        match self {
            Pooling::KMax(k) => k,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    kind: Pooling,
    in_shape: [usize; 3],
    /// Selected positions per (batch, channel), empty for `Avg`.
    selected: Vec<usize>,
}

/// `x: [B × C × L]` → `[B × C]` (max1, avg) or `[B × C × k]` (kmax).
pub fn pool_forward(x: &Tensor, kind: Pooling) -> Result<(Tensor, PoolCache)> {
    if x.rank() != 3 {
        return Err(Error::Dimension(format!("pooling expects [B × C × L], got {:?}", x.shape())));
    }
    let (b, c, l) = (x.dim(0), x.dim(1), x.dim(2));
    let k = kind.width();
    if k == 0 || k > l {
        return Err(Error::Config(format!("k-max pooling with k={k} over a length-{l} feature map")));
    }
    let mut out = Vec::with_capacity(b * c * k);
    let mut selected = Vec::new();
    for row in x.data().chunks(l) {
        match kind {
            Pooling::Max1 => {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                out.push(row[best]);
                selected.push(best);
            }
            Pooling::KMax(k) => {
                let mut order: Vec<usize> = (0..l).collect();
                // stable sort: among equal values the earliest positions win
                order.sort_by(|&i, &j| row[j].partial_cmp(&row[i]).unwrap_or(core::cmp::Ordering::Equal));
                let mut top = order[..k].to_vec();
                top.sort_unstable();
                out.extend(top.iter().map(|&i| row[i]));
                selected.extend(top);
            }
            Pooling::Avg => out.push(row.iter().sum::<f64>() / l as f64),
        }
    }
    let shape: Vec<usize> = if k == 1 && kind != Pooling::KMax(1) { vec![b, c] } else { vec![b, c, k] };
    Ok((Tensor::new(&shape, out)?, PoolCache { kind, in_shape: [b, c, l], selected }))
}

/// Routes the gradient back to the selected (max/k-max) or all (avg) positions.
pub fn pool_backward(grad: &Tensor, cache: PoolCache) -> Result<Tensor> {
    let [b, c, l] = cache.in_shape;
    let k = cache.kind.width();
    if grad.len() != b * c * k {
        return Err(Error::Dimension(format!(
            "pooling gradient {:?} does not match {} pooled values",
            grad.shape(),
            b * c * k
        )));
    }
    let mut dx = vec![0.0; b * c * l];
    for (row, g) in grad.data().chunks(k).enumerate() {
        let base = row * l;
        match cache.kind {
            Pooling::Avg => {
                for slot in &mut dx[base..base + l] {
                    *slot = g[0] / l as f64;
                }
            }
            _ => {
                for (j, &gv) in g.iter().enumerate() {
                    dx[base + cache.selected[row * k + j]] += gv;
                }
            }
        }
    }
    Tensor::new(&[b, c, l], dx)
}
