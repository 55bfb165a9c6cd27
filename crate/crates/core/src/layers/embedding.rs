use alloc::format;

use crate::text::PAD_ID;
use crate::{Error, Result, Tensor};

/// Looks up `ids` (`batch × len`, row-major) in `[V × E]` tables, one table per
/// input channel. Output is `[B × C × L × E]`.
pub fn embedding_forward(tables: &[&Tensor], ids: &[usize], batch: usize) -> Result<Tensor> {
    let first = tables.first().ok_or_else(|| Error::Config("no embedding table".into()))?;
    let (vocab, dim) = (first.dim(0), first.dim(1));
    if batch == 0 || ids.len() % batch != 0 || ids.is_empty() {
        return Err(Error::Input(format!("{} ids cannot form {batch} rows", ids.len())));
    }
    let len = ids.len() / batch;
    if let Some(pos) = ids.iter().position(|&id| id >= vocab) {
        return Err(Error::Input(format!(
            "token id {} at row {}, position {} is outside the vocabulary of {vocab}",
            ids[pos],
            pos / len,
            pos % len
        )));
    }
    let channels = tables.len();
    let mut out = Tensor::zeros(&[batch, channels, len, dim]);
    let data = out.data_mut();
    for b in 0..batch {
        for (c, table) in tables.iter().enumerate() {
            for t in 0..len {
                let id = ids[b * len + t];
                let dst = ((b * channels + c) * len + t) * dim;
                data[dst..dst + dim].copy_from_slice(&table.data()[id * dim..(id + 1) * dim]);
            }
        }
    }
    Ok(out)
}

/// Scatters the gradient of one channel back into a `[V × E]` table gradient.
/// The padding row always receives exactly zero.
pub fn embedding_backward(grad: &Tensor, ids: &[usize], channel: usize, vocab: usize) -> Result<Tensor> {
    if grad.rank() != 4 {
        return Err(Error::Dimension(format!("embedding gradient {:?}", grad.shape())));
    }
    let (batch, channels, len, dim) = (grad.dim(0), grad.dim(1), grad.dim(2), grad.dim(3));
    let mut out = Tensor::zeros(&[vocab, dim]);
    let table = out.data_mut();
    for b in 0..batch {
        for t in 0..len {
            let id = ids[b * len + t];
            if id == PAD_ID {
                continue;
            }
            let src = ((b * channels + channel) * len + t) * dim;
            for e in 0..dim {
                table[id * dim + e] += grad.data()[src + e];
            }
        }
    }
    Ok(out)
}
