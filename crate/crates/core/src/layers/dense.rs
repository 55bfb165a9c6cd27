use alloc::format;

use crate::{Error, Result, Tensor};

/// Fully connected layer, `y = x·Wᵀ + b` with `W: [out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn dense_forward(x: &Tensor, params: &DenseParams) -> Result<(Tensor, DenseCache)> {
    if x.rank() != 2 || params.weight.rank() != 2 || x.dim(1) != params.weight.dim(1) {
        return Err(Error::Dimension(format!(
            "dense layer with weight {:?} got input {:?}",
            params.weight.shape(),
            x.shape()
        )));
    }
    let y = x.matmul_t(&params.weight)?.add_bias(&params.bias)?;
    Ok((y, DenseCache { input: x.clone() }))
}

pub fn dense_backward(grad: &Tensor, cache: DenseCache, params: &DenseParams) -> Result<DenseGrads> {
    let x = cache.input;
    if grad.rank() != 2 || grad.dim(0) != x.dim(0) || grad.dim(1) != params.weight.dim(0) {
        return Err(Error::Dimension(format!(
            "dense gradient {:?} for weight {:?}",
            grad.shape(),
            params.weight.shape()
        )));
    }
    Ok(DenseGrads { input: grad.matmul(&params.weight)?, weight: grad.t_matmul(&x)?, bias: grad.sum_rows()? })
}
