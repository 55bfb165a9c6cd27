use alloc::vec::Vec;

use crate::{Result, Tensor};

#[derive(Debug, Clone)]
pub struct ReluCache {
    active: Vec<bool>,
}

pub fn relu_forward(x: &Tensor) -> (Tensor, ReluCache) {
    let active = x.data().iter().map(|&v| v > 0.0).collect();
    (x.map(|v| if v > 0.0 { v } else { 0.0 }), ReluCache { active })
}

/// Passes the gradient where the input was strictly positive (0 at 0).
pub fn relu_backward(grad: &Tensor, cache: ReluCache) -> Result<Tensor> {
    if grad.len() != cache.active.len() {
        return Err(crate::Error::Dimension("relu gradient does not match cached input".into()));
    }
    let mut out = grad.clone();
    for (g, &on) in out.data_mut().iter_mut().zip(&cache.active) {
        if !on {
            *g = 0.0;
        }
    }
    Ok(out)
}
