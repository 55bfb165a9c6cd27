use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::{Error, Result, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Plain SGD or Adam with bias correction. Adam moments are allocated on the
/// first step and matched to parameters by position.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!("{} parameters but {} gradients", params.len(), grads.len())));
        }
        if let Some((p, g)) = params.iter().zip(grads).find(|(p, g)| p.shape() != g.shape()) {
            return Err(Error::Dimension(format!("gradient {:?} for parameter {:?}", g.shape(), p.shape())));
        }
        if self.kind == OptimizerKind::Adam && self.m.is_empty() {
            self.m = params.iter().map(|p| p.zeros_like()).collect();
            self.v = self.m.clone();
        }
        if self.kind == OptimizerKind::Adam && self.m.len() != params.len() {
            return Err(Error::Dimension("parameter list changed between optimizer steps".into()));
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - libm::pow(ADAM_BETA1, self.t as f64);
                let c2 = 1.0 - libm::pow(ADAM_BETA2, self.t as f64);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (self.m[k].data_mut(), self.v[k].data_mut());
                    for (((x, &d), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * d;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * d * d;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *x -= self.lr * m_hat / (sqrt(v_hat) + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut Tensor], max_norm: f64) -> f64 {
    let norm = sqrt(grads.iter().map(|g| g.squared_norm()).sum());
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = Tensor::from_vec(vec![1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::from_vec(vec![3.0, -0.2, 1e-3]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        let before = p.clone();
        opt.step(&mut [&mut p], &[&g]).unwrap();
        for ((a, b), d) in p.data().iter().zip(before.data()).zip(g.data()) {
            assert!(((b - a).abs() - 0.01).abs() < 1e-6);
            assert_eq!((b - a).signum(), d.signum());
        }
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Tensor::from_vec(vec![0.3, 0.7]).unwrap();
        let g = p.zeros_like();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1);
        for _ in 0..10 {
            opt.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p.data(), [0.3, 0.7]);
    }

    #[test]
    fn sgd_exact() {
        let mut p = Tensor::from_vec(vec![1.0, 2.0]).unwrap();
        let g = Tensor::from_vec(vec![0.5, -4.0]).unwrap();
        Optimizer::new(OptimizerKind::Sgd, 0.25).step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p.data(), [0.875, 3.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Tensor::zeros(&[2]);
        let g = Tensor::zeros(&[3]);
        let err = Optimizer::new(OptimizerKind::Sgd, 0.1).step(&mut [&mut p], &[&g]);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn clipping() {
        let mut a = Tensor::from_vec(vec![3.0]).unwrap();
        let mut b = Tensor::from_vec(vec![4.0]).unwrap();
        let n = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a.data()[0] - 0.6).abs() < 1e-15 && (b.data()[0] - 0.8).abs() < 1e-15);
        let n = clip_global_norm(&mut [&mut a, &mut b], 5.0);
        assert!((n - 1.0).abs() < 1e-15);
        assert!((a.data()[0] - 0.6).abs() < 1e-15);
    }
}
