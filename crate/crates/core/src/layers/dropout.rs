use alloc::format;
use alloc::vec::Vec;

use super::Mode;
use crate::{Error, Result, Rng, Tensor};

#[derive(Debug, Clone)]
pub struct DropoutCache {
    /// Per-element multiplier (0 or 1/(1−rate)); `None` when the layer was the identity.
    mask: Option<Vec<f64>>,
}

/// Inverted dropout: in `Mode::Train` each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1−rate)`. Identity otherwise.
pub fn dropout_forward(x: &Tensor, rate: f64, rng: &mut Rng, mode: Mode) -> Result<(Tensor, DropoutCache)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Argument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode != Mode::Train || rate == 0.0 {
        return Ok((x.clone(), DropoutCache { mask: None }));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len()).map(|_| if rng.next_f64() < rate { 0.0 } else { keep }).collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((Tensor::new(x.shape(), data)?, DropoutCache { mask: Some(mask) }))
}

pub fn dropout_backward(grad: &Tensor, cache: DropoutCache) -> Result<Tensor> {
    match cache.mask {
        None => Ok(grad.clone()),
        Some(mask) => {
            if mask.len() != grad.len() {
                return Err(Error::Dimension("dropout gradient does not match mask".into()));
            }
            Tensor::new(grad.shape(), grad.data().iter().zip(&mask).map(|(g, m)| g * m).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let mut rng = Rng::new(1);
        let x = rng.uniform(&[4, 5], -1.0, 1.0).unwrap();
        assert_eq!(dropout_forward(&x, 0.0, &mut rng, Mode::Train).unwrap().0, x);
        assert_eq!(dropout_forward(&x, 0.9, &mut rng, Mode::Eval).unwrap().0, x);
        assert!(dropout_forward(&x, 1.0, &mut rng, Mode::Train).is_err());
    }

    #[test]
    fn expectation_preserved() {
        let mut rng = Rng::new(77);
        let x = Tensor::full(&[10], 2.0);
        let trials = 100_000;
        let mut total = 0.0;
        for _ in 0..trials {
            total += dropout_forward(&x, 0.5, &mut rng, Mode::Train).unwrap().0.sum() / 10.0;
        }
        let mean = total / trials as f64;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
    }
}
