use alloc::format;

use crate::math::{exp, ln_1p, sigmoid};
use crate::{Error, Result, Tensor};

/// Mean binary cross-entropy on logits and its gradient.
///
/// Uses `max(z,0) − z·y + ln(1 + e^{−|z|})` per example; the gradient is
/// `(σ(z) − y)/B`.
pub fn bce_with_logits(logits: &Tensor, labels: &[f64]) -> Result<(f64, Tensor)> {
    if logits.len() != labels.len() {
        return Err(Error::Dimension(format!("{} logits for {} labels", logits.len(), labels.len())));
    }
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = logits.zeros_like();
    for ((&z, &y), g) in logits.data().iter().zip(labels).zip(grad.data_mut()) {
        loss += z.max(0.0) - z * y + ln_1p(exp(-z.abs()));
        *g = (sigmoid(z) - y) / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn known_values() {
        let (l, g) = bce_with_logits(&Tensor::zeros(&[1]), &[1.0]).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((g.data()[0] + 0.5).abs() < 1e-15);
        let (l, _) = bce_with_logits(&Tensor::from_vec(vec![50.0]).unwrap(), &[1.0]).unwrap();
        assert!(l.is_finite() && l < 1e-20);
        let (l, g) = bce_with_logits(&Tensor::from_vec(vec![-800.0]).unwrap(), &[1.0]).unwrap();
        assert!((l - 800.0).abs() < 1e-9 && g.all_finite());
    }
}
