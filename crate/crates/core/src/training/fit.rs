use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::optim::{clip_global_norm, Optimizer, OptimizerKind};
use crate::layers::{bce_with_logits, Mode};
use crate::metrics::label_from_logit;
use crate::models::{Gradients, IdBatch};
use crate::params::Role;
use crate::text::TokenizedExample;
use crate::{Error, Model, Result, Rng, Tensor};

const DROPOUT_STREAM: u64 = 0x5eed_d20f;
const SPLIT_STREAM: u64 = 0x5eed_5b17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub shuffle: bool,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm bound, applied to recurrent architectures only.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 5,
            lr: 1e-3,
            seed: 42,
            val_fraction: 0.1,
            shuffle: true,
            optimizer: OptimizerKind::Adam,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} is outside [0, 1)", self.val_fraction)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub accuracy: f64,
    pub logits: Vec<f64>,
}

/// Seeded split of `0..n` into (train, validation) index lists. The
/// validation part holds `⌊n·fraction⌋` examples.
pub fn train_val_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Argument(format!("validation fraction {fraction} is outside [0, 1)")));
    }
    let n_val = (n as f64 * fraction) as usize;
    let mut perm = Rng::with_stream(seed, SPLIT_STREAM).permutation(n);
    let val = perm.split_off(n - n_val);
    Ok((perm, val))
}

fn to_batch(examples: &[&TokenizedExample]) -> Result<(IdBatch, Vec<f64>)> {
    let rows: Vec<&[usize]> = examples.iter().map(|e| e.ids.as_slice()).collect();
    let labels = examples.iter().map(|e| f64::from(e.label)).collect();
    Ok((IdBatch::from_rows(&rows)?, labels))
}

/// Eval-mode logits for every example, in order.
pub fn predict_logits(model: &Model, examples: &[TokenizedExample], batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let refs: Vec<&TokenizedExample> = chunk.iter().collect();
        let (ids, _) = to_batch(&refs)?;
        out.extend_from_slice(model.forward(&ids)?.data());
    }
    Ok(out)
}

/// Mean loss and accuracy in eval mode.
pub fn evaluate(model: &Model, examples: &[TokenizedExample], batch_size: usize) -> Result<EvalSummary> {
    if examples.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty set".into()));
    }
    let logits = predict_logits(model, examples, batch_size)?;
    let labels: Vec<f64> = examples.iter().map(|e| f64::from(e.label)).collect();
    let (loss, _) = bce_with_logits(&Tensor::from_vec(logits.clone())?, &labels)?;
    let correct = logits.iter().zip(examples).filter(|(&z, e)| label_from_logit(z) == e.label).count();
    Ok(EvalSummary { loss, accuracy: correct as f64 / examples.len() as f64, logits })
}

/// One optimizer update using only the trainable parameters.
pub fn apply_gradients(model: &mut Model, grads: &mut Gradients, opt: &mut Optimizer, clip: Option<f64>) -> Result<()> {
    let roles: Vec<Role> = model.named_params().iter().map(|p| p.role).collect();
    let mut g: Vec<&mut Tensor> =
        grads.tensors_mut().into_iter().zip(&roles).filter(|(_, r)| **r == Role::Trainable).map(|(t, _)| t).collect();
    if let Some(c) = clip {
        clip_global_norm(&mut g, c);
    }
    let g: Vec<&Tensor> = g.into_iter().map(|t| &*t).collect();
    let mut p: Vec<&mut Tensor> =
        model.params_mut().into_iter().zip(&roles).filter(|(_, r)| **r == Role::Trainable).map(|(t, _)| t).collect();
    opt.step(&mut p, &g)
}

pub fn fit(
    model: &mut Model,
    train: &[TokenizedExample],
    val: &[TokenizedExample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    fit_with(model, train, val, cfg, |_| {})
}

/// Trains for `cfg.epochs` epochs, calling `on_epoch` after each one.
pub fn fit_with(
    model: &mut Model,
    train: &[TokenizedExample],
    val: &[TokenizedExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Argument("the training set is empty".into()));
    }
    let clip = model.config().arch.is_recurrent().then_some(cfg.clip_norm);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut dropout_rng = Rng::with_stream(cfg.seed, DROPOUT_STREAM);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let order: Vec<usize> = if cfg.shuffle {
            Rng::with_stream(cfg.seed, epoch as u64).permutation(train.len())
        } else {
            (0..train.len()).collect()
        };
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let examples: Vec<&TokenizedExample> = chunk.iter().map(|&i| &train[i]).collect();
            let (ids, labels) = to_batch(&examples)?;
            let mut step = model.loss_and_grads(&ids, &labels, Mode::Train, &mut dropout_rng)?;
            if !step.loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite training loss in epoch {epoch}, batch {}", b + 1)));
            }
            loss_sum += step.loss * chunk.len() as f64;
            correct +=
                step.logits.data().iter().zip(&examples).filter(|(&z, e)| label_from_logit(z) == e.label).count();
            model.apply_bn_stats(&step.bn_stats)?;
            apply_gradients(model, &mut step.grads, &mut opt, clip)?;
        }
        if model.named_params().iter().any(|p| !p.tensor.all_finite()) {
            return Err(Error::Numeric(format!("parameters became non-finite in epoch {epoch}")));
        }
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            let s = evaluate(model, val, cfg.batch_size)?;
            (Some(s.loss), Some(s.accuracy))
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Arch, ModelConfig};
    use alloc::vec;

    /// Label 1 iff the marker token (id 2) occurs.
    pub(crate) fn marker_dataset(n: usize, len: usize, vocab: usize, seed: u64) -> Vec<TokenizedExample> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut ids: Vec<usize> = (0..len).map(|_| 3 + rng.below(vocab - 3)).collect();
                if label == 1 {
                    ids[rng.below(len)] = 2;
                }
                TokenizedExample { ids, label }
            })
            .collect()
    }

    fn small(arch: Arch) -> ModelConfig {
        let mut c = ModelConfig::new(arch);
        c.filter_sizes = if arch == Arch::CnnBilstm { vec![1, 3] } else { vec![2, 3] };
        c.num_filters = 4;
        c.emb_dim = 8;
        c.max_len = 8;
        c.hidden = 6;
        c.fc_hidden = 8;
        c
    }

    #[test]
    fn split_sizes() {
        let (t, v) = train_val_split(100, 0.1, 3).unwrap();
        assert_eq!((t.len(), v.len()), (90, 10));
        let mut all = [t, v].concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn zero_lr_freezes_parameters() {
        let data = marker_dataset(20, 8, 12, 1);
        let mut model = Model::build(small(Arch::DeepCnn), 12, &mut Rng::new(1)).unwrap();
        let before: Vec<Tensor> =
            model.named_params().into_iter().filter(|p| p.role == Role::Trainable).map(|p| p.tensor.clone()).collect();
        let cfg = TrainConfig { lr: 0.0, epochs: 3, batch_size: 8, ..TrainConfig::default() };
        let hist = fit(&mut model, &data, &[], &cfg).unwrap();
        let after: Vec<Tensor> =
            model.named_params().into_iter().filter(|p| p.role == Role::Trainable).map(|p| p.tensor.clone()).collect();
        assert_eq!(before, after);
        assert_eq!(hist.len(), 3);
        assert!(hist.iter().all(|r| r.val_loss.is_none()));
    }

    #[test]
    fn deterministic_history() {
        let data = marker_dataset(30, 8, 12, 2);
        let run = || {
            let mut m = Model::build(small(Arch::KimCnn), 12, &mut Rng::new(5)).unwrap();
            let cfg = TrainConfig { epochs: 2, batch_size: 7, ..TrainConfig::default() };
            (fit(&mut m, &data[..24], &data[24..], &cfg).unwrap(), m)
        };
        let (h1, m1) = run();
        let (h2, m2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn loss_decreases_for_every_arch() {
        let data = marker_dataset(48, 8, 12, 3);
        for arch in Arch::ALL {
            let mut m = Model::build(small(arch), 12, &mut Rng::new(7)).unwrap();
            let cfg = TrainConfig { epochs: 5, batch_size: 8, lr: 0.01, ..TrainConfig::default() };
            let h = fit(&mut m, &data, &[], &cfg).unwrap();
            assert!(h[0].train_loss > h[4].train_loss, "{arch:?}: {h:?}");
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        let mut m = Model::build(small(Arch::KimCnn), 12, &mut Rng::new(7)).unwrap();
        assert!(matches!(fit(&mut m, &[], &[], &TrainConfig::default()), Err(Error::Argument(_))));
    }
}
