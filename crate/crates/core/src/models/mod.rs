//! Classifier assembly: Kim-style TextCNN, the deep two-conv-per-branch
//! TextCNN, a Bi-LSTM classifier and the CNN → Bi-LSTM hybrid.

mod config;
mod deep;
mod kim;
mod recurrent;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use config::{Arch, Channels, ModelConfig};

use crate::layers::{bce_with_logits, embedding_backward, embedding_forward, BatchNormParams, BnStats, Mode};
use crate::math::sqrt;
use crate::params::{push, NamedParam, ParamSet, Role};
use crate::text::EmbeddingMatrix;
use crate::{Error, Result, Rng, Tensor};

use deep::{DeepCache, DeepCnn};
use kim::{KimCache, KimCnn};
use recurrent::{RecurrentCache, RecurrentNet};

/// Row-major `batch × len` token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdBatch {
    pub ids: Vec<usize>,
    pub batch: usize,
    pub len: usize,
}

impl IdBatch {
    pub fn from_rows<R: AsRef<[usize]>>(rows: &[R]) -> Result<Self> {
        let len = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.is_empty() || len == 0 || rows.iter().any(|r| r.as_ref().len() != len) {
            return Err(Error::Input("a batch needs at least one row and rows of equal, positive length".into()));
        }
        let ids = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Ok(Self { ids, batch: rows.len(), len })
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i * self.len..(i + 1) * self.len]
    }
}

/// Word-vector tables: the fine-tuned channel and, for multi-channel models,
/// a static copy that is never updated.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub trainable: Tensor,
    pub frozen: Option<Tensor>,
}

impl Embeddings {
    fn random(vocab: usize, dim: usize, channels: Channels, rng: &mut Rng) -> Result<Self> {
        let table = EmbeddingMatrix::random(vocab, dim, rng)?.table;
        let frozen = (channels == Channels::Multi).then(|| table.clone());
        Ok(Self { trainable: table, frozen })
    }

    pub fn channels(&self) -> usize {
        1 + usize::from(self.frozen.is_some())
    }

    fn lookup(&self, ids: &IdBatch) -> Result<Tensor> {
        let mut tables = alloc::vec![&self.trainable];
        tables.extend(self.frozen.as_ref());
        embedding_forward(&tables, &ids.ids, ids.batch)
    }

    fn backward(&self, grad: &Tensor, ids: &IdBatch) -> Result<Self> {
        let vocab = self.trainable.dim(0);
        Ok(Self {
            trainable: embedding_backward(grad, &ids.ids, 0, vocab)?,
            frozen: self.frozen.as_ref().map(Tensor::zeros_like),
        })
    }
}

impl ParamSet for Embeddings {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        push(out, prefix, "trainable", &self.trainable, Role::Trainable);
        if let Some(f) = &self.frozen {
            push(out, prefix, "static", f, Role::Frozen);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.trainable);
        if let Some(f) = &mut self.frozen {
            out.push(f);
        }
    }
}

/// Uniform fan-in initialization `±1/√fan_in`.
pub(crate) fn fan_in_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Result<Tensor> {
    let bound = 1.0 / sqrt(fan_in as f64);
    rng.uniform(shape, -bound, bound)
}

pub(crate) fn dense_random(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<crate::layers::DenseParams> {
    Ok(crate::layers::DenseParams {
        weight: fan_in_uniform(&[outputs, inputs], inputs, rng)?,
        bias: Tensor::zeros(&[outputs]),
    })
}

/// Number of layers of each kind in a built model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerCounts {
    pub conv: usize,
    pub batchnorm: usize,
    pub pool: usize,
    pub dense: usize,
    pub lstm: usize,
}

/// Named intermediate shapes recorded during a forward pass.
pub type ShapeTrace = Vec<(String, Vec<usize>)>;

#[derive(Debug, Clone, PartialEq)]
enum Net {
    Kim(KimCnn),
    Deep(DeepCnn),
    Recurrent(RecurrentNet),
}

impl ParamSet for Net {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        match self {
            Net::Kim(n) => n.collect(prefix, out),
            Net::Deep(n) => n.collect(prefix, out),
            Net::Recurrent(n) => n.collect(prefix, out),
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        match self {
            Net::Kim(n) => n.collect_mut(out),
            Net::Deep(n) => n.collect_mut(out),
            Net::Recurrent(n) => n.collect_mut(out),
        }
    }
}

enum NetCache {
    Kim(KimCache),
    Deep(DeepCache),
    Recurrent(RecurrentCache),
}

/// Activations kept from [`Model::forward_with`] for the backward pass.
pub struct ForwardState {
    cache: NetCache,
    ids: IdBatch,
    /// Batch statistics of every BatchNorm layer (train mode only), in parameter order.
    pub bn_stats: Vec<BnStats>,
    pub trace: ShapeTrace,
}

/// Parameter gradients, aligned with [`Model::named_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Net);

impl Gradients {
    pub fn named(&self) -> Vec<NamedParam<'_>> {
        self.0.named()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.0.tensors_mut()
    }
}

/// Output of a combined forward/backward pass.
pub struct StepOutput {
    pub loss: f64,
    pub logits: Tensor,
    pub grads: Gradients,
    pub bn_stats: Vec<BnStats>,
}

/// A binary text classifier producing one logit per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    vocab_size: usize,
    net: Net,
}

impl Model {
    pub fn build(config: ModelConfig, vocab_size: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if vocab_size < 2 {
            return Err(Error::Config(format!("vocabulary size {vocab_size} is below the two reserved ids")));
        }
        let embedding = Embeddings::random(vocab_size, config.emb_dim, config.channels, rng)?;
        let net = match config.arch {
            Arch::KimCnn => Net::Kim(KimCnn::build(&config, embedding, rng)?),
            Arch::DeepCnn => Net::Deep(DeepCnn::build(&config, embedding, rng)?),
            Arch::Bilstm | Arch::CnnBilstm => Net::Recurrent(RecurrentNet::build(&config, embedding, rng)?),
        };
        Ok(Self { config, vocab_size, net })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn embeddings_mut(&mut self) -> &mut Embeddings {
        match &mut self.net {
            Net::Kim(n) => &mut n.embedding,
            Net::Deep(n) => &mut n.embedding,
            Net::Recurrent(n) => &mut n.embedding,
        }
    }

    /// Installs word vectors into every embedding channel (pad row forced to zero).
    pub fn set_embeddings(&mut self, table: &Tensor) -> Result<()> {
        let expected = [self.vocab_size, self.config.emb_dim];
        if table.shape() != expected {
            return Err(Error::Dimension(format!("embedding table {:?}, expected {expected:?}", table.shape())));
        }
        let mut table = table.clone();
        table.data_mut()[..self.config.emb_dim].fill(0.0);
        let emb = self.embeddings_mut();
        if let Some(f) = &mut emb.frozen {
            *f = table.clone();
        }
        emb.trainable = table;
        Ok(())
    }

    pub fn named_params(&self) -> Vec<NamedParam<'_>> {
        self.net.named()
    }

    /// Mutable tensors in the order of [`Model::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.tensors_mut()
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let idx = self.named_params().iter().position(|p| p.name == name)?;
        self.params_mut().into_iter().nth(idx)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.named_params().into_iter().find(|p| p.name == name).map(|p| p.tensor)
    }

    pub fn layer_counts(&self) -> LayerCounts {
        match &self.net {
            Net::Kim(n) => n.layer_counts(),
            Net::Deep(n) => n.layer_counts(),
            Net::Recurrent(n) => n.layer_counts(),
        }
    }

    fn batchnorms_mut(&mut self) -> Vec<&mut BatchNormParams> {
        match &mut self.net {
            Net::Deep(n) => n.batchnorms_mut(),
            _ => Vec::new(),
        }
    }

    fn check_ids(&self, ids: &IdBatch) -> Result<()> {
        if ids.len != self.config.max_len {
            return Err(Error::Input(format!(
                "batch rows have length {}, the model expects {}",
                ids.len, self.config.max_len
            )));
        }
        if ids.batch * ids.len != ids.ids.len() {
            return Err(Error::Input("batch dimensions do not match the id buffer".into()));
        }
        if let Some(pos) = ids.ids.iter().position(|&id| id >= self.vocab_size) {
            return Err(Error::Input(format!(
                "token id {} at row {}, position {} is outside the vocabulary of {}",
                ids.ids[pos],
                pos / ids.len,
                pos % ids.len,
                self.vocab_size
            )));
        }
        Ok(())
    }

    /// Forward pass returning logits `[B]` and the state needed by backward.
    pub fn forward_with(&self, ids: &IdBatch, mode: Mode, rng: &mut Rng) -> Result<(Tensor, ForwardState)> {
        self.check_ids(ids)?;
        let mut trace = ShapeTrace::new();
        let mut bn_stats = Vec::new();
        let (logits, cache) = match &self.net {
            Net::Kim(n) => {
                let (y, c) = n.forward(&self.config, ids, mode, rng, &mut trace)?;
                (y, NetCache::Kim(c))
            }
            Net::Deep(n) => {
                let (y, c) = n.forward(&self.config, ids, mode, rng, &mut trace, &mut bn_stats)?;
                (y, NetCache::Deep(c))
            }
            Net::Recurrent(n) => {
                let (y, c) = n.forward(&self.config, ids, mode, rng, &mut trace)?;
                (y, NetCache::Recurrent(c))
            }
        };
        Ok((logits, ForwardState { cache, ids: ids.clone(), bn_stats, trace }))
    }

    /// Eval-mode logits.
    pub fn forward(&self, ids: &IdBatch) -> Result<Tensor> {
        // dropout is inactive in eval mode, the stream is never read
        let mut rng = Rng::new(0);
        Ok(self.forward_with(ids, Mode::Eval, &mut rng)?.0)
    }

    /// Intermediate shapes of an eval-mode forward pass.
    pub fn shape_trace(&self, ids: &IdBatch) -> Result<ShapeTrace> {
        let mut rng = Rng::new(0);
        Ok(self.forward_with(ids, Mode::Eval, &mut rng)?.1.trace)
    }

    /// Gradients of a scalar loss given `dL/dlogits`.
    pub fn backward(&self, d_logits: &Tensor, state: ForwardState) -> Result<Gradients> {
        let ids = &state.ids;
        let net = match (&self.net, state.cache) {
            (Net::Kim(n), NetCache::Kim(c)) => Net::Kim(n.backward(d_logits, c, ids)?),
            (Net::Deep(n), NetCache::Deep(c)) => Net::Deep(n.backward(d_logits, c, ids)?),
            (Net::Recurrent(n), NetCache::Recurrent(c)) => Net::Recurrent(n.backward(d_logits, c, ids)?),
            _ => return Err(Error::Config("forward state belongs to a different architecture".into())),
        };
        Ok(Gradients(net))
    }

    /// Binary cross-entropy loss and gradients for one batch.
    pub fn loss_and_grads(&self, ids: &IdBatch, labels: &[f64], mode: Mode, rng: &mut Rng) -> Result<StepOutput> {
        let (logits, mut state) = self.forward_with(ids, mode, rng)?;
        let (loss, d_logits) = bce_with_logits(&logits, labels)?;
        let bn_stats = core::mem::take(&mut state.bn_stats);
        let grads = self.backward(&d_logits, state)?;
        Ok(StepOutput { loss, logits, grads, bn_stats })
    }

    /// Folds train-mode batch statistics into the BatchNorm running averages.
    pub fn apply_bn_stats(&mut self, stats: &[BnStats]) -> Result<()> {
        let mut layers = self.batchnorms_mut();
        if stats.len() != layers.len() {
            return Err(Error::Dimension(format!(
                "{} batch statistics for {} batchnorm layers",
                stats.len(),
                layers.len()
            )));
        }
        for (layer, s) in layers.iter_mut().zip(stats) {
            layer.update_running(s);
        }
        Ok(())
    }
}
