use alloc::vec::Vec;

use super::{dense_random, Embeddings, IdBatch, LayerCounts, ShapeTrace};
use crate::layers::{dense_backward, dense_forward, DenseCache, DenseParams, Mode};
use crate::params::{join, NamedParam, ParamSet};
use crate::rnn::{hybrid_backward, hybrid_encode, BiLstmParams, ConvFrontend, HybridCache};
use crate::{Arch, ModelConfig, Result, Rng, Tensor};

/// Embedding → optional same-length conv front end → Bi-LSTM → dense(1).
/// Without a front end this is the plain Bi-LSTM classifier; `bilstm`
/// ignores `filter_sizes`.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct RecurrentNet {
    pub embedding: Embeddings,
    pub frontend: Option<ConvFrontend>,
    pub lstm: BiLstmParams,
    pub out: DenseParams,
}

pub(super) struct RecurrentCache {
    encoder: HybridCache,
    dense: DenseCache,
}

impl RecurrentNet {
    pub fn build(config: &ModelConfig, embedding: Embeddings, rng: &mut Rng) -> Result<Self> {
        let frontend = if config.arch == Arch::Bilstm || config.filter_sizes.is_empty() {
            None
        } else {
            Some(ConvFrontend::random(
                &config.filter_sizes,
                config.num_filters,
                embedding.channels(),
                config.emb_dim,
                rng,
            )?)
        };
        let input = frontend.as_ref().map_or(config.emb_dim, ConvFrontend::out_channels);
        let lstm = BiLstmParams::random(input, config.hidden, config.merge, rng)?;
        let out = dense_random(lstm.out_width(), 1, rng)?;
        Ok(Self { embedding, frontend, lstm, out })
    }

    pub fn layer_counts(&self) -> LayerCounts {
        let conv = self.frontend.as_ref().map_or(0, |f| f.convs.len());
        LayerCounts { conv, dense: 1, lstm: 2, ..LayerCounts::default() }
    }

    pub fn forward(
        &self,
        _config: &ModelConfig,
        ids: &IdBatch,
        _mode: Mode,
        _rng: &mut Rng,
        trace: &mut ShapeTrace,
    ) -> Result<(Tensor, RecurrentCache)> {
        let emb = self.embedding.lookup(ids)?;
        trace.push(("embedding".into(), emb.shape().to_vec()));
        let (last, encoder) = hybrid_encode(&emb, self.frontend.as_ref(), &self.lstm)?;
        trace.push(("encoder".into(), last.shape().to_vec()));
        let (logits, dense) = dense_forward(&last, &self.out)?;
        trace.push(("logits".into(), logits.shape().to_vec()));
        Ok((logits.reshape(&[ids.batch])?, RecurrentCache { encoder, dense }))
    }

    pub fn backward(&self, d_logits: &Tensor, cache: RecurrentCache, ids: &IdBatch) -> Result<Self> {
        let d_out = d_logits.clone().reshape(&[ids.batch, 1])?;
        let out = dense_backward(&d_out, cache.dense, &self.out)?;
        let (d_emb, frontend, lstm) = hybrid_backward(&out.input, cache.encoder, self.frontend.as_ref(), &self.lstm)?;
        Ok(Self {
            embedding: self.embedding.backward(&d_emb, ids)?,
            frontend,
            lstm,
            out: DenseParams { weight: out.weight, bias: out.bias },
        })
    }
}

impl ParamSet for RecurrentNet {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        self.embedding.collect(&join(prefix, "embedding"), out);
        if let Some(f) = &self.frontend {
            f.collect(&join(prefix, "frontend"), out);
        }
        self.lstm.collect(&join(prefix, "lstm"), out);
        self.out.collect(&join(prefix, "out"), out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.embedding.collect_mut(out);
        if let Some(f) = &mut self.frontend {
            f.collect_mut(out);
        }
        self.lstm.collect_mut(out);
        self.out.collect_mut(out);
    }
}
