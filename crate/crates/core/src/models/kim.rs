use alloc::format;
use alloc::vec::Vec;

use super::{dense_random, fan_in_uniform, Embeddings, IdBatch, LayerCounts, ShapeTrace};
use crate::layers::{
    dense_backward, dense_forward, dropout_backward, dropout_forward, pool_backward, pool_forward, relu_backward,
    relu_forward, text_conv_backward, text_conv_forward, ConvCache, ConvGeometry, ConvParams, DenseCache, DenseParams,
    DropoutCache, Mode, PoolCache, ReluCache,
};
use crate::params::{join, NamedParam, ParamSet};
use crate::{ModelConfig, Result, Rng, Tensor};

/// Embedding → parallel convolutions of different heights → ReLU → pooling →
/// concatenation → dropout → single-logit dense layer.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct KimCnn {
    pub embedding: Embeddings,
    pub convs: Vec<ConvParams>,
    pub out: DenseParams,
}

struct Branch {
    conv: ConvCache,
    relu: ReluCache,
    pool: PoolCache,
    pooled_shape: Vec<usize>,
}

pub(super) struct KimCache {
    branches: Vec<Branch>,
    widths: Vec<usize>,
    dropout: DropoutCache,
    dense: DenseCache,
}

impl KimCnn {
    pub fn build(config: &ModelConfig, embedding: Embeddings, rng: &mut Rng) -> Result<Self> {
        let (c, e, f) = (embedding.channels(), config.emb_dim, config.num_filters);
        let mut convs = Vec::with_capacity(config.filter_sizes.len());
        for &h in &config.filter_sizes {
            convs.push(ConvParams {
                weight: fan_in_uniform(&[f, c, h, e], c * h * e, rng)?,
                bias: Some(Tensor::zeros(&[f])),
            });
        }
        let width = config.filter_sizes.len() * f * config.pool.width();
        Ok(Self { embedding, convs, out: dense_random(width, 1, rng)? })
    }

    pub fn layer_counts(&self) -> LayerCounts {
        LayerCounts { conv: self.convs.len(), pool: self.convs.len(), dense: 1, ..LayerCounts::default() }
    }

    pub fn forward(
        &self,
        config: &ModelConfig,
        ids: &IdBatch,
        mode: Mode,
        rng: &mut Rng,
        trace: &mut ShapeTrace,
    ) -> Result<(Tensor, KimCache)> {
        let batch = ids.batch;
        let emb = self.embedding.lookup(ids)?;
        trace.push(("embedding".into(), emb.shape().to_vec()));
        let mut features = Vec::with_capacity(self.convs.len());
        let mut branches = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            let (y, conv_cache) = text_conv_forward(&emb, &conv.weight, conv.bias.as_ref(), ConvGeometry::default())?;
            trace.push((format!("branch{i}.conv"), y.shape().to_vec()));
            let (a, relu) = relu_forward(&y);
            let (p, pool) = pool_forward(&a, config.pool)?;
            trace.push((format!("branch{i}.pool"), p.shape().to_vec()));
            let pooled_shape = p.shape().to_vec();
            let width = p.len() / batch;
            features.push(p.reshape(&[batch, width])?);
            branches.push(Branch { conv: conv_cache, relu, pool, pooled_shape });
        }
        let widths = features.iter().map(|t| t.dim(1)).collect();
        let refs: Vec<&Tensor> = features.iter().collect();
        let concat = Tensor::concat(&refs, 1)?;
        trace.push(("concat".into(), concat.shape().to_vec()));
        let (dropped, dropout) = dropout_forward(&concat, config.dropout_rate, rng, mode)?;
        let (logits, dense) = dense_forward(&dropped, &self.out)?;
        trace.push(("logits".into(), logits.shape().to_vec()));
        Ok((logits.reshape(&[batch])?, KimCache { branches, widths, dropout, dense }))
    }

    pub fn backward(&self, d_logits: &Tensor, cache: KimCache, ids: &IdBatch) -> Result<Self> {
        let d_out = d_logits.clone().reshape(&[ids.batch, 1])?;
        let out = dense_backward(&d_out, cache.dense, &self.out)?;
        let d_concat = dropout_backward(&out.input, cache.dropout)?;
        let pieces = d_concat.split_axis(1, &cache.widths)?;
        let mut d_emb: Option<Tensor> = None;
        let mut convs = Vec::with_capacity(self.convs.len());
        for ((piece, branch), conv) in pieces.into_iter().zip(cache.branches).zip(&self.convs) {
            let d_pool = piece.reshape(&branch.pooled_shape)?;
            let d_act = pool_backward(&d_pool, branch.pool)?;
            let d_conv = relu_backward(&d_act, branch.relu)?;
            let g = text_conv_backward(&d_conv, branch.conv, &conv.weight)?;
            match &mut d_emb {
                Some(acc) => acc.add_assign(&g.input)?,
                None => d_emb = Some(g.input),
            }
            convs.push(ConvParams { weight: g.weight, bias: g.bias });
        }
        let d_emb = d_emb.expect("at least one branch");
        Ok(Self {
            embedding: self.embedding.backward(&d_emb, ids)?,
            convs,
            out: DenseParams { weight: out.weight, bias: out.bias },
        })
    }
}

impl ParamSet for KimCnn {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        self.embedding.collect(&join(prefix, "embedding"), out);
        for (i, c) in self.convs.iter().enumerate() {
            c.collect(&join(prefix, &format!("branch{i}.conv")), out);
        }
        self.out.collect(&join(prefix, "out"), out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.embedding.collect_mut(out);
        for c in &mut self.convs {
            c.collect_mut(out);
        }
        self.out.collect_mut(out);
    }
}
