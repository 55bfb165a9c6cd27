use alloc::format;
use alloc::vec::Vec;

use super::{dense_random, fan_in_uniform, Embeddings, IdBatch, LayerCounts, ShapeTrace};
use crate::layers::{
    batchnorm_backward, batchnorm_forward, conv1d_backward, conv1d_forward, dense_backward, dense_forward,
    pool_backward, pool_forward, relu_backward, relu_forward, text_conv_backward, text_conv_forward, BatchNormParams,
    BnCache, BnStats, ConvCache, ConvGeometry, ConvParams, DenseCache, DenseParams, Mode, PoolCache, ReluCache,
};
use crate::params::{join, NamedParam, ParamSet};
use crate::{ModelConfig, Result, Rng, Tensor};

/// Two valid convolutions of the same height, each followed by BatchNorm
/// and ReLU. The convolutions carry no bias since BatchNorm's shift replaces it.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct DeepBranch {
    pub conv1: ConvParams,
    pub bn1: BatchNormParams,
    pub conv2: ConvParams,
    pub bn2: BatchNormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct DeepCnn {
    pub embedding: Embeddings,
    pub branches: Vec<DeepBranch>,
    pub fc: DenseParams,
    pub out: DenseParams,
}

struct BranchCache {
    conv1: ConvCache,
    bn1: BnCache,
    relu1: ReluCache,
    conv2: ConvCache,
    bn2: BnCache,
    relu2: ReluCache,
    pool: PoolCache,
    pooled_shape: Vec<usize>,
}

pub(super) struct DeepCache {
    branches: Vec<BranchCache>,
    widths: Vec<usize>,
    fc: DenseCache,
    fc_relu: ReluCache,
    out: DenseCache,
}

impl DeepCnn {
    pub fn build(config: &ModelConfig, embedding: Embeddings, rng: &mut Rng) -> Result<Self> {
        let (c, e, f) = (embedding.channels(), config.emb_dim, config.num_filters);
        let mut branches = Vec::with_capacity(config.filter_sizes.len());
        for &h in &config.filter_sizes {
            branches.push(DeepBranch {
                conv1: ConvParams { weight: fan_in_uniform(&[f, c, h, e], c * h * e, rng)?, bias: None },
                bn1: BatchNormParams::new(f),
                conv2: ConvParams { weight: fan_in_uniform(&[f, f, h], f * h, rng)?, bias: None },
                bn2: BatchNormParams::new(f),
            });
        }
        let width = config.filter_sizes.len() * f * config.pool.width();
        Ok(Self {
            embedding,
            branches,
            fc: dense_random(width, config.fc_hidden, rng)?,
            out: dense_random(config.fc_hidden, 1, rng)?,
        })
    }

    pub fn layer_counts(&self) -> LayerCounts {
        let n = self.branches.len();
        LayerCounts { conv: 2 * n, batchnorm: 2 * n, pool: n, dense: 2, lstm: 0 }
    }

    pub fn batchnorms_mut(&mut self) -> Vec<&mut BatchNormParams> {
        self.branches.iter_mut().flat_map(|b| [&mut b.bn1, &mut b.bn2]).collect()
    }

    pub fn forward(
        &self,
        config: &ModelConfig,
        ids: &IdBatch,
        mode: Mode,
        _rng: &mut Rng,
        trace: &mut ShapeTrace,
        stats: &mut Vec<BnStats>,
    ) -> Result<(Tensor, DeepCache)> {
        let batch = ids.batch;
        let emb = self.embedding.lookup(ids)?;
        trace.push(("embedding".into(), emb.shape().to_vec()));
        let mut features = Vec::with_capacity(self.branches.len());
        let mut caches = Vec::with_capacity(self.branches.len());
        for (i, b) in self.branches.iter().enumerate() {
            let (y1, conv1) = text_conv_forward(&emb, &b.conv1.weight, None, ConvGeometry::default())?;
            trace.push((format!("branch{i}.conv1"), y1.shape().to_vec()));
            let (n1, bn1, s1) = batchnorm_forward(&y1, &b.bn1, mode)?;
            let (a1, relu1) = relu_forward(&n1);
            let (y2, conv2) = conv1d_forward(&a1, &b.conv2.weight, None, ConvGeometry::default())?;
            trace.push((format!("branch{i}.conv2"), y2.shape().to_vec()));
            let (n2, bn2, s2) = batchnorm_forward(&y2, &b.bn2, mode)?;
            let (a2, relu2) = relu_forward(&n2);
            let (p, pool) = pool_forward(&a2, config.pool)?;
            trace.push((format!("branch{i}.pool"), p.shape().to_vec()));
            stats.extend(s1);
            stats.extend(s2);
            let pooled_shape = p.shape().to_vec();
            let width = p.len() / batch;
            features.push(p.reshape(&[batch, width])?);
            caches.push(BranchCache { conv1, bn1, relu1, conv2, bn2, relu2, pool, pooled_shape });
        }
        let widths = features.iter().map(|t| t.dim(1)).collect();
        let refs: Vec<&Tensor> = features.iter().collect();
        let concat = Tensor::concat(&refs, 1)?;
        trace.push(("concat".into(), concat.shape().to_vec()));
        let (hidden, fc) = dense_forward(&concat, &self.fc)?;
        let (hidden, fc_relu) = relu_forward(&hidden);
        trace.push(("fc".into(), hidden.shape().to_vec()));
        let (logits, out) = dense_forward(&hidden, &self.out)?;
        trace.push(("logits".into(), logits.shape().to_vec()));
        Ok((logits.reshape(&[batch])?, DeepCache { branches: caches, widths, fc, fc_relu, out }))
    }

    pub fn backward(&self, d_logits: &Tensor, cache: DeepCache, ids: &IdBatch) -> Result<Self> {
        let d_out = d_logits.clone().reshape(&[ids.batch, 1])?;
        let out = dense_backward(&d_out, cache.out, &self.out)?;
        let d_hidden = relu_backward(&out.input, cache.fc_relu)?;
        let fc = dense_backward(&d_hidden, cache.fc, &self.fc)?;
        let pieces = fc.input.split_axis(1, &cache.widths)?;
        let mut d_emb: Option<Tensor> = None;
        let mut branches = Vec::with_capacity(self.branches.len());
        for ((piece, c), b) in pieces.into_iter().zip(cache.branches).zip(&self.branches) {
            let d_a2 = pool_backward(&piece.reshape(&c.pooled_shape)?, c.pool)?;
            let d_n2 = relu_backward(&d_a2, c.relu2)?;
            let (d_y2, g_gamma2, g_beta2) = batchnorm_backward(&d_n2, c.bn2, &b.bn2.gamma)?;
            let g2 = conv1d_backward(&d_y2, c.conv2, &b.conv2.weight)?;
            let d_n1 = relu_backward(&g2.input, c.relu1)?;
            let (d_y1, g_gamma1, g_beta1) = batchnorm_backward(&d_n1, c.bn1, &b.bn1.gamma)?;
            let g1 = text_conv_backward(&d_y1, c.conv1, &b.conv1.weight)?;
            match &mut d_emb {
                Some(acc) => acc.add_assign(&g1.input)?,
                None => d_emb = Some(g1.input),
            }
            let zero_stats = |bn: &BatchNormParams, gamma: Tensor, beta: Tensor| BatchNormParams {
                gamma,
                beta,
                running_mean: bn.running_mean.zeros_like(),
                running_var: bn.running_var.zeros_like(),
            };
            branches.push(DeepBranch {
                conv1: ConvParams { weight: g1.weight, bias: None },
                bn1: zero_stats(&b.bn1, g_gamma1, g_beta1),
                conv2: ConvParams { weight: g2.weight, bias: None },
                bn2: zero_stats(&b.bn2, g_gamma2, g_beta2),
            });
        }
        let d_emb = d_emb.expect("at least one branch");
        Ok(Self {
            embedding: self.embedding.backward(&d_emb, ids)?,
            branches,
            fc: DenseParams { weight: fc.weight, bias: fc.bias },
            out: DenseParams { weight: out.weight, bias: out.bias },
        })
    }
}

impl ParamSet for DeepCnn {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        self.embedding.collect(&join(prefix, "embedding"), out);
        for (i, b) in self.branches.iter().enumerate() {
            let p = join(prefix, &format!("branch{i}"));
            b.conv1.collect(&join(&p, "conv1"), out);
            b.bn1.collect(&join(&p, "bn1"), out);
            b.conv2.collect(&join(&p, "conv2"), out);
            b.bn2.collect(&join(&p, "bn2"), out);
        }
        self.fc.collect(&join(prefix, "fc"), out);
        self.out.collect(&join(prefix, "out"), out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.embedding.collect_mut(out);
        for b in &mut self.branches {
            b.conv1.collect_mut(out);
            b.bn1.collect_mut(out);
            b.conv2.collect_mut(out);
            b.bn2.collect_mut(out);
        }
        self.fc.collect_mut(out);
        self.out.collect_mut(out);
    }
}
