//! Feed-forward layers as explicit forward/backward pairs.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod loss;
pub mod pool;

pub use activation::{relu_backward, relu_forward, ReluCache};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache, BnStats};
pub use conv::{
    conv1d_backward, conv1d_forward, conv_out_len, text_conv_backward, text_conv_forward, ConvCache, ConvGeometry,
    ConvGrads, ConvParams,
};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseParams};
pub use dropout::{dropout_backward, dropout_forward, DropoutCache};
pub use embedding::{embedding_backward, embedding_forward};
pub use loss::bce_with_logits;
pub use pool::{pool_backward, pool_forward, PoolCache, Pooling};

/// Execution mode for layers whose behavior differs between training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, running-stat updates, live dropout.
    Train,
    /// Running statistics, dropout disabled.
    Eval,
    /// Batch statistics without running-stat updates and without dropout:
    /// the loss is a deterministic function of the parameters. Used by the
    /// gradient checker.
    Check,
}
