//! Allocation-only core of the text classification engine.
//!
//! Everything here is pure computation over in-memory values: dense `f64`
//! tensors, the tokenizer and vocabulary, layer forward/backward pairs, the
//! LSTM encoder, model assembly, optimizers, the finite-difference checker,
//! the bag-of-words baselines and ROC metrics. File formats, checkpoints and
//! the command line live in the `textcnn` crate.
//!
//! Gradients are computed per layer. Each `*_forward` returns its output and a
//! cache; the matching `*_backward` consumes the cache and returns gradients
//! with exactly the shapes of the layer's inputs and parameters.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
mod error;
pub mod layers;
pub(crate) mod math;
pub mod metrics;
pub mod models;
pub mod params;
pub mod rng;
pub mod rnn;
pub mod tensor;
pub mod text;
pub mod training;

pub use error::{Error, Result};
pub use models::{Arch, Channels, Model, ModelConfig};
pub use rng::Rng;
pub use tensor::Tensor;
