//! Optimizers, the mini-batch training loop and the finite-difference
//! gradient checker.

pub mod fit;
pub mod gradcheck;
pub mod optim;

pub use fit::{evaluate, fit, fit_with, predict_logits, train_val_split, EpochRecord, EvalSummary, TrainConfig};
pub use gradcheck::{
    grad_check, tiny_config, GradCase, GradCheckOptions, GradCheckReport, TensorReport, LAYER_CASES, LAYER_TOL,
    MODEL_CASES, MODEL_TOL,
};
pub use optim::{clip_global_norm, Optimizer, OptimizerKind};
