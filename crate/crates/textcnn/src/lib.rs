//! Standard-library companion to `textcnn-core`: dataset readers, pretrained
//! vectors, checkpoints, run configuration, reports and the command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod report;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::RunConfig;
pub use error::{AppError, AppResult};
