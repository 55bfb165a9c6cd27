//! Run configuration read from TOML.
//!
//! ```toml
//! seed = 42
//! output_dir = "runs/kim"
//!
//! [data]
//! path = "data/substitute_corpus.csv"
//! format = "two_col"
//!
//! [model]
//! arch = "kim_cnn"
//!
//! [train]
//! epochs = 5
//! ```
//!
//! Unknown keys are errors. The top-level `seed` drives every random stream;
//! `train.seed` is not accepted in the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use textcnn_core::text::TokenizeOptions;
use textcnn_core::training::TrainConfig;
use textcnn_core::ModelConfig;

use crate::dataset::DataFormat;
use crate::error::{AppError, AppResult};

pub const RESOLVED_CONFIG: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "model.txcn";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DataFormat,
    #[serde(default)]
    pub tokenize: TokenizeOptions,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    /// Seeded subsample size; the whole file when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

fn default_min_count() -> usize {
    1
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Whitespace-separated word vectors used to initialize the embedding table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        let raw: toml::Table = text.parse().map_err(|e| AppError::Config(format!("config: {e}")))?;
        if raw.get("train").and_then(|t| t.get("seed")).is_some() {
            return Err(AppError::Config("config: set `seed` at the top level, not under [train]".into()));
        }
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| AppError::Config(format!("config: {}", e.message())))?;
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> AppResult<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.data.min_count == 0 {
            return Err(AppError::Config("data.min_count must be at least 1".into()));
        }
        if self.data.limit == Some(0) {
            return Err(AppError::Config("data.limit must be positive".into()));
        }
        Ok(())
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Fully resolved TOML, with every default written out.
    pub fn to_toml(&self) -> String {
        let mut value = toml::Value::try_from(self).expect("config serializes");
        if let Some(train) = value.get_mut("train").and_then(toml::Value::as_table_mut) {
            train.remove("seed");
        }
        toml::to_string(&value).expect("config serializes")
    }
}
