//! Binary model checkpoints.
//!
//! Layout: `TXCN`, version (u32 LE), metadata length (u32 LE), UTF-8 JSON
//! metadata, then every tensor as little-endian `f64` in manifest order.
//! Offsets in the manifest are byte offsets into the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use textcnn_core::text::{TokenizeOptions, Vocabulary};
use textcnn_core::{Model, ModelConfig, Rng};

pub const MAGIC: &[u8; 4] = b"TXCN";
pub const VERSION: u32 = 1;
pub const SUPPORTED_VERSIONS: &[u32] = &[VERSION];

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type CkResult<T> = Result<T, CheckpointError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    model: ModelConfig,
    tokenize: TokenizeOptions,
    vocab: Vec<String>,
    tensors: Vec<TensorEntry>,
}

/// A trained model with the preprocessing needed to feed it raw text.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub vocab: Vocabulary,
    pub tokenize: TokenizeOptions,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> CkResult<Vec<u8>> {
        if self.vocab.len() != self.model.vocab_size() {
            return Err(CheckpointError::Format(format!(
                "vocabulary has {} entries but the model expects {}",
                self.vocab.len(),
                self.model.vocab_size()
            )));
        }
        let params = self.model.named_params();
        let mut tensors = Vec::with_capacity(params.len());
        let mut offset = 0u64;
        for p in &params {
            tensors.push(TensorEntry { name: p.name.clone(), shape: p.tensor.shape().to_vec(), offset });
            offset += 8 * p.tensor.len() as u64;
        }
        let meta = Metadata {
            model: self.model.config().clone(),
            tokenize: self.tokenize,
            vocab: self.vocab.tokens().to_vec(),
            tensors,
        };
        let json = serde_json::to_vec(&meta).map_err(|e| CheckpointError::Format(e.to_string()))?;
        let meta_len =
            u32::try_from(json.len()).map_err(|_| CheckpointError::Format("metadata exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(12 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(&json);
        for p in &params {
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> CkResult<Self> {
        if bytes.is_empty() {
            return Err(CheckpointError::Corrupt("file is empty".into()));
        }
        if bytes.len() < 12 {
            return Err(CheckpointError::Corrupt(format!("{} bytes is shorter than the 12-byte header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(CheckpointError::Format("missing TXCN magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if !SUPPORTED_VERSIONS.contains(&version) {
            return Err(CheckpointError::Format(format!(
                "unsupported version {version}; supported versions: {SUPPORTED_VERSIONS:?}"
            )));
        }
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let rest = &bytes[12..];
        if rest.len() < meta_len {
            return Err(CheckpointError::Corrupt(format!(
                "metadata needs {meta_len} bytes, only {} remain",
                rest.len()
            )));
        }
        let meta: Metadata = serde_json::from_slice(&rest[..meta_len])
            .map_err(|e| CheckpointError::Corrupt(format!("metadata: {e}")))?;
        let payload = &rest[meta_len..];

        let vocab = Vocabulary::from_tokens(meta.vocab).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let mut model = Model::build(meta.model, vocab.len(), &mut Rng::new(0))
            .map_err(|e| CheckpointError::Corrupt(format!("stored model config: {e}")))?;
        let expected: Vec<(String, Vec<usize>)> =
            model.named_params().iter().map(|p| (p.name.clone(), p.tensor.shape().to_vec())).collect();
        if expected.len() != meta.tensors.len() {
            return Err(CheckpointError::Corrupt(format!(
                "manifest lists {} tensors, the stored config implies {}",
                meta.tensors.len(),
                expected.len()
            )));
        }
        let mut cursor = 0u64;
        for (entry, (name, shape)) in meta.tensors.iter().zip(&expected) {
            if &entry.name != name || &entry.shape != shape {
                return Err(CheckpointError::Corrupt(format!(
                    "manifest entry {} {:?} does not match expected {name} {shape:?}",
                    entry.name, entry.shape
                )));
            }
            if entry.offset != cursor {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor {name} has offset {}, expected {cursor}",
                    entry.offset
                )));
            }
            let n = shape.iter().product::<usize>();
            let start = cursor as usize;
            let end = start + 8 * n;
            let Some(raw) = payload.get(start..end) else {
                return Err(CheckpointError::Corrupt(format!("payload truncated inside tensor {name}")));
            };
            let target = model.param_mut(name).expect("name taken from the model");
            for (dst, chunk) in target.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
                *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            cursor = end as u64;
        }
        if cursor as usize != payload.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes after the last tensor",
                payload.len() - cursor as usize
            )));
        }
        Ok(Self { model, vocab, tokenize: meta.tokenize })
    }

    pub fn save(&self, path: &Path) -> CkResult<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| CheckpointError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> CkResult<Self> {
        let bytes = fs::read(path).map_err(|e| CheckpointError::Io { path: path.display().to_string(), source: e })?;
        Self::from_bytes(&bytes)
    }
}
