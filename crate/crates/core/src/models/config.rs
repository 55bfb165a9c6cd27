use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::layers::Pooling;
use crate::rnn::{same_padding, MergeMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    KimCnn,
    DeepCnn,
    Bilstm,
    CnnBilstm,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::KimCnn, Arch::DeepCnn, Arch::Bilstm, Arch::CnnBilstm];

    pub fn name(self) -> &'static str {
        match self {
            Arch::KimCnn => "kim_cnn",
            Arch::DeepCnn => "deep_cnn",
            Arch::Bilstm => "bilstm",
            Arch::CnnBilstm => "cnn_bilstm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Arch::Bilstm | Arch::CnnBilstm)
    }
}

/// `multi` stacks a trainable and a frozen copy of the word vectors as two input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channels {
    #[default]
    Single,
    Multi,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Single => 1,
            Channels::Multi => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawModelConfig")]
pub struct ModelConfig {
    pub arch: Arch,
    /// Kernel heights. For `cnn_bilstm` an empty list disables the front end.
    pub filter_sizes: Vec<usize>,
    pub num_filters: usize,
    pub emb_dim: usize,
    pub max_len: usize,
    pub channels: Channels,
    pub pool: Pooling,
    pub dropout_rate: f64,
    pub hidden: usize,
    pub merge: MergeMode,
    pub fc_hidden: usize,
}

impl ModelConfig {
    pub fn new(arch: Arch) -> Self {
        let filter_sizes = match arch {
            Arch::KimCnn => vec![2, 3, 4],
            Arch::DeepCnn => vec![1, 2, 3, 4, 5],
            Arch::Bilstm => Vec::new(),
            Arch::CnnBilstm => vec![1, 3, 5],
        };
        Self {
            arch,
            filter_sizes,
            num_filters: 64,
            emb_dim: 50,
            max_len: 40,
            channels: Channels::Single,
            pool: Pooling::Max1,
            dropout_rate: 0.5,
            hidden: 64,
            merge: MergeMode::Concat,
            fc_hidden: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_filters", self.num_filters),
            ("emb_dim", self.emb_dim),
            ("max_len", self.max_len),
            ("hidden", self.hidden),
            ("fc_hidden", self.fc_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} is outside [0, 1)", self.dropout_rate)));
        }
        if let Some(&h) = self.filter_sizes.iter().find(|&&h| h == 0 || h > self.max_len) {
            return Err(Error::Config(format!("filter size {h} must lie in 1..=max_len (max_len = {})", self.max_len)));
        }
        let mut sorted = self.filter_sizes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("filter sizes must be distinct; raise num_filters instead".into()));
        }
        match self.arch {
            Arch::KimCnn | Arch::DeepCnn => {
                if self.filter_sizes.is_empty() {
                    return Err(Error::Config(format!("{} needs at least one filter size", self.arch.name())));
                }
                let k = self.pool.width();
                // deep_cnn stacks two valid convolutions of height h
                let shortest = self
                    .filter_sizes
                    .iter()
                    .map(|&h| match self.arch {
                        Arch::DeepCnn => (self.max_len + 2).saturating_sub(2 * h),
                        _ => self.max_len + 1 - h,
                    })
                    .min()
                    .unwrap_or(0);
                if k == 0 || k > shortest {
                    return Err(Error::Config(format!(
                        "pooling {:?} needs feature maps of length ≥ {k}, the shortest is {shortest}",
                        self.pool
                    )));
                }
            }
            Arch::Bilstm => {
                if self.channels == Channels::Multi {
                    return Err(Error::Config(
                        "bilstm has no convolution to sum channels; use channels = \"single\"".into(),
                    ));
                }
            }
            Arch::CnnBilstm => {
                for &h in &self.filter_sizes {
                    same_padding(h)?;
                }
                if self.filter_sizes.is_empty() && self.channels == Channels::Multi {
                    return Err(Error::Config("multi-channel cnn_bilstm needs a convolutional front end".into()));
                }
            }
        }
        Ok(())
    }
}

/// Missing keys take the per-architecture defaults of [`ModelConfig::new`].
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelConfig {
    arch: Arch,
    filter_sizes: Option<Vec<usize>>,
    num_filters: Option<usize>,
    emb_dim: Option<usize>,
    max_len: Option<usize>,
    channels: Option<Channels>,
    pool: Option<Pooling>,
    dropout_rate: Option<f64>,
    hidden: Option<usize>,
    merge: Option<MergeMode>,
    fc_hidden: Option<usize>,
}

impl From<RawModelConfig> for ModelConfig {
    fn from(raw: RawModelConfig) -> Self {
        let d = ModelConfig::new(raw.arch);
        Self {
            arch: raw.arch,
            filter_sizes: raw.filter_sizes.unwrap_or(d.filter_sizes),
            num_filters: raw.num_filters.unwrap_or(d.num_filters),
            emb_dim: raw.emb_dim.unwrap_or(d.emb_dim),
            max_len: raw.max_len.unwrap_or(d.max_len),
            channels: raw.channels.unwrap_or(d.channels),
            pool: raw.pool.unwrap_or(d.pool),
            dropout_rate: raw.dropout_rate.unwrap_or(d.dropout_rate),
            hidden: raw.hidden.unwrap_or(d.hidden),
            merge: raw.merge.unwrap_or(d.merge),
            fc_hidden: raw.fc_hidden.unwrap_or(d.fc_hidden),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for arch in Arch::ALL {
            ModelConfig::new(arch).validate().unwrap();
            assert_eq!(Arch::from_name(arch.name()), Some(arch));
        }
    }

    #[test]
    fn oversized_filter_rejected() {
        let mut c = ModelConfig::new(Arch::KimCnn);
        c.max_len = 3;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn multi_channel_bilstm_rejected() {
        let mut c = ModelConfig::new(Arch::Bilstm);
        c.channels = Channels::Multi;
        assert!(c.validate().is_err());
    }

    #[test]
    fn even_hybrid_kernel_rejected() {
        let mut c = ModelConfig::new(Arch::CnnBilstm);
        c.filter_sizes = vec![2];
        assert!(c.validate().is_err());
    }
}
