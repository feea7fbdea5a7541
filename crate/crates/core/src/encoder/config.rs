use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Bidirectional LSTM over subword embeddings, mean-pooled.
    #[serde(rename = "bilstm")]
    BiLstm,
    /// Mean of subword embeddings.
    #[serde(rename = "bag-of-subwords")]
    BagOfSubwords,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::BiLstm => "bilstm",
            Architecture::BagOfSubwords => "bag-of-subwords",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Architecture::BiLstm => 0,
            Architecture::BagOfSubwords => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Architecture::BiLstm),
            1 => Ok(Architecture::BagOfSubwords),
            other => Err(Error::Format(format!("unknown architecture code {other}"))),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilstm" => Ok(Architecture::BiLstm),
            "bag-of-subwords" | "bow" => Ok(Architecture::BagOfSubwords),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub arch: Architecture,
    pub token_dim: usize,
    /// Per direction, for `bilstm`.
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub seed: u64,
    /// Subword vocabulary size (including the 256 byte units).
    pub vocab_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            arch: Architecture::BiLstm,
            token_dim: 100,
            hidden_dim: 256,
            output_dim: 100,
            epochs: 10,
            batch_size: 64,
            initial_lr: 0.01,
            final_lr: 0.0,
            seed: 0,
            vocab_size: 8000,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("token_dim", self.token_dim),
            ("hidden_dim", self.hidden_dim),
            ("output_dim", self.output_dim),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config("initial_lr must be positive".into()));
        }
        if !(self.final_lr >= 0.0 && self.final_lr <= self.initial_lr) {
            return Err(Error::Config(
                "final_lr must satisfy 0 <= final_lr <= initial_lr".into(),
            ));
        }
        if self.vocab_size <= super::tokenizer::BYTE_UNITS {
            return Err(Error::Config("vocab_size must exceed 256".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        if total == 0 {
            return self.initial_lr;
        }
        self.initial_lr - (self.initial_lr - self.final_lr) * (step as f64 / total as f64)
    }

    /// Width of the pooled representation fed to the projection.
    pub fn pooled_dim(&self) -> usize {
        match self.arch {
            Architecture::BiLstm => 2 * self.hidden_dim,
            Architecture::BagOfSubwords => self.token_dim,
        }
    }
}
