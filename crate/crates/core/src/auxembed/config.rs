use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountDamping {
    None,
    Log1p,
}

impl CountDamping {
    pub fn apply(self, count: u32) -> f64 {
        match self {
            CountDamping::None => count as f64,
            CountDamping::Log1p => (count as f64).ln_1p(),
        }
    }
}

impl std::str::FromStr for CountDamping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CountDamping::None),
            "log1p" => Ok(CountDamping::Log1p),
            other => Err(Error::Config(format!("unknown count damping {other:?}"))),
        }
    }
}

/// Hyperparameters for PV-DBOW training and inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxConfig {
    pub dim: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub negatives_k: usize,
    pub noise_power: f64,
    pub count_damping: CountDamping,
    pub seed: u64,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig {
            dim: 100,
            epochs: 20,
            initial_lr: 0.025,
            final_lr: 0.0001,
            negatives_k: 5,
            noise_power: 0.75,
            count_damping: CountDamping::Log1p,
            seed: 0,
        }
    }
}

impl AuxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!("dim must be >= 2, got {}", self.dim)));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config("initial_lr must be positive".into()));
        }
        if !(self.final_lr >= 0.0 && self.final_lr <= self.initial_lr) {
            return Err(Error::Config(
                "final_lr must satisfy 0 <= final_lr <= initial_lr".into(),
            ));
        }
        if self.negatives_k == 0 {
            return Err(Error::Config("negatives_k must be positive".into()));
        }
        if !self.noise_power.is_finite() {
            return Err(Error::Config("noise_power must be finite".into()));
        }
        Ok(())
    }

    /// Learning rate after `step` of `total` steps, decayed linearly.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        if total == 0 {
            return self.initial_lr;
        }
        let progress = step as f64 / total as f64;
        self.initial_lr - (self.initial_lr - self.final_lr) * progress
    }
}
