use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::InitMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::Config(format!("unknown optimizer `{s}`"))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Fraction of all steps spent ramping the learning rate up linearly.
    pub warmup_ratio: f64,
    pub seed: u64,
    pub n_hard_negatives: usize,
    pub max_view_tokens: usize,
    pub max_ctx_tokens: usize,
    pub optimizer: Optimizer,
    /// Used when training starts from fresh parameters.
    pub init: InitMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            batch_size: 32,
            epochs: 10,
            learning_rate: 0.05,
            weight_decay: 0.0,
            warmup_ratio: 0.1,
            seed: 0,
            n_hard_negatives: 0,
            max_view_tokens: 40,
            max_ctx_tokens: 128,
            optimizer: Optimizer::Sgd,
            init: InitMode::Tied,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size < 2 {
            return fail("batch_size must be >= 2");
        }
        if self.dim == 0 {
            return fail("dim must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return fail("warmup_ratio must lie in [0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail("learning_rate must be finite and non-negative");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail("weight_decay must be finite and non-negative");
        }
        if self.max_view_tokens == 0 {
            return fail("max_view_tokens must be >= 1");
        }
        Ok(())
    }

    /// Learning rate at 0-based `step` of `total_steps`.
    pub fn rate_at(&self, step: usize, total_steps: usize) -> f64 {
        let warmup = (self.warmup_ratio * total_steps as f64).ceil() as usize;
        if warmup == 0 || step >= warmup {
            self.learning_rate
        } else {
            self.learning_rate * (step + 1) as f64 / warmup as f64
        }
    }
}
