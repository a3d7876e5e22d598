use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Optimizer, schedule and model settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            weight_decay: 0.001,
            epochs: 200,
            patience: 100,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 || self.patience == 0 {
            return Err(Error::Config("epochs and patience must be positive".into()));
        }
        if self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience ({}) exceeds epochs ({})",
                self.patience, self.epochs
            )));
        }
        self.model.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}
