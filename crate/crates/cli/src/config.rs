use std::path::{Path, PathBuf};

use serde::Deserialize;
use spikinghan::data::DEFAULT_SPLIT_RATIOS;
use spikinghan::model::{Activation, LeakTarget, NeuronKind, ResetMode};
use spikinghan::training::TrainConfig;

use crate::CliError;

/// Flat run configuration. Every key is optional; absent keys keep the
/// library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,

    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,

    pub hidden_dim: Option<usize>,
    pub activation: Option<Activation>,
    pub dropout: Option<f64>,
    pub normalize_readout: Option<bool>,

    pub neuron: Option<NeuronKind>,
    pub v_th: Option<f64>,
    pub reset: Option<ResetMode>,
    pub leak_target: Option<LeakTarget>,
    pub alpha: Option<f64>,
    pub tau_init: Option<f64>,
    pub time_steps: Option<usize>,
    pub surrogate_chain_alpha: Option<bool>,
    pub detach_reset: Option<bool>,

    /// Used when the dataset has no `splits.json`.
    pub split_ratios: Option<[f64; 3]>,
    pub split_seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn split_ratios(&self) -> (f64, f64, f64) {
        self.split_ratios
            .map(|[a, b, c]| (a, b, c))
            .unwrap_or(DEFAULT_SPLIT_RATIOS)
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(0)
    }

    /// The validated training configuration for one seed.
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let mut cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            learning_rate => cfg.learning_rate,
            weight_decay => cfg.weight_decay,
            epochs => cfg.epochs,
            patience => cfg.patience,
            hidden_dim => cfg.model.hidden_dim,
            activation => cfg.model.activation,
            dropout => cfg.model.dropout,
            normalize_readout => cfg.model.normalize_readout,
            neuron => cfg.model.neuron.kind,
            v_th => cfg.model.neuron.v_th,
            reset => cfg.model.neuron.reset,
            leak_target => cfg.model.neuron.leak_target,
            alpha => cfg.model.neuron.alpha,
            tau_init => cfg.model.neuron.tau_init,
            time_steps => cfg.model.neuron.time_steps,
            surrogate_chain_alpha => cfg.model.neuron.surrogate_chain_alpha,
            detach_reset => cfg.model.neuron.detach_reset,
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.train_config(3).unwrap(), TrainConfig { seed: 3, ..TrainConfig::default() });
    }

    #[test]
    fn keys_override() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"learning_rate": 0.01, "neuron": "IF", "reset": {"to_constant": {"v_reset": 0.0}}, "time_steps": 4}"#,
        )
        .unwrap();
        let t = cfg.train_config(0).unwrap();
        assert_eq!(t.learning_rate, 0.01);
        assert_eq!(t.model.neuron.kind, NeuronKind::IF);
        assert_eq!(t.model.neuron.reset, ResetMode::ToConstant { v_reset: 0.0 });
        assert_eq!(t.model.neuron.time_steps, 4);
    }

    #[test]
    fn unknown_and_invalid_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"lr": 0.1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"learning_rate": NaN}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"patience": 300}"#).unwrap();
        assert!(matches!(cfg.train_config(0), Err(CliError::Config(_))));
    }
}
