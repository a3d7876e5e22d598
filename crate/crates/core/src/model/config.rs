use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeuronKind {
    /// `V = V_prev + I`
    IF,
    /// Leaky integration with a fixed membrane time constant.
    LIF,
    /// LIF with a trainable time constant.
    PLIF,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// `V ← V - V_th` after a spike.
    Subtract,
    /// `V ← v_reset` after a spike.
    ToConstant { v_reset: f64 },
}

/// Potential the LIF leak pulls the membrane towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakTarget {
    /// `V + (I - (V - V_th)) / τ`
    Threshold,
    /// `V + (I - V) / τ`
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronConfig {
    pub kind: NeuronKind,
    pub v_th: f64,
    pub reset: ResetMode,
    pub leak_target: LeakTarget,
    /// Surrogate smoothing factor `α`.
    pub alpha: f64,
    /// Initial (LIF: fixed) membrane time constant, `> 1`.
    pub tau_init: f64,
    pub time_steps: usize,
    /// Use `α σ'(αx)` instead of `σ'(αx)` as the spike derivative.
    pub surrogate_chain_alpha: bool,
    /// Stop gradients through the spike used by the reset.
    pub detach_reset: bool,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            kind: NeuronKind::PLIF,
            v_th: 1.0,
            reset: ResetMode::Subtract,
            leak_target: LeakTarget::Threshold,
            alpha: 2.0,
            tau_init: 2.0,
            time_steps: 8,
            surrogate_chain_alpha: false,
            detach_reset: false,
        }
    }
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_th.is_finite() && self.v_th > 0.0) {
            return Err(Error::Config(format!("v_th must be positive and finite, got {}", self.v_th)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        if self.time_steps < 1 {
            return Err(Error::Config("time_steps must be at least 1".into()));
        }
        if self.kind != NeuronKind::IF && !(self.tau_init.is_finite() && self.tau_init > 1.0) {
            return Err(Error::Config(format!("tau_init must exceed 1, got {}", self.tau_init)));
        }
        if let ResetMode::ToConstant { v_reset } = self.reset {
            if !(v_reset.is_finite() && v_reset < self.v_th) {
                return Err(Error::Config(format!(
                    "v_reset must be finite and below v_th ({}), got {v_reset}",
                    self.v_th
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    /// Nonlinearity after the shared graph convolution.
    pub activation: Activation,
    /// Dropout on the input current `H · W3`.
    pub dropout: f64,
    /// Divide firing rates by their row sum before the loss.
    pub normalize_readout: bool,
    pub neuron: NeuronConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            activation: Activation::Relu,
            dropout: 0.5,
            normalize_readout: false,
            neuron: NeuronConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        self.neuron.validate()
    }
}
