use rand::Rng;

use super::config::ModelConfig;
use super::neuron::{membrane_inverse_tau, neuron_step, StepOutput};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Spikes and membrane potentials over `T` steps plus the firing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrace<T> {
    /// `T` binary tensors of shape `n × d_out`.
    pub spikes: Vec<Tensor<T>>,
    /// Potential after integration, before reset.
    pub membrane_pre: Vec<Tensor<T>>,
    /// Potential after reset.
    pub membrane: Vec<Tensor<T>>,
    /// `Σ_t S^t / T`.
    pub firing_rate: Tensor<T>,
}

impl<T: Scalar> SpikeTrace<T> {
    pub(crate) fn collect(tape: &Tape<T>, steps: &[StepOutput]) -> Result<Self> {
        let spikes: Vec<Tensor<T>> = steps.iter().map(|s| tape.value(s.spikes).clone()).collect();
        let mut total = Tensor::zeros(spikes[0].shape().to_vec());
        for s in &spikes {
            total.add_assign(s);
        }
        let steps_t = T::of(steps.len() as f64);
        Ok(Self {
            membrane_pre: steps.iter().map(|s| tape.value(s.membrane_pre).clone()).collect(),
            membrane: steps.iter().map(|s| tape.value(s.membrane).clone()).collect(),
            firing_rate: total.map(|v| v / steps_t),
            spikes,
        })
    }

    pub fn time_steps(&self) -> usize {
        self.spikes.len()
    }

    /// Fraction of zero entries over all spike tensors.
    pub fn sparsity(&self) -> f64 {
        let total: usize = self.spikes.iter().map(Tensor::len).sum();
        if total == 0 {
            return 1.0;
        }
        let zeros: usize = self
            .spikes
            .iter()
            .map(|s| s.data().iter().filter(|v| v.is_zero()).count())
            .sum();
        zeros as f64 / total as f64
    }
}

/// Handles produced by [`spiking_head`].
#[derive(Debug, Clone)]
pub struct HeadOutput {
    /// `dropout(H · W3)`, injected unchanged at every step.
    pub current: Var,
    pub steps: Vec<StepOutput>,
    /// Firing rate `ŷ`, shape `n × d_out`.
    pub rate: Var,
}

/// Linear projection to class currents followed by `T` neuron steps from
/// `V⁰ = 0`, read out as firing rates.
#[allow(clippy::too_many_arguments)]
pub fn spiking_head<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    h: Var,
    w3: Var,
    tau_param: Option<Var>,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<HeadOutput> {
    let ncfg = &cfg.neuron;
    if ncfg.time_steps < 1 {
        return Err(Error::Config("time_steps must be at least 1".into()));
    }
    let projected = tape.matmul(h, w3)?;
    let current = tape.dropout(projected, cfg.dropout, training, rng)?;
    let inv_tau = membrane_inverse_tau(tape, ncfg, tau_param)?;

    let mut v = tape.constant(Tensor::zeros(tape.value(current).shape().to_vec()));
    let mut steps = Vec::with_capacity(ncfg.time_steps);
    let mut total: Option<Var> = None;
    for _ in 0..ncfg.time_steps {
        let out = neuron_step(tape, v, current, ncfg, inv_tau)?;
        v = out.membrane;
        total = Some(match total {
            None => out.spikes,
            Some(acc) => tape.add(acc, out.spikes)?,
        });
        steps.push(out);
    }
    let total = total.expect("at least one step");
    let rate = tape.div_scalar(total, T::of(ncfg.time_steps as f64));
    Ok(HeadOutput { current, steps, rate })
}

impl HeadOutput {
    pub fn trace<T: Scalar>(&self, tape: &Tape<T>) -> Result<SpikeTrace<T>> {
        SpikeTrace::collect(tape, &self.steps)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::{NeuronConfig, NeuronKind};

    fn run(current: f64, kind: NeuronKind, steps: usize) -> (Tape<f64>, HeadOutput) {
        let cfg = ModelConfig {
            dropout: 0.0,
            neuron: NeuronConfig {
                kind,
                time_steps: steps,
                ..NeuronConfig::default()
            },
            ..ModelConfig::default()
        };
        let mut tape = Tape::default();
        let h = tape.constant(Tensor::from_rows(&[[1.0]]).unwrap());
        let w3 = tape.param(Tensor::from_rows(&[[current]]).unwrap());
        let tau = tape.param(Tensor::scalar(crate::model::params::tau_param_for(2.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = spiking_head(&mut tape, h, w3, Some(tau), &cfg, false, &mut rng).unwrap();
        (tape, out)
    }

    #[test]
    fn if_hand_simulation_five_steps() {
        // 0.625 is exact in binary, so the membrane reaches 1.125 at step 5.
        let (tape, out) = run(0.625, NeuronKind::IF, 5);
        let tr = out.trace(&tape).unwrap();
        let s: Vec<f64> = tr.spikes.iter().map(|t| t.item()).collect();
        assert_eq!(s, vec![0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(tape.value(out.rate).item(), 0.6);
        assert_eq!(tr.membrane.last().unwrap().item(), 0.125);
    }

    #[test]
    fn if_rounding_with_inexact_current() {
        // 0.6 accumulates to 0.9999999999999999 at step 5 and does not fire.
        let (tape, out) = run(0.6, NeuronKind::IF, 5);
        let tr = out.trace(&tape).unwrap();
        let s: Vec<f64> = tr.spikes.iter().map(|t| t.item()).collect();
        assert_eq!(s, vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(tr.membrane_pre[4].item(), 0.9999999999999999);
    }

    #[test]
    fn zero_current_never_spikes() {
        let (tape, out) = run(0.0, NeuronKind::IF, 6);
        assert_eq!(tape.value(out.rate).item(), 0.0);
    }

    #[test]
    fn saturating_current() {
        let (tape, out) = run(1.0, NeuronKind::IF, 7);
        assert_eq!(tape.value(out.rate).item(), 1.0);
    }

    #[test]
    fn plif_rate_is_a_multiple_of_inverse_t() {
        let (tape, out) = run(0.3, NeuronKind::PLIF, 9);
        let r = tape.value(out.rate).item() * 9.0;
        assert_eq!(r, r.round());
    }
}
