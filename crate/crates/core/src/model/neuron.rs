use super::config::{LeakTarget, NeuronConfig, NeuronKind, ResetMode};
use super::head::SpikeTrace;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Membrane state around one time step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    /// After integration, before reset.
    pub membrane_pre: Var,
    pub spikes: Var,
    /// After reset; the next step's `V_prev`.
    pub membrane: Var,
}

/// One Integrate / Fire / Reset step on the tape.
///
/// `inv_tau` holds `1 / τ_m` and is required for LIF and PLIF.
pub fn neuron_step<T: Scalar>(
    tape: &mut Tape<T>,
    v_prev: Var,
    current: Var,
    cfg: &NeuronConfig,
    inv_tau: Option<Var>,
) -> Result<StepOutput> {
    let v_th = T::of(cfg.v_th);
    let membrane_pre = match cfg.kind {
        NeuronKind::IF => tape.add(v_prev, current)?,
        NeuronKind::LIF | NeuronKind::PLIF => {
            let inv_tau = inv_tau
                .ok_or_else(|| Error::Config(format!("{:?} neuron needs a time constant", cfg.kind)))?;
            let leak = match cfg.leak_target {
                LeakTarget::Threshold => v_th,
                LeakTarget::Zero => T::zero(),
            };
            let offset = tape.sub_scalar(v_prev, leak);
            let drive = tape.sub(current, offset)?;
            let delta = tape.scale_by(drive, inv_tau)?;
            tape.add(v_prev, delta)?
        }
    };

    let above = tape.sub_scalar(membrane_pre, v_th);
    let spikes = tape.heaviside(above, T::of(cfg.alpha), cfg.surrogate_chain_alpha)?;
    let gate = if cfg.detach_reset { tape.detach(spikes) } else { spikes };

    let keep = tape.rsub_scalar(T::one(), gate);
    let kept = tape.mul(keep, membrane_pre)?;
    let fired = match cfg.reset {
        ResetMode::Subtract => tape.mul(gate, above)?,
        ResetMode::ToConstant { v_reset } => tape.scale(gate, T::of(v_reset)),
    };
    let membrane = tape.add(fired, kept)?;
    Ok(StepOutput {
        membrane_pre,
        spikes,
        membrane,
    })
}

/// Record `1 / τ_m` for the configured neuron kind.
///
/// PLIF derives `τ_m = 1 + softplus(p)` from the trainable `tau_param`
/// leaf; LIF uses the fixed `tau_init`; IF has no time constant.
pub fn membrane_inverse_tau<T: Scalar>(
    tape: &mut Tape<T>,
    cfg: &NeuronConfig,
    tau_param: Option<Var>,
) -> Result<Option<Var>> {
    match cfg.kind {
        NeuronKind::IF => Ok(None),
        NeuronKind::LIF => Ok(Some(tape.constant(Tensor::scalar(T::one() / T::of(cfg.tau_init))))),
        NeuronKind::PLIF => {
            let p = tau_param.ok_or_else(|| Error::Config("PLIF neuron needs a tau parameter".into()))?;
            let soft = tape.softplus(p);
            let tau = tape.add_scalar(soft, T::one());
            Ok(Some(tape.recip(tau)))
        }
    }
}

/// Drive neurons with an explicit current per time step, starting at `V = 0`.
///
/// `tau_m` is used by LIF and PLIF and ignored by IF.
pub fn simulate_neuron<T: Scalar>(currents: &[Tensor<T>], cfg: &NeuronConfig, tau_m: T) -> Result<SpikeTrace<T>> {
    let first = currents
        .first()
        .ok_or_else(|| Error::Config("at least one time step is required".into()))?;
    let mut tape = Tape::default();
    let inv_tau = (cfg.kind != NeuronKind::IF).then(|| tape.constant(Tensor::scalar(T::one() / tau_m)));
    let mut v = tape.constant(Tensor::zeros(first.shape().to_vec()));
    let mut steps = Vec::with_capacity(currents.len());
    for c in currents {
        let i = tape.constant(c.clone());
        let out = neuron_step(&mut tape, v, i, cfg, inv_tau)?;
        v = out.membrane;
        steps.push(out);
    }
    SpikeTrace::collect(&tape, &steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: NeuronKind) -> NeuronConfig {
        NeuronConfig {
            kind,
            ..NeuronConfig::default()
        }
    }

    fn scalar_run(kind: NeuronKind, currents: &[f64], tau: f64) -> SpikeTrace<f64> {
        let cs: Vec<_> = currents.iter().map(|&c| Tensor::vector(vec![c])).collect();
        simulate_neuron(&cs, &cfg(kind), tau).unwrap()
    }

    #[test]
    fn if_hand_simulation() {
        let tr = scalar_run(NeuronKind::IF, &[0.6, 0.6, 0.6], 2.0);
        let pre: Vec<f64> = tr.membrane_pre.iter().map(|t| t.item()).collect();
        let post: Vec<f64> = tr.membrane.iter().map(|t| t.item()).collect();
        let spikes: Vec<f64> = tr.spikes.iter().map(|t| t.item()).collect();
        assert_eq!(spikes, vec![0.0, 1.0, 0.0]);
        assert_eq!(pre[0], 0.6);
        assert_eq!(pre[1], 0.6 + 0.6);
        assert_eq!(post[1], 0.6 + 0.6 - 1.0);
        assert_eq!(pre[2], 0.6 + 0.6 - 1.0 + 0.6);
    }

    #[test]
    fn no_input_no_spike() {
        let tr = scalar_run(NeuronKind::IF, &[0.0], 2.0);
        assert_eq!(tr.spikes[0].item(), 0.0);
        assert_eq!(tr.membrane[0].item(), 0.0);
    }

    #[test]
    fn lif_leaks_towards_threshold() {
        let tr = scalar_run(NeuronKind::LIF, &[0.0], 2.0);
        assert_eq!(tr.membrane_pre[0].item(), 0.5);
        assert_eq!(tr.spikes[0].item(), 0.0);
        let zero = NeuronConfig {
            leak_target: LeakTarget::Zero,
            ..cfg(NeuronKind::LIF)
        };
        let tr = simulate_neuron(&[Tensor::vector(vec![0.0])], &zero, 2.0).unwrap();
        assert_eq!(tr.membrane_pre[0].item(), 0.0);
    }

    #[test]
    fn constant_reset() {
        let c = NeuronConfig {
            kind: NeuronKind::IF,
            reset: ResetMode::ToConstant { v_reset: -0.25 },
            ..NeuronConfig::default()
        };
        let tr = simulate_neuron(&[Tensor::vector(vec![1.5, 0.2])], &c, 2.0).unwrap();
        assert_eq!(tr.spikes[0].data(), &[1.0, 0.0]);
        assert_eq!(tr.membrane[0].data(), &[-0.25, 0.2]);
    }

    #[test]
    fn missing_time_constant() {
        let mut tape = Tape::<f64>::default();
        let v = tape.constant(Tensor::vector(vec![0.0]));
        assert!(neuron_step(&mut tape, v, v, &cfg(NeuronKind::LIF), None).is_err());
    }
}
