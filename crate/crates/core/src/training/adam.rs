use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Classic L2: `λθ` is added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moments per parameter tensor, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes
            .into_iter()
            .map(|n| (vec![T::zero(); n], vec![T::zero(); n]))
            .unzip();
        Self { m, v, t: 0 }
    }

    pub fn for_params(params: &ModelParams<T>) -> Self {
        Self::new(params.tensors().iter().map(|(_, t)| t.len()))
    }
}

/// One bias-corrected Adam step over parallel parameter / gradient slices.
pub fn adam_update<T: Scalar>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    names: &[&str],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[k].len() {
            return Err(Error::Shape(format!(
                "parameter `{}`: {} values, {} gradients",
                names.get(k).unwrap_or(&"?"),
                p.len(),
                g.len()
            )));
        }
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient {bad} for parameter `{}`",
                names.get(k).unwrap_or(&"?")
            )));
        }
    }

    state.t += 1;
    let one = T::one();
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (lr, eps, wd) = (T::of(cfg.learning_rate), T::of(cfg.eps), T::of(cfg.weight_decay));
    let t = state.t as i32;
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for j in 0..p.len() {
            let gj = g[j] + wd * p[j];
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            if cfg.learning_rate != 0.0 {
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}

/// [`adam_update`] over the tensors of a [`ModelParams`] in declaration order.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &[&[T]],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    let names: Vec<&str> = params.tensors().iter().map(|(n, _)| *n).collect();
    let mut slices = params.slices_mut();
    adam_update(&mut slices, grads, &names, state, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(p: &mut Vec<f64>, g: &[f64], state: &mut AdamState<f64>, cfg: &AdamConfig) -> Result<()> {
        adam_update(&mut [p.as_mut_slice()], &[g], &["x"], state, cfg)
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.5, -2.0];
        let mut s = AdamState::new([2]);
        step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![0.5, -2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_magnitude() {
        let mut p = vec![1.0];
        let mut s = AdamState::new([1]);
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        step(&mut p, &[1.0], &mut s, &cfg).unwrap();
        let update = 1.0 - p[0];
        assert!((update - 0.01 / (1.0 + 1e-8)).abs() < 1e-15, "{update}");
    }

    #[test]
    fn identical_gradients_identical_updates() {
        let mut p = vec![0.3, 0.3];
        let mut s = AdamState::new([2]);
        for g in [0.7, -0.1, 2.0] {
            step(&mut p, &[g, g], &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn zero_learning_rate_is_bitwise_identity() {
        let mut p = vec![0.3, -0.0, 1e-300];
        let orig = p.clone();
        let mut s = AdamState::new([3]);
        let cfg = AdamConfig {
            learning_rate: 0.0,
            weight_decay: 0.1,
            ..AdamConfig::default()
        };
        step(&mut p, &[1.0, -4.0, 0.5], &mut s, &cfg).unwrap();
        assert!(p.iter().zip(&orig).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = vec![0.0];
        let mut s = AdamState::new([1]);
        let err = adam_update(&mut [p.as_mut_slice()], &[&[f64::NAN]], &["W3"], &mut s, &AdamConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("W3"), "{err}");
        assert_eq!(s.t, 0);
    }
}
