use rand::Rng;

use super::config::NeuronKind;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Trainable tensors, in declaration order `W1, W2, b, q, W3, tau`.
///
/// `tau_param` exists only for PLIF and stores the unconstrained value `p`
/// with `τ_m = 1 + ln(1 + e^p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b: Tensor<T>,
    pub q: Tensor<T>,
    pub w3: Tensor<T>,
    pub tau_param: Option<T>,
}

/// Tape handles for one registration of [`ModelParams`].
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub w1: Var,
    pub w2: Var,
    pub b: Var,
    pub q: Var,
    pub w3: Var,
    pub tau: Option<Var>,
}

impl ParamVars {
    pub fn to_vec(&self) -> Vec<Var> {
        let mut v = vec![self.w1, self.w2, self.b, self.q, self.w3];
        v.extend(self.tau);
        v
    }
}

pub const PARAM_NAMES: [&str; 6] = ["W1", "W2", "b", "q", "W3", "tau"];

/// `d_in·d_hd + d_hd² + 2·d_hd + d_hd·d_out`, plus one for PLIF.
pub fn parameter_count(d_in: usize, d_hd: usize, d_out: usize, kind: NeuronKind) -> usize {
    d_in * d_hd + d_hd * d_hd + d_hd + d_hd + d_hd * d_out + usize::from(kind == NeuronKind::PLIF)
}

fn glorot<T: Scalar, R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, vec![fan_in, fan_out], bound)
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, shape: Vec<usize>, bound: f64) -> Tensor<T> {
    let len = shape.iter().product();
    let data = (0..len).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
    Tensor::new(shape, data).expect("length matches shape")
}

/// Inverse of `τ = 1 + softplus(p)`.
pub(crate) fn tau_param_for(tau: f64) -> f64 {
    (tau - 1.0).exp_m1().ln()
}

impl<T: Scalar> ModelParams<T> {
    /// Scaled-uniform weights, small uniform `b` and `q`, and `τ_m = tau_init`.
    pub fn init<R: Rng + ?Sized>(
        d_in: usize,
        d_hd: usize,
        d_out: usize,
        kind: NeuronKind,
        tau_init: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if d_in == 0 || d_hd == 0 || d_out == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive: d_in={d_in}, d_hd={d_hd}, d_out={d_out}"
            )));
        }
        let w1 = glorot(rng, d_in, d_hd);
        let w2 = glorot(rng, d_hd, d_hd);
        let b = uniform(rng, vec![d_hd], 0.01);
        let q = uniform(rng, vec![d_hd], 0.01);
        let w3 = glorot(rng, d_hd, d_out);
        let tau_param = (kind == NeuronKind::PLIF).then(|| T::of(tau_param_for(tau_init)));
        Ok(Self {
            w1,
            w2,
            b,
            q,
            w3,
            tau_param,
        })
    }

    /// Assemble from explicit tensors, checking every shape.
    pub fn from_tensors(
        w1: Tensor<T>,
        w2: Tensor<T>,
        b: Tensor<T>,
        q: Tensor<T>,
        w3: Tensor<T>,
        tau_param: Option<T>,
    ) -> Result<Self> {
        let p = Self {
            w1,
            w2,
            b,
            q,
            w3,
            tau_param,
        };
        p.check_shapes()?;
        Ok(p)
    }

    fn check_shapes(&self) -> Result<()> {
        let (_, d_hd, _) = self.dims();
        let ok = self.w1.is_matrix()
            && self.w2.shape() == [d_hd, d_hd]
            && self.b.shape() == [d_hd]
            && self.q.shape() == [d_hd]
            && self.w3.is_matrix()
            && self.w3.rows() == d_hd;
        if !ok {
            return Err(Error::Shape(format!(
                "inconsistent parameter shapes: W1 {:?}, W2 {:?}, b {:?}, q {:?}, W3 {:?}",
                self.w1.shape(),
                self.w2.shape(),
                self.b.shape(),
                self.q.shape(),
                self.w3.shape()
            )));
        }
        Ok(())
    }

    /// `(d_in, d_hd, d_out)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.rows(), self.w1.cols(), self.w3.cols())
    }

    pub fn element_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Named tensors in declaration order; `tau` is a one-element tensor.
    pub fn tensors(&self) -> Vec<(&'static str, Tensor<T>)> {
        let mut out = vec![
            (PARAM_NAMES[0], self.w1.clone()),
            (PARAM_NAMES[1], self.w2.clone()),
            (PARAM_NAMES[2], self.b.clone()),
            (PARAM_NAMES[3], self.q.clone()),
            (PARAM_NAMES[4], self.w3.clone()),
        ];
        if let Some(t) = self.tau_param {
            out.push((PARAM_NAMES[5], Tensor::scalar(t)));
        }
        out
    }

    /// Mutable views in declaration order, used by the optimizer.
    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![
            self.w1.data_mut(),
            self.w2.data_mut(),
            self.b.data_mut(),
            self.q.data_mut(),
            self.w3.data_mut(),
        ];
        if let Some(t) = self.tau_param.as_mut() {
            out.push(std::slice::from_mut(t));
        }
        out
    }

    /// Register every tensor as a trainable leaf.
    pub fn register(&self, tape: &mut Tape<T>) -> ParamVars {
        ParamVars {
            w1: tape.param(self.w1.clone()),
            w2: tape.param(self.w2.clone()),
            b: tape.param(self.b.clone()),
            q: tape.param(self.q.clone()),
            w3: tape.param(self.w3.clone()),
            tau: self.tau_param.map(|t| tape.param(Tensor::scalar(t))),
        }
    }

    /// `τ_m` for PLIF parameters.
    pub fn tau_m(&self) -> Option<T> {
        self.tau_param.map(|p| T::one() + crate::autodiff::tape_softplus(p))
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.all_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            w1: self.w1.cast(),
            w2: self.w2.cast(),
            b: self.b.cast(),
            q: self.q.cast(),
            w3: self.w3.cast(),
            tau_param: self.tau_param.map(|t| U::of(t.to_f64_lossless())),
        }
    }
}
