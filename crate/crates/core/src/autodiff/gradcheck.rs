use super::tape::{Tape, TapeMode, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compare tape gradients of `f` against central differences.
///
/// `f` records a scalar function of the registered parameter leaves on a
/// [`TapeMode::SmoothSurrogate`] tape. Returns the largest
/// `|numeric - analytic| / max(1, |analytic|)` over every coordinate.
pub fn finite_difference_check<T, F>(f: F, params: &[Tensor<T>], epsilon: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor<T>]| -> Result<T> {
        let mut tape = Tape::new(TapeMode::SmoothSurrogate);
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out).item();
        if !v.is_finite() {
            return Err(Error::Numeric(format!("function value {v} is not finite")));
        }
        Ok(v)
    };

    let mut tape = Tape::new(TapeMode::SmoothSurrogate);
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).item().is_finite() {
        return Err(Error::Numeric("function value is not finite".into()));
    }
    let grads = tape.backward(out)?;

    let two = T::one() + T::one();
    let mut worst = T::zero();
    let mut work: Vec<Tensor<T>> = params.to_vec();
    for (p, &var) in vars.iter().enumerate() {
        let analytic = grads.get(var).expect("every parameter is a trainable leaf");
        for k in 0..params[p].len() {
            let orig = params[p].data()[k];
            work[p].data_mut()[k] = orig + epsilon;
            let up = eval(&work)?;
            work[p].data_mut()[k] = orig - epsilon;
            let down = eval(&work)?;
            work[p].data_mut()[k] = orig;
            let numeric = (up - down) / (two * epsilon);
            let g = analytic.data()[k];
            let rel = (numeric - g).abs() / g.abs().max(T::one());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
