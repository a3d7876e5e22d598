use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower clamp inside the logarithm; firing rates can be exactly zero.
pub const LOG_CLAMP: f64 = 1e-8;

/// `-Σ_{i ∈ labeled} ln(max(ŷ[i, y_i], ε))`, summed (not averaged).
///
/// `labels[i]` is the class of node `i`; only rows listed in `labeled_ids`
/// contribute.
pub fn masked_cross_entropy<T: Scalar>(
    tape: &mut Tape<T>,
    probabilities: Var,
    labels: &[i64],
    labeled_ids: &[usize],
) -> Result<Var> {
    if labeled_ids.is_empty() {
        return Err(Error::Config("cross-entropy needs at least one labeled node".into()));
    }
    let classes = tape.value(probabilities).cols();
    let mut targets = Vec::with_capacity(labeled_ids.len());
    for &i in labeled_ids {
        let label = *labels.get(i).ok_or(Error::Index { index: i, len: labels.len() })?;
        if label < 0 || label as usize >= classes {
            return Err(Error::Config(format!("node {i} has label {label}, outside 0..{classes}")));
        }
        targets.push((i, label as usize));
    }
    tape.masked_cross_entropy(probabilities, &targets, T::of(LOG_CLAMP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn loss_of(rows: &[[f64; 2]], labels: &[i64], ids: &[usize]) -> (f64, Tensor<f64>) {
        let mut tape = Tape::default();
        let y = tape.param(Tensor::from_rows(rows).unwrap());
        let l = masked_cross_entropy(&mut tape, y, labels, ids).unwrap();
        let value = tape.value(l).item();
        let g = tape.backward(l).unwrap();
        (value, g.get(y).unwrap().clone())
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(loss_of(&[[0.0, 1.0]], &[1], &[0]).0, 0.0);
        let (l, _) = loss_of(&[[0.5, 0.5]], &[0], &[0]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = loss_of(&[[0.0, 1.0]], &[0], &[0]);
        assert!((l - 18.42).abs() < 0.01 && l.is_finite());
    }

    #[test]
    fn unlabeled_rows_get_no_gradient() {
        let (_, g) = loss_of(&[[0.2, 0.8], [0.5, 0.5]], &[1, -1], &[0]);
        assert_eq!(g.row(1), &[0.0, 0.0]);
        assert_eq!(g.get(0, 0), 0.0);
        assert!((g.get(0, 1) + 1.0 / 0.8).abs() < 1e-15);
    }

    #[test]
    fn empty_labeled_set() {
        let mut tape = Tape::<f64>::default();
        let y = tape.param(Tensor::from_rows(&[[0.2, 0.8]]).unwrap());
        assert!(matches!(masked_cross_entropy(&mut tape, y, &[0], &[]), Err(Error::Config(_))));
    }
}
