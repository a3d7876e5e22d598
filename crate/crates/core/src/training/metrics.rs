use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-wise argmax; ties go to the lowest class id.
pub fn predict<T: Scalar>(y_hat: &Tensor<T>) -> Vec<usize> {
    (0..y_hat.rows())
        .map(|i| {
            let row = y_hat.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// `(micro_f1, macro_f1)` for single-label multiclass predictions.
///
/// A class that appears in neither predictions nor truth contributes an F1
/// of zero to the macro average.
pub fn f1_scores(predictions: &[usize], truth: &[usize], num_classes: usize) -> Result<(f64, f64)> {
    if predictions.is_empty() {
        return Err(Error::Config("F1 of an empty prediction set".into()));
    }
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::Config("num_classes must be positive".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::Config(format!("class id {} outside 0..{num_classes}", p.max(t))));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_ = (0..num_classes).map(|c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / num_classes as f64;
    Ok((micro, macro_))
}

pub fn accuracy(predictions: &[usize], truth: &[usize]) -> f64 {
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / predictions.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        assert_eq!(f1_scores(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn hand_confusion_matrix() {
        let (micro, macro_) = f1_scores(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(micro, 0.75);
        assert!((macro_ - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_predictions() {
        let (micro, macro_) = f1_scores(&[0; 6], &[0, 1, 0, 1, 0, 1], 2).unwrap();
        assert_eq!(micro, 0.5);
        assert!((macro_ - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(f1_scores(&[], &[], 2), Err(Error::Config(_))));
    }

    #[test]
    fn argmax_with_ties() {
        let y = Tensor::from_rows(&[[0.2, 0.8, 0.0], [0.0, 0.0, 0.0], [0.25, 0.5, 0.25]]).unwrap();
        assert_eq!(predict(&y), vec![1, 0, 1]);
    }
}
