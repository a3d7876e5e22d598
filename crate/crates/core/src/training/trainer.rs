use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::loss::masked_cross_entropy;
use super::metrics::{f1_scores, predict};
use super::report::EpochRecord;
use crate::autodiff::{Tape, Var};
use crate::data::{DatasetBundle, Splits};
use crate::error::{Error, Result};
use crate::model::{model_forward, ModelConfig, ModelInputs, ModelParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub test_micro_f1: f64,
    pub test_macro_f1: f64,
    pub best_val_micro_f1: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub loss_history: Vec<f64>,
    /// Meta-path weights of the selected parameters.
    pub beta: Vec<f64>,
    /// Mean of `ŷ` over all nodes and classes, selected parameters.
    pub mean_firing_rate: f64,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters of the best validation epoch.
    pub params: ModelParams<T>,
    pub metrics: Metrics,
    pub history: Vec<EpochRecord>,
}

/// Micro/macro F1 of eval-mode predictions restricted to `ids`.
pub fn evaluate_split<T: Scalar>(
    params: &ModelParams<T>,
    inputs: &ModelInputs<T>,
    cfg: &ModelConfig,
    labels: &[i64],
    ids: &[usize],
    num_classes: usize,
) -> Result<(f64, f64)> {
    let inference = params.infer(inputs, cfg)?;
    let predictions = predict(&inference.y_hat);
    let (p, t): (Vec<usize>, Vec<usize>) = ids
        .iter()
        .map(|&i| (predictions[i], labels[i] as usize))
        .unzip();
    f1_scores(&p, &t, num_classes)
}

/// Train on a bundle whose splits are already set.
pub fn train(bundle: &DatasetBundle, cfg: &TrainConfig) -> Result<TrainOutcome<f64>> {
    let splits = bundle
        .splits
        .as_ref()
        .ok_or_else(|| Error::Config("dataset has no splits; generate them with make_splits".into()))?;
    let inputs = bundle.model_inputs()?;
    train_inputs(&inputs, &bundle.labels, splits, bundle.num_classes, cfg)
}

/// Full-batch training with early stopping on validation Micro-F1.
///
/// Each epoch runs a training-mode forward pass, the summed cross-entropy
/// over `splits.train`, one backward pass and one Adam step, then scores
/// the validation split in eval mode. The best epoch (ties keep the
/// earlier one) is restored and scored on the test split.
pub fn train_inputs<T: Scalar>(
    inputs: &ModelInputs<T>,
    labels: &[i64],
    splits: &Splits,
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let started = Instant::now();
    cfg.validate()?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::Config("training needs non-empty train and val splits".into()));
    }
    if labels.len() != inputs.num_nodes() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            labels.len(),
            inputs.num_nodes()
        )));
    }
    let mcfg = &cfg.model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::<T>::init(
        inputs.feature_dim(),
        mcfg.hidden_dim,
        num_classes,
        mcfg.neuron.kind,
        mcfg.neuron.tau_init,
        &mut rng,
    )?;
    let mut adam = AdamState::for_params(&params);
    let adam_cfg = cfg.adam();

    let mut best = params.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();

    for epoch in 1..=cfg.epochs {
        let diverged = |e: Error| match e {
            Error::Numeric(reason) => Error::Divergence { epoch, reason },
            other => other,
        };
        let mut tape = Tape::default();
        let vars = params.register(&mut tape);
        let out = model_forward(&mut tape, inputs, &vars, mcfg, true, &mut rng).map_err(diverged)?;
        let loss = masked_cross_entropy(&mut tape, out.probabilities, labels, &splits.train)?;
        let loss_value = tape.value(loss).item().to_f64_lossless();
        if !loss_value.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("training loss is {loss_value}"),
            });
        }
        let grads = tape.backward(loss)?;
        let grad_slices: Vec<&[T]> = vars
            .to_vec()
            .into_iter()
            .map(|v: Var| grads.get(v).expect("registered leaf").data())
            .collect();
        adam_step(&mut params, &grad_slices, &mut adam, &adam_cfg).map_err(diverged)?;

        let (val_micro, val_macro) =
            evaluate_split(&params, inputs, mcfg, labels, &splits.val, num_classes).map_err(diverged)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_value,
            val_micro_f1: val_micro,
            val_macro_f1: val_macro,
        });
        if val_micro > best_val {
            best_val = val_micro;
            best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (test_micro, test_macro) = if splits.test.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        evaluate_split(&best, inputs, mcfg, labels, &splits.test, num_classes)?
    };
    let inference = best.infer(inputs, mcfg)?;
    let rates = inference.y_hat.data();
    let mean_firing_rate = rates.iter().map(|v| v.to_f64_lossless()).sum::<f64>() / rates.len().max(1) as f64;

    let metrics = Metrics {
        test_micro_f1: test_micro,
        test_macro_f1: test_macro,
        best_val_micro_f1: best_val,
        best_epoch,
        epochs_run: history.len(),
        loss_history: history.iter().map(|r| r.train_loss).collect(),
        beta: inference.beta.iter().map(|b| b.to_f64_lossless()).collect(),
        mean_firing_rate,
        wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(TrainOutcome {
        params: best,
        metrics,
        history,
    })
}
