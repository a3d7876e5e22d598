mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikinghan::autodiff::finite_difference_check;
use spikinghan::data::{generate_synthetic, DatasetBundle, SyntheticSpec};
use spikinghan::model::{model_forward, parameter_count, Activation, ModelConfig, NeuronConfig, NeuronKind, ParamVars};
use spikinghan::training::{history_csv, masked_cross_entropy, train, TrainConfig};
use spikinghan::{Error, ModelParams, Tape};

fn small_bundle(seed: u64, nodes: usize) -> DatasetBundle {
    generate_synthetic(&SyntheticSpec {
        target_nodes: nodes,
        num_classes: 2,
        feature_dim: 3,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn neighbor_lists(bundle: &DatasetBundle) -> Vec<Vec<Vec<(usize, f64)>>> {
    bundle
        .adjacencies()
        .unwrap()
        .iter()
        .map(|a| {
            let n = a.n();
            (0..n)
                .map(|i| a.row(i).iter().map(|&j| (j, 1.0 / ((a.degree(i) * a.degree(j)) as f64).sqrt())).collect())
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_matches_plain_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bundle = small_bundle(seed, rng.random_range(6..20));
        let cfg = common::random_model_config(&mut rng);
        let params = ModelParams::init(3, cfg.hidden_dim, 2, cfg.neuron.kind, cfg.neuron.tau_init, &mut rng).unwrap();
        let got = params.infer(&bundle.model_inputs().unwrap(), &cfg).unwrap();

        let features: Vec<Vec<f64>> = (0..bundle.features.rows()).map(|i| bundle.features.row(i).to_vec()).collect();
        let want = common::plain_forward(&features, &neighbor_lists(&bundle), &params, &cfg);
        for (a, b) in got.beta.iter().zip(&want.beta) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (i, row) in want.fused.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                prop_assert!((got.fused.get(i, k) - v).abs() <= 1e-12);
            }
        }
        for (i, row) in want.y_hat.iter().enumerate() {
            prop_assert_eq!(got.y_hat.row(i), row.as_slice());
        }
    }
}

#[test]
fn single_precision_inference_tracks_double() {
    let bundle = small_bundle(4, 30);
    let cfg = ModelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = ModelParams::init(3, 16, 2, NeuronKind::PLIF, 2.0, &mut rng).unwrap();
    let d = params.infer(&bundle.model_inputs().unwrap(), &cfg).unwrap();
    let s = params.cast::<f32>().infer(&bundle.model_inputs_as::<f32>().unwrap(), &cfg).unwrap();
    for (a, b) in d.beta.iter().zip(&s.beta) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
    for (a, b) in d.fused.data().iter().zip(s.fused.data()) {
        assert!((a - *b as f64).abs() < 1e-4 * a.abs().max(1.0));
    }
    let t = cfg.neuron.time_steps as f32;
    assert!(s.y_hat.data().iter().all(|v| (v * t).fract() == 0.0));
}

fn vars_from(v: &[spikinghan::autodiff::Var]) -> ParamVars {
    ParamVars {
        w1: v[0],
        w2: v[1],
        b: v[2],
        q: v[3],
        w3: v[4],
        tau: v.get(5).copied(),
    }
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let bundle = small_bundle(11, 8);
    let inputs = bundle.model_inputs().unwrap();
    let ids: Vec<usize> = (0..8).collect();
    for kind in [NeuronKind::IF, NeuronKind::LIF, NeuronKind::PLIF] {
        let cfg = ModelConfig {
            hidden_dim: 3,
            activation: Activation::Elu,
            neuron: NeuronConfig {
                kind,
                time_steps: 3,
                ..NeuronConfig::default()
            },
            ..ModelConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(3, 3, 2, kind, 2.0, &mut rng).unwrap();
        let tensors: Vec<_> = params.tensors().into_iter().map(|(_, t)| t).collect();
        let err = finite_difference_check(
            |tape, vars| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let out = model_forward(tape, &inputs, &vars_from(vars), &cfg, false, &mut rng)?;
                masked_cross_entropy(tape, out.probabilities, &bundle.labels, &ids)
            },
            &tensors,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-4, "{kind:?}: {err}");
    }
}

#[test]
fn tape_parameter_count_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in [NeuronKind::IF, NeuronKind::LIF, NeuronKind::PLIF] {
        let p = ModelParams::init(10, 4, 3, kind, 2.0, &mut rng).unwrap();
        let mut tape = Tape::default();
        p.register(&mut tape);
        assert_eq!(tape.trainable_element_count(), parameter_count(10, 4, 3, kind));
    }
    assert_eq!(parameter_count(10, 4, 3, NeuronKind::PLIF), 77);
}

fn quick(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed,
        epochs: 15,
        patience: 15,
        ..TrainConfig::default()
    };
    cfg.model.hidden_dim = 16;
    cfg
}

#[test]
fn training_is_deterministic() {
    let bundle = small_bundle(0, 60);
    let a = train(&bundle, &quick(3)).unwrap();
    let b = train(&bundle, &quick(3)).unwrap();
    assert_eq!(history_csv(&a.history), history_csv(&b.history));
    assert_eq!(a.params, b.params);
    let c = train(&bundle, &quick(4)).unwrap();
    assert_ne!(a.metrics.loss_history, c.metrics.loss_history);
}

#[test]
fn frozen_learning_rate_stops_after_patience() {
    let bundle = small_bundle(0, 60);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        patience: 1,
        ..quick(0)
    };
    let out = train(&bundle, &cfg).unwrap();
    assert_eq!(out.metrics.epochs_run, 2);
    assert_eq!(out.metrics.best_epoch, 1);
}

#[test]
fn training_reports_selected_epoch() {
    let bundle = small_bundle(2, 60);
    let out = train(&bundle, &quick(1)).unwrap();
    let best = &out.history[out.metrics.best_epoch - 1];
    assert_eq!(best.val_micro_f1, out.metrics.best_val_micro_f1);
    assert!(out.history[..out.metrics.best_epoch - 1]
        .iter()
        .all(|r| r.val_micro_f1 < best.val_micro_f1));
    assert!((out.metrics.beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&out.metrics.mean_firing_rate));
}

#[test]
fn missing_splits_and_bad_config_are_rejected() {
    let mut bundle = small_bundle(0, 30);
    bundle.splits = None;
    assert!(matches!(train(&bundle, &quick(0)), Err(Error::Config(_))));
    let bundle = small_bundle(0, 30);
    let cfg = TrainConfig {
        learning_rate: f64::NAN,
        ..quick(0)
    };
    assert!(matches!(train(&bundle, &cfg), Err(Error::Config(_))));
    let cfg = TrainConfig {
        patience: 20,
        epochs: 10,
        ..quick(0)
    };
    assert!(matches!(train(&bundle, &cfg), Err(Error::Config(_))));
}

#[test]
fn overflowing_parameters_abort_with_epoch() {
    let bundle = small_bundle(0, 30);
    let cfg = TrainConfig {
        learning_rate: 1e307,
        ..quick(0)
    };
    match train(&bundle, &cfg) {
        Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
        other => panic!("unexpected {:?}", other.map(|o| o.metrics)),
    }
}
