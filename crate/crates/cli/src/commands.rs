use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};
use spikinghan::data::{
    generate_synthetic, load_dataset, make_splits, same_class_neighbor_fraction, write_dataset, DatasetBundle, Splits,
    SyntheticSpec, WriteOptions, DEFAULT_SPLIT_RATIOS,
};
use spikinghan::model::{parameter_count, read_checkpoint, write_checkpoint, Checkpoint};
use spikinghan::training::{self, evaluate_split, write_history_csv, write_metrics_json, MetricsReport, TrainConfig};
use spikinghan::{Error, ModelParams};

use crate::config::RunConfig;
use crate::CliError;

fn ensure_splits(bundle: &mut DatasetBundle, ratios: (f64, f64, f64), seed: u64) -> Result<(), CliError> {
    if bundle.splits.is_none() {
        info!("dataset has no splits.json; drawing stratified splits {ratios:?} with seed {seed}");
        bundle.splits = Some(make_splits(&bundle.labels, bundle.num_classes, ratios, seed)?);
    }
    Ok(())
}

fn mkdir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Lib(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

/// Sample mean and standard deviation (n - 1 denominator, 0 for one value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_seed(bundle: &DatasetBundle, cfg: &TrainConfig, rc: &RunConfig, out: &Path) -> Result<MetricsReport, CliError> {
    let seed = cfg.seed;
    info!("seed {seed}: training");
    let outcome = training::train(bundle, cfg).map_err(|e| match e {
        Error::Divergence { epoch, reason } => Error::Divergence {
            epoch,
            reason: format!("seed {seed}: {reason}"),
        },
        other => other,
    })?;
    let m = &outcome.metrics;
    let (d_in, d_hd, d_out) = outcome.params.dims();
    let names: Vec<String> = bundle.metapaths.iter().map(|p| p.name.clone()).collect();
    let report = MetricsReport {
        seed,
        test_micro_f1: m.test_micro_f1,
        test_macro_f1: m.test_macro_f1,
        best_val_micro_f1: m.best_val_micro_f1,
        best_epoch: m.best_epoch,
        epochs_run: m.epochs_run,
        param_count: parameter_count(d_in, d_hd, d_out, cfg.model.neuron.kind),
        wall_clock_ms: m.wall_clock_ms,
        beta: names.iter().cloned().zip(m.beta.iter().copied()).collect(),
        mean_firing_rate: m.mean_firing_rate,
    };

    let dir = out.join(format!("seed-{seed}"));
    mkdir(&dir)?;
    write_history_csv(&dir.join("history.csv"), &outcome.history)?;
    write_metrics_json(&dir.join("metrics.json"), &report)?;
    let (r0, r1, r2) = rc.split_ratios();
    let ckpt = Checkpoint {
        params: outcome.params,
        model: cfg.model.clone(),
        extra: json!({
            "seed": seed,
            "metapaths": names,
            "split_ratios": [r0, r1, r2],
            "split_seed": rc.split_seed(),
        }),
    };
    write_checkpoint(&dir.join("checkpoint.ckpt"), &ckpt)?;
    info!(
        "seed {seed}: test micro-F1 {:.4}, macro-F1 {:.4}, best epoch {}",
        report.test_micro_f1, report.test_macro_f1, report.best_epoch
    );
    Ok(report)
}

pub fn train(
    data: Option<PathBuf>,
    config: Option<PathBuf>,
    seeds: Vec<u64>,
    out: Option<PathBuf>,
    jobs: usize,
) -> Result<Value, CliError> {
    let rc = match &config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seeds = if !seeds.is_empty() {
        seeds
    } else {
        rc.seeds.clone().unwrap_or_else(|| vec![0])
    };
    if seeds.is_empty() {
        return Err(CliError::Config("seed list is empty".into()));
    }
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != seeds.len() {
        return Err(CliError::Config(format!("duplicate seeds in {seeds:?}")));
    }
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let configs = seeds
        .iter()
        .map(|&s| rc.train_config(s))
        .collect::<Result<Vec<_>, _>>()?;
    let data = data
        .or_else(|| rc.data.clone())
        .ok_or_else(|| CliError::Config("no dataset given (--data or `data` in the config)".into()))?;
    let out = out
        .or_else(|| rc.out.clone())
        .ok_or_else(|| CliError::Config("no output directory given (--out or `out` in the config)".into()))?;

    let mut bundle = load_dataset(&data)?;
    ensure_splits(&mut bundle, rc.split_ratios(), rc.split_seed())?;
    mkdir(&out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<Result<MetricsReport, CliError>> =
        pool.install(|| configs.par_iter().map(|cfg| run_seed(&bundle, cfg, &rc, &out)).collect());
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let micro: Vec<f64> = reports.iter().map(|r| r.test_micro_f1).collect();
    let macro_: Vec<f64> = reports.iter().map(|r| r.test_macro_f1).collect();
    let (micro_mean, micro_std) = mean_std(&micro);
    let (macro_mean, macro_std) = mean_std(&macro_);
    let summary = json!({
        "seeds": reports
            .iter()
            .map(|r| json!({
                "seed": r.seed,
                "test_micro_f1": r.test_micro_f1,
                "test_macro_f1": r.test_macro_f1,
                "best_val_micro_f1": r.best_val_micro_f1,
                "best_epoch": r.best_epoch,
                "epochs_run": r.epochs_run,
            }))
            .collect::<Vec<_>>(),
        "micro_f1": {"mean": micro_mean, "std": micro_std},
        "macro_f1": {"mean": macro_mean, "std": macro_std},
    });
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("serializable summary");
    std::fs::write(&path, text + "\n").map_err(|source| CliError::Lib(Error::Io { path, source }))?;
    Ok(summary)
}

#[derive(Debug, Default, Deserialize)]
struct SplitSettings {
    split_ratios: Option<[f64; 3]>,
    split_seed: Option<u64>,
}

/// Dataset and checkpoint whose shapes agree, with splits rebuilt the way
/// training drew them.
fn load_pair(data: &Path, checkpoint: &Path) -> Result<(DatasetBundle, Checkpoint), CliError> {
    let ckpt = read_checkpoint(checkpoint)?;
    let mut bundle = load_dataset(data)?;
    let (d_in, d_hd, d_out) = ckpt.params.dims();
    if d_in != bundle.feature_dim() || d_out != bundle.num_classes {
        return Err(CliError::Lib(Error::Shape(format!(
            "checkpoint expects d_in = {}, d_out = {} (W1 {:?}, W3 {:?}); dataset has {} features and {} classes",
            d_in,
            d_out,
            [d_in, d_hd],
            [d_hd, d_out],
            bundle.feature_dim(),
            bundle.num_classes
        ))));
    }
    let settings: SplitSettings = serde_json::from_value(ckpt.extra.clone()).unwrap_or_default();
    let ratios = settings
        .split_ratios
        .map(|[a, b, c]| (a, b, c))
        .unwrap_or(DEFAULT_SPLIT_RATIOS);
    ensure_splits(&mut bundle, ratios, settings.split_seed.unwrap_or(0))?;
    Ok((bundle, ckpt))
}

fn test_split(bundle: &DatasetBundle) -> &Splits {
    bundle.splits.as_ref().expect("splits ensured")
}

pub fn eval(data: &Path, checkpoint: &Path) -> Result<Value, CliError> {
    let (bundle, ckpt) = load_pair(data, checkpoint)?;
    let inputs = bundle.model_inputs()?;
    let ids = &test_split(&bundle).test;
    if ids.is_empty() {
        return Err(CliError::Lib(Error::Config("test split is empty".into())));
    }
    let (micro, macro_) = evaluate_split(
        &ckpt.params,
        &inputs,
        &ckpt.model,
        &bundle.labels,
        ids,
        bundle.num_classes,
    )?;
    Ok(json!({"test_micro_f1": micro, "test_macro_f1": macro_}))
}

fn class_mean_rates(params: &ModelParams, y_hat: &spikinghan::Tensor) -> Vec<f64> {
    let (_, _, d_out) = params.dims();
    let n = y_hat.rows().max(1) as f64;
    (0..d_out)
        .map(|c| (0..y_hat.rows()).map(|i| y_hat.get(i, c)).sum::<f64>() / n)
        .collect()
}

pub fn inspect(data: &Path, checkpoint: &Path) -> Result<Value, CliError> {
    let (bundle, ckpt) = load_pair(data, checkpoint)?;
    let inputs = bundle.model_inputs()?;
    let started = Instant::now();
    let inference = ckpt.params.infer(&inputs, &ckpt.model)?;
    let forward_ms = started.elapsed().as_secs_f64() * 1e3;
    let (d_in, d_hd, d_out) = ckpt.params.dims();
    let beta: BTreeMap<String, f64> = inputs
        .metapath_names()
        .into_iter()
        .zip(inference.beta.iter().copied())
        .collect();
    Ok(json!({
        "beta": beta,
        "param_count": parameter_count(d_in, d_hd, d_out, ckpt.model.neuron.kind),
        "neuron": ckpt.model.neuron.kind,
        "time_steps": inference.trace.time_steps(),
        "mean_firing_rate_per_class": class_mean_rates(&ckpt.params, &inference.y_hat),
        "spike_sparsity": inference.trace.sparsity(),
        "forward_ms": forward_ms,
    }))
}

pub fn gen_synthetic(spec: Option<&Path>, out: &Path) -> Result<Value, CliError> {
    let spec: SyntheticSpec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read spec {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("spec {}: {e}", p.display())))?
        }
        None => SyntheticSpec::default(),
    };
    spec.validate()?;
    let bundle = generate_synthetic(&spec)?;
    write_dataset(&bundle, out, WriteOptions::default())?;
    Ok(json!({
        "out": out.display().to_string(),
        "target_nodes": bundle.num_target_nodes(),
        "num_classes": bundle.num_classes,
        "metapaths": bundle.metapaths.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
        "same_class_neighbor_fraction": same_class_neighbor_fraction(&bundle)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::mean_std;

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
