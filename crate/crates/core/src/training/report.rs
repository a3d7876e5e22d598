use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of `history.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub test_micro_f1: f64,
    pub test_macro_f1: f64,
    pub best_val_micro_f1: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub param_count: usize,
    pub wall_clock_ms: f64,
    pub beta: BTreeMap<String, f64>,
    pub mean_firing_rate: f64,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_micro_f1,val_macro_f1\n");
    for r in history {
        writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_micro_f1, r.val_macro_f1)
            .expect("writing to a String");
    }
    out
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}

pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let h = [EpochRecord {
            epoch: 1,
            train_loss: 2.5,
            val_micro_f1: 0.75,
            val_macro_f1: 0.5,
        }];
        assert_eq!(history_csv(&h), "epoch,train_loss,val_micro_f1,val_macro_f1\n1,2.5,0.75,0.5\n");
    }
}
