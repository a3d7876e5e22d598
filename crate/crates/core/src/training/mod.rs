//! Loss, optimizer, metrics and the early-stopping training loop.

mod adam;
mod config;
mod loss;
mod metrics;
mod report;
mod trainer;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use config::TrainConfig;
pub use loss::{masked_cross_entropy, LOG_CLAMP};
pub use metrics::{accuracy, f1_scores, predict};
pub use report::{history_csv, write_history_csv, write_metrics_json, EpochRecord, MetricsReport};
pub use trainer::{evaluate_split, train, train_inputs, Metrics, TrainOutcome};
