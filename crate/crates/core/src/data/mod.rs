//! Dataset bundles, the on-disk dataset directory format, stratified
//! splits and a synthetic heterogeneous-graph generator.

mod bundle;
mod format;
mod splits;
mod synthetic;

pub use bundle::{DatasetBundle, Splits};
pub use format::{load_dataset, load_dataset_with, write_dataset, LoadOptions, WriteOptions, FEATURE_SIDECAR_MAGIC};
pub use splits::{make_splits, DEFAULT_SPLIT_RATIOS};
pub use synthetic::{generate_synthetic, same_class_neighbor_fraction, SyntheticSpec};
