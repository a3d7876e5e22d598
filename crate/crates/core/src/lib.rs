//! SpikingHAN: heterogeneous graph node classification with a spiking
//! neuron readout.
//!
//! The pipeline is
//! 1. compose one normalized adjacency per meta-path ([`hetgraph`]),
//! 2. aggregate neighbors with a single shared projection and fuse the
//!    meta-path embeddings with semantic attention ([`model`]),
//! 3. drive IF / LIF / PLIF neurons with the fused embedding for `T` steps
//!    and read class firing rates,
//! 4. train with surrogate gradients, Adam and early stopping ([`training`]).
//!
//! The numerical core is generic over [`Scalar`]; the aliases below fix it
//! to `f64`, which training uses.

pub mod autodiff;
pub mod data;
mod error;
pub mod hetgraph;
pub mod model;
mod scalar;
pub mod training;

pub use error::{Error, ErrorCategory, Result};
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type ModelInputs = model::ModelInputs<f64>;

pub type Tensor32 = autodiff::Tensor<f32>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type ModelInputs32 = model::ModelInputs<f32>;
