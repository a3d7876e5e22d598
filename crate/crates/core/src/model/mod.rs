//! The SpikingHAN forward computation and its parameter container.

mod checkpoint;
mod config;
mod forward;
mod head;
mod layers;
mod neuron;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Activation, LeakTarget, ModelConfig, NeuronConfig, NeuronKind, ResetMode};
pub use forward::{model_forward, ForwardOutput, Inference, ModelInputs};
pub use head::{spiking_head, HeadOutput, SpikeTrace};
pub use layers::{semantic_attention, shared_graph_conv};
pub use neuron::{membrane_inverse_tau, neuron_step, simulate_neuron, StepOutput};
pub use params::{parameter_count, ModelParams, ParamVars};
