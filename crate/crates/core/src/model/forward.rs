use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::head::{spiking_head, HeadOutput, SpikeTrace};
use super::layers::{semantic_attention, shared_graph_conv};
use super::params::{ModelParams, ParamVars};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::hetgraph::MetaPathAdjacency;
use crate::scalar::Scalar;

/// Target-node features plus one normalized adjacency per meta-path.
#[derive(Debug, Clone)]
pub struct ModelInputs<T> {
    pub features: Tensor<T>,
    pub adjacencies: Vec<Arc<MetaPathAdjacency>>,
}

impl<T: Scalar> ModelInputs<T> {
    pub fn new(features: Tensor<T>, adjacencies: Vec<Arc<MetaPathAdjacency>>) -> Result<Self> {
        if !features.is_matrix() {
            return Err(Error::Shape(format!("features must be n × d_in, got {:?}", features.shape())));
        }
        if adjacencies.is_empty() {
            return Err(Error::Config("at least one meta-path adjacency is required".into()));
        }
        for adj in &adjacencies {
            if adj.n() != features.rows() {
                return Err(Error::Shape(format!(
                    "adjacency `{}` covers {} nodes but features have {} rows",
                    adj.name(),
                    adj.n(),
                    features.rows()
                )));
            }
        }
        Ok(Self { features, adjacencies })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_metapaths(&self) -> usize {
        self.adjacencies.len()
    }

    pub fn metapath_names(&self) -> Vec<String> {
        self.adjacencies.iter().map(|a| a.name().to_owned()).collect()
    }

    pub fn cast<U: Scalar>(&self) -> ModelInputs<U> {
        ModelInputs {
            features: self.features.cast(),
            adjacencies: self.adjacencies.clone(),
        }
    }
}

/// Tape handles for one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Firing rates `ŷ`, `n × d_out`.
    pub y_hat: Var,
    /// What the loss sees: `ŷ`, or `ŷ` row-normalized when configured.
    pub probabilities: Var,
    /// Meta-path weights `β`, length `P`.
    pub beta: Var,
    /// Fused embedding `H`, `n × d_hd`.
    pub fused: Var,
    /// Per-meta-path embeddings `h^Φp`.
    pub embeddings: Vec<Var>,
    pub head: HeadOutput,
}

/// Shared graph convolution, semantic attention and spiking head.
pub fn model_forward<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    inputs: &ModelInputs<T>,
    params: &ParamVars,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut R,
) -> Result<ForwardOutput> {
    let features = tape.constant(inputs.features.clone());
    let embeddings = shared_graph_conv(tape, features, &inputs.adjacencies, params.w1, cfg.activation)?;
    let (beta, fused) = semantic_attention(tape, &embeddings, params.w2, params.b, params.q)?;
    let head = spiking_head(tape, fused, params.w3, params.tau, cfg, training, rng)?;
    let y_hat = head.rate;
    let probabilities = if cfg.normalize_readout {
        tape.row_normalize(y_hat, T::of(crate::training::LOG_CLAMP))?
    } else {
        y_hat
    };
    Ok(ForwardOutput {
        y_hat,
        probabilities,
        beta,
        fused,
        embeddings,
        head,
    })
}

/// Values of an evaluation-mode forward pass.
#[derive(Debug, Clone)]
pub struct Inference<T> {
    pub y_hat: Tensor<T>,
    pub beta: Vec<T>,
    pub fused: Tensor<T>,
    pub trace: SpikeTrace<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Deterministic evaluation-mode forward pass (dropout off).
    pub fn infer(&self, inputs: &ModelInputs<T>, cfg: &ModelConfig) -> Result<Inference<T>> {
        self.check_against(inputs)?;
        let mut tape = Tape::default();
        let vars = self.register(&mut tape);
        // Not consumed when training is off.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = model_forward(&mut tape, inputs, &vars, cfg, false, &mut rng)?;
        Ok(Inference {
            y_hat: tape.value(out.y_hat).clone(),
            beta: tape.value(out.beta).data().to_vec(),
            fused: tape.value(out.fused).clone(),
            trace: out.head.trace(&tape)?,
        })
    }

    /// Feature width must equal `d_in`.
    pub fn check_against(&self, inputs: &ModelInputs<T>) -> Result<()> {
        let (d_in, _, _) = self.dims();
        if d_in != inputs.feature_dim() {
            return Err(Error::Shape(format!(
                "W1 expects d_in = {d_in}, features have {} columns",
                inputs.feature_dim()
            )));
        }
        Ok(())
    }
}
