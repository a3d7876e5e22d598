use std::sync::Arc;

use super::config::Activation;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::hetgraph::MetaPathAdjacency;
use crate::scalar::Scalar;

/// One graph convolution per meta-path with a single shared `W1`.
///
/// `features · W1` is computed once and every adjacency aggregates the same
/// projection.
pub fn shared_graph_conv<T: Scalar>(
    tape: &mut Tape<T>,
    features: Var,
    adjacencies: &[Arc<MetaPathAdjacency>],
    w1: Var,
    activation: Activation,
) -> Result<Vec<Var>> {
    let projected = tape.matmul(features, w1)?;
    adjacencies
        .iter()
        .map(|adj| {
            let agg = tape.aggregate(Arc::clone(adj), projected)?;
            Ok(match activation {
                Activation::Relu => tape.relu(agg),
                Activation::Elu => tape.elu(agg),
            })
        })
        .collect()
}

/// Semantic attention over meta-path embeddings.
///
/// Importance `I_p = mean_i qᵀ tanh(h_i^p W2 + b)`, weights `β = softmax(I)`,
/// fused embedding `H = Σ_p β_p h^p`. Returns `(β, H)`.
pub fn semantic_attention<T: Scalar>(
    tape: &mut Tape<T>,
    embeddings: &[Var],
    w2: Var,
    b: Var,
    q: Var,
) -> Result<(Var, Var)> {
    if embeddings.is_empty() {
        return Err(Error::Config("semantic attention needs at least one meta-path".into()));
    }
    let mut importance = Vec::with_capacity(embeddings.len());
    for &h in embeddings {
        let z = tape.matmul(h, w2)?;
        let z = tape.add_row(z, b)?;
        let t = tape.tanh(z);
        let scores = tape.matvec(t, q)?;
        importance.push(tape.mean(scores));
    }
    let importance = tape.stack(&importance)?;
    let beta = tape.softmax(importance)?;
    let fused = tape.weighted_sum(embeddings, beta)?;
    Ok((beta, fused))
}
