use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::{compose_metapath_adjacency, HeteroGraph, MetaPath, MetaPathAdjacency};
use crate::model::ModelInputs;
use crate::scalar::Scalar;

/// Disjoint train / validation / test node ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything needed to train on one heterogeneous graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub graph: HeteroGraph,
    pub target_type: String,
    pub num_classes: usize,
    /// `n × d_in`, one row per target node.
    pub features: Tensor<f64>,
    /// Class per target node, `-1` for unlabeled.
    pub labels: Vec<i64>,
    pub metapaths: Vec<MetaPath>,
    pub splits: Option<Splits>,
}

impl DatasetBundle {
    pub fn num_target_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Check every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.node_count(&self.target_type)?;
        if !self.features.is_matrix() || self.features.rows() != n {
            return Err(Error::Dimension(format!(
                "features have shape {:?}, expected {n} rows",
                self.features.shape()
            )));
        }
        if !self.features.all_finite() {
            return Err(Error::Dimension("features contain non-finite values".into()));
        }
        if self.labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} target nodes", self.labels.len())));
        }
        if self.num_classes == 0 {
            return Err(Error::Schema("num_classes must be positive".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l < -1 || l >= self.num_classes as i64) {
            return Err(Error::Schema(format!("label {bad} outside -1..{}", self.num_classes)));
        }
        if self.metapaths.is_empty() {
            return Err(Error::MetaPath("dataset declares no meta-paths".into()));
        }
        for mp in &self.metapaths {
            mp.resolve(&self.graph, &self.target_type)?;
        }
        if let Some(s) = &self.splits {
            self.check_splits(s)?;
        }
        Ok(())
    }

    pub(crate) fn check_splits(&self, s: &Splits) -> Result<()> {
        let n = self.labels.len();
        let mut seen = BTreeSet::new();
        for (name, ids) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
            for &i in ids {
                if i >= n {
                    return Err(Error::Schema(format!("{name} split id {i} out of range for {n} nodes")));
                }
                if self.labels[i] < 0 {
                    return Err(Error::Schema(format!("{name} split contains unlabeled node {i}")));
                }
                if !seen.insert(i) {
                    return Err(Error::Schema(format!("node {i} appears in more than one split position")));
                }
            }
        }
        Ok(())
    }

    /// One normalized adjacency per meta-path, in declaration order.
    pub fn adjacencies(&self) -> Result<Vec<Arc<MetaPathAdjacency>>> {
        self.metapaths
            .iter()
            .map(|mp| compose_metapath_adjacency(&self.graph, &self.target_type, mp).map(Arc::new))
            .collect()
    }

    pub fn model_inputs(&self) -> Result<ModelInputs<f64>> {
        ModelInputs::new(self.features.clone(), self.adjacencies()?)
    }

    pub fn model_inputs_as<T: Scalar>(&self) -> Result<ModelInputs<T>> {
        Ok(self.model_inputs()?.cast())
    }
}
