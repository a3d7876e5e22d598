use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bundle::DatasetBundle;
use super::splits::{make_splits, DEFAULT_SPLIT_RATIOS};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::{build_graph, GraphOptions, MetaPath, Relation, Schema};

/// Parameters of the planted-community generator.
///
/// The target type `N` gets one auxiliary hub type `H0`, `H1`, ... per
/// meta-path, each with `hubs_per_class` hubs per class. A target node
/// attaches to every hub of its own class independently with probability
/// `p_intra` and to every foreign hub with probability `p_inter`. Node
/// features are `snr * onehot(class)` plus standard normal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub target_nodes: usize,
    pub num_classes: usize,
    pub num_metapaths: usize,
    pub hubs_per_class: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub feature_dim: usize,
    pub snr: f64,
    pub seed: u64,
    pub split_ratios: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            target_nodes: 120,
            num_classes: 3,
            num_metapaths: 2,
            hubs_per_class: 1,
            p_intra: 0.9,
            p_inter: 0.05,
            feature_dim: 16,
            snr: 1.0,
            seed: 0,
            split_ratios: [DEFAULT_SPLIT_RATIOS.0, DEFAULT_SPLIT_RATIOS.1, DEFAULT_SPLIT_RATIOS.2],
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_classes < 2 {
            return bad(format!("num_classes = {} must be at least 2", self.num_classes));
        }
        if self.target_nodes < 3 * self.num_classes {
            return bad(format!(
                "target_nodes = {} must be at least 3 per class",
                self.target_nodes
            ));
        }
        if self.feature_dim < self.num_classes {
            return bad(format!(
                "feature_dim = {} must be at least num_classes = {}",
                self.feature_dim, self.num_classes
            ));
        }
        if self.num_metapaths == 0 || self.hubs_per_class == 0 {
            return bad("num_metapaths and hubs_per_class must be positive".into());
        }
        for (name, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} must lie in [0, 1]"));
            }
        }
        if !self.snr.is_finite() || self.snr < 0.0 {
            return bad(format!("snr = {} must be finite and non-negative", self.snr));
        }
        Ok(())
    }
}

/// Generate a labeled, split heterogeneous graph from `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let (n, c) = (spec.target_nodes, spec.num_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut labels: Vec<i64> = (0..n).map(|i| (i * c / n) as i64).collect();
    labels.shuffle(&mut rng);

    let hubs = spec.hubs_per_class * c;
    let hub_types: Vec<String> = (0..spec.num_metapaths).map(|k| format!("H{k}")).collect();
    let mut edge_lists = Vec::new();
    for _ in &hub_types {
        let mut edges = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            for hub in 0..hubs {
                let p = if hub / spec.hubs_per_class == l as usize {
                    spec.p_intra
                } else {
                    spec.p_inter
                };
                if rng.random::<f64>() < p {
                    edges.push((i, hub));
                }
            }
        }
        edge_lists.push(edges);
    }

    let mut data = Vec::with_capacity(n * spec.feature_dim);
    for &l in &labels {
        for j in 0..spec.feature_dim {
            let noise: f64 = rng.sample(StandardNormal);
            let signal = if j == l as usize { spec.snr } else { 0.0 };
            data.push(signal + noise);
        }
    }
    let features = Tensor::matrix(n, spec.feature_dim, data)?;

    let relations: Vec<Relation> = hub_types
        .iter()
        .map(|h| Relation::new("N", format!("to_{}", h.to_lowercase()), h.clone()))
        .collect();
    let metapaths = relations
        .iter()
        .zip(&hub_types)
        .map(|(r, h)| MetaPath::new(format!("N{h}N"), [r.name.clone(), r.name.clone()]))
        .collect();
    let mut counts = BTreeMap::from([("N".to_string(), n)]);
    counts.extend(hub_types.iter().map(|h| (h.clone(), hubs)));
    let mut node_types = vec!["N".to_string()];
    node_types.extend(hub_types);
    let schema = Schema { node_types, relations };
    let graph = build_graph(schema, counts, edge_lists, GraphOptions::default())?;

    let ratios = (spec.split_ratios[0], spec.split_ratios[1], spec.split_ratios[2]);
    let splits = make_splits(&labels, c, ratios, spec.seed)?;
    let bundle = DatasetBundle {
        graph,
        target_type: "N".into(),
        num_classes: c,
        features,
        labels,
        metapaths,
        splits: Some(splits),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Fraction of meta-path neighbor pairs (self-loops excluded, all meta-paths
/// pooled) whose endpoints share a label. Unlabeled endpoints are skipped.
pub fn same_class_neighbor_fraction(bundle: &DatasetBundle) -> Result<f64> {
    let (mut same, mut total) = (0usize, 0usize);
    for adj in bundle.adjacencies()? {
        for i in 0..adj.n() {
            for &j in adj.row(i) {
                let (li, lj) = (bundle.labels[i], bundle.labels[j]);
                if i == j || li < 0 || lj < 0 {
                    continue;
                }
                total += 1;
                same += usize::from(li == lj);
            }
        }
    }
    if total == 0 {
        return Err(Error::Numeric("no labeled neighbor pairs".into()));
    }
    Ok(same as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a.num_target_nodes(), 120);
        assert_eq!(a.adjacencies().unwrap().len(), 2);
        assert_eq!(a.feature_dim(), 16);
        assert_eq!(a.metapaths.len(), 2);
        assert!(a.graph.is_heterogeneous());
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        let b = generate_synthetic(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.labels, b.labels);
    }

    #[test]
    fn balanced_labels() {
        let b = generate_synthetic(&SyntheticSpec::default()).unwrap();
        for c in 0..3 {
            assert_eq!(b.labels.iter().filter(|&&l| l == c).count(), 40);
        }
    }

    #[test]
    fn homophily_tracks_p_intra() {
        let high = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let none = generate_synthetic(&SyntheticSpec {
            p_intra: 0.3,
            p_inter: 0.3,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let fh = same_class_neighbor_fraction(&high).unwrap();
        let fl = same_class_neighbor_fraction(&none).unwrap();
        assert!(fh > 0.75, "{fh}");
        assert!((fl - 1.0 / 3.0).abs() < 0.1, "{fl}");
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SyntheticSpec { p_intra: 1.5, ..Default::default() },
            SyntheticSpec { p_inter: -0.1, ..Default::default() },
            SyntheticSpec { num_metapaths: 0, ..Default::default() },
            SyntheticSpec { feature_dim: 2, ..Default::default() },
            SyntheticSpec { num_classes: 1, ..Default::default() },
            SyntheticSpec { snr: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
        }
    }
}
