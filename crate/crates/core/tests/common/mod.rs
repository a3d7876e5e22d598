//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use spikinghan::hetgraph::{build_graph, GraphOptions, HeteroGraph, MetaPath, Relation, Schema};
use spikinghan::model::{Activation, LeakTarget, ModelConfig, NeuronConfig, NeuronKind, ResetMode};
use spikinghan::ModelParams;

pub struct RandomGraph {
    pub graph: HeteroGraph,
    pub target: String,
    pub metapath: MetaPath,
}

/// Random typed graph with at most `max_nodes` nodes per type plus a random
/// closed walk of 1..=`max_len` relations from the target type.
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize, max_len: usize) -> RandomGraph {
    loop {
        let n_types = rng.random_range(2..=4);
        let types: Vec<String> = (0..n_types).map(|t| format!("T{t}")).collect();
        let counts: BTreeMap<String, usize> =
            types.iter().map(|t| (t.clone(), rng.random_range(1..=max_nodes))).collect();
        let n_rels = rng.random_range(1..=5);
        let mut relations = Vec::new();
        let mut edges = Vec::new();
        for r in 0..n_rels {
            let src = types[rng.random_range(0..n_types)].clone();
            let dst = types[rng.random_range(0..n_types)].clone();
            let (ns, nd) = (counts[&src], counts[&dst]);
            let m = rng.random_range(0..=2 * ns.max(nd));
            let list: Vec<(usize, usize)> =
                (0..m).map(|_| (rng.random_range(0..ns), rng.random_range(0..nd))).collect();
            relations.push(Relation::new(src, format!("r{r}"), dst));
            edges.push(list);
        }
        let target = types[0].clone();
        let Some(names) = random_closed_walk(rng, &relations, &target, max_len) else {
            continue;
        };
        let schema = Schema {
            node_types: types,
            relations,
        };
        let graph = build_graph(schema, counts, edges, GraphOptions { allow_toy: true }).expect("valid random graph");
        return RandomGraph {
            graph,
            target,
            metapath: MetaPath::new("walk", names),
        };
    }
}

fn random_closed_walk<R: Rng>(rng: &mut R, rels: &[Relation], target: &str, max_len: usize) -> Option<Vec<String>> {
    for _ in 0..50 {
        let len = rng.random_range(1..=max_len);
        let mut at = target.to_string();
        let mut names = Vec::new();
        for _ in 0..len {
            let options: Vec<&Relation> = rels.iter().filter(|r| r.src == at || r.dst == at).collect();
            if options.is_empty() {
                break;
            }
            let r = options[rng.random_range(0..options.len())];
            at = if r.src == at { r.dst.clone() } else { r.src.clone() };
            names.push(r.name.clone());
        }
        if names.len() == len && at == target {
            return Some(names);
        }
    }
    None
}

/// Neighbor sets by enumerating every typed path node by node, plus `i`.
pub fn brute_force_neighbors(graph: &HeteroGraph, target: &str, mp: &MetaPath) -> Vec<BTreeSet<usize>> {
    let rels = graph.relations();
    let n = graph.counts()[target];
    let edge_sets: BTreeMap<&str, BTreeSet<(usize, usize)>> = rels
        .iter()
        .enumerate()
        .map(|(k, r)| (r.name.as_str(), graph.edges(k).iter().copied().collect()))
        .collect();

    fn walk(
        graph: &HeteroGraph,
        edge_sets: &BTreeMap<&str, BTreeSet<(usize, usize)>>,
        mp: &MetaPath,
        depth: usize,
        at_type: &str,
        at: usize,
        out: &mut BTreeSet<usize>,
    ) {
        if depth == mp.relations.len() {
            out.insert(at);
            return;
        }
        let name = &mp.relations[depth];
        let rel = graph.relations().iter().find(|r| &r.name == name).unwrap();
        let edges = &edge_sets[name.as_str()];
        if rel.src == at_type {
            for v in 0..graph.counts()[&rel.dst] {
                if edges.contains(&(at, v)) {
                    walk(graph, edge_sets, mp, depth + 1, &rel.dst, v, out);
                }
            }
        }
        if rel.dst == at_type {
            for u in 0..graph.counts()[&rel.src] {
                if edges.contains(&(u, at)) {
                    walk(graph, edge_sets, mp, depth + 1, &rel.src, u, out);
                }
            }
        }
    }

    (0..n)
        .map(|i| {
            let mut out = BTreeSet::from([i]);
            walk(graph, &edge_sets, mp, 0, target, i, &mut out);
            out
        })
        .collect()
}

/// Small random model configuration covering every neuron option.
pub fn random_model_config<R: Rng>(rng: &mut R) -> ModelConfig {
    let kind = [NeuronKind::IF, NeuronKind::LIF, NeuronKind::PLIF][rng.random_range(0..3)];
    ModelConfig {
        hidden_dim: rng.random_range(2..7),
        activation: if rng.random() { Activation::Relu } else { Activation::Elu },
        dropout: 0.5,
        normalize_readout: false,
        neuron: NeuronConfig {
            kind,
            reset: if rng.random() {
                ResetMode::Subtract
            } else {
                ResetMode::ToConstant { v_reset: rng.random_range(-0.5..0.5) }
            },
            leak_target: if rng.random() { LeakTarget::Threshold } else { LeakTarget::Zero },
            tau_init: rng.random_range(1.5..4.0),
            time_steps: rng.random_range(1..9),
            ..NeuronConfig::default()
        },
    }
}

/// Parameters of the straight-line neuron simulator.
#[derive(Debug, Clone, Copy)]
pub struct PlainNeuron {
    pub kind: NeuronKind,
    pub v_th: f64,
    pub reset: ResetMode,
    pub leak_target: LeakTarget,
    pub inv_tau: f64,
}

/// Scalar loop over time for a single neuron. Returns (spikes, membrane after reset).
pub fn plain_neuron(cfg: &PlainNeuron, currents: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = 0.0f64;
    let mut spikes = Vec::new();
    let mut membrane = Vec::new();
    for &c in currents {
        let pre = match cfg.kind {
            NeuronKind::IF => v + c,
            _ => {
                let rest = if cfg.leak_target == LeakTarget::Threshold { cfg.v_th } else { 0.0 };
                v + (c - (v - rest)) * cfg.inv_tau
            }
        };
        let s = if pre - cfg.v_th >= 0.0 { 1.0 } else { 0.0 };
        v = match cfg.reset {
            ResetMode::Subtract => s * (pre - cfg.v_th) + (1.0 - s) * pre,
            ResetMode::ToConstant { v_reset } => s * v_reset + (1.0 - s) * pre,
        };
        spikes.push(s);
        membrane.push(v);
    }
    (spikes, membrane)
}

pub struct PlainForward {
    pub beta: Vec<f64>,
    pub fused: Vec<Vec<f64>>,
    pub y_hat: Vec<Vec<f64>>,
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn rows(t: &spikinghan::Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

/// Eval-mode forward pass with nested loops over plain vectors.
///
/// `neighbors[p][i]` lists `(j, 1/sqrt(D_i D_j))`.
pub fn plain_forward(
    features: &[Vec<f64>],
    neighbors: &[Vec<Vec<(usize, f64)>>],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> PlainForward {
    let n = features.len();
    let xw = matmul(features, &rows(&params.w1));
    let d_hd = params.w1.cols();
    let act = |x: f64| match cfg.activation {
        Activation::Relu => x.max(0.0),
        Activation::Elu => {
            if x > 0.0 {
                x
            } else {
                x.exp_m1()
            }
        }
    };
    let embeddings: Vec<Vec<Vec<f64>>> = neighbors
        .iter()
        .map(|adj| {
            (0..n)
                .map(|i| {
                    let mut acc = vec![0.0; d_hd];
                    for &(j, c) in &adj[i] {
                        for k in 0..d_hd {
                            acc[k] += c * xw[j][k];
                        }
                    }
                    acc.into_iter().map(act).collect()
                })
                .collect()
        })
        .collect();

    let w2 = rows(&params.w2);
    let (b, q) = (params.b.data(), params.q.data());
    let scores: Vec<f64> = embeddings
        .iter()
        .map(|h| {
            let proj = matmul(h, &w2);
            let total: f64 = proj
                .iter()
                .map(|row| row.iter().zip(b).zip(q).map(|((x, bk), qk)| qk * (x + bk).tanh()).sum::<f64>())
                .sum();
            total / n as f64
        })
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    let beta: Vec<f64> = e.iter().map(|x| x / z).collect();

    let fused: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d_hd).map(|k| embeddings.iter().zip(&beta).map(|(h, bp)| bp * h[i][k]).sum()).collect())
        .collect();
    let current = matmul(&fused, &rows(&params.w3));
    let nc = &cfg.neuron;
    let inv_tau = match nc.kind {
        NeuronKind::IF => 0.0,
        NeuronKind::LIF => 1.0 / nc.tau_init,
        NeuronKind::PLIF => {
            let p = params.tau_param.unwrap();
            1.0 / (1.0 + (p.max(0.0) + (-p.abs()).exp().ln_1p()))
        }
    };
    let plain = plain_neuron_cfg(nc, inv_tau);
    let y_hat = current
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| {
                    let (s, _) = plain_neuron(&plain, &vec![c; nc.time_steps]);
                    s.iter().sum::<f64>() / nc.time_steps as f64
                })
                .collect()
        })
        .collect();
    PlainForward { beta, fused, y_hat }
}

pub fn plain_neuron_cfg(nc: &NeuronConfig, inv_tau: f64) -> PlainNeuron {
    PlainNeuron {
        kind: nc.kind,
        v_th: nc.v_th,
        reset: nc.reset,
        leak_target: nc.leak_target,
        inv_tau,
    }
}

/// (micro, macro) F1 from an explicit confusion matrix.
pub fn confusion_f1(pred: &[usize], truth: &[usize], classes: usize) -> (f64, f64) {
    let mut cm = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        cm[t][p] += 1;
    }
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    let mut f1_sum = 0.0;
    for (c, row) in cm.iter().enumerate() {
        let tp = row[c];
        let fp: usize = (0..classes).filter(|&t| t != c).map(|t| cm[t][c]).sum();
        let fn_: usize = (0..classes).filter(|&p| p != c).map(|p| row[p]).sum();
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        if tp + fp + fn_ > 0 {
            f1_sum += 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        }
    }
    let micro = 2.0 * tp_all as f64 / (2 * tp_all + fp_all + fn_all) as f64;
    (micro, f1_sum / classes as f64)
}
