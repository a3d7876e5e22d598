//! Dataset directory layout:
//!
//! ```text
//! meta.json                       target type, classes, schema, meta-paths
//! nodes.json                      {"counts": {type: n}}
//! edges/<src>__<name>__<dst>.tsv  "src_id\tdst_id" per line
//! features/<target>.csv           n rows of d_in comma-separated reals
//! features/<target>.bin           optional binary copy of the CSV
//! labels.tsv                      "node_id\tclass_id", -1 = unlabeled
//! splits.json                     {"train": [..], "val": [..], "test": [..]}, optional
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bundle::{DatasetBundle, Splits};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::{build_graph, GraphOptions, MetaPath, Relation, Schema};

pub const FEATURE_SIDECAR_MAGIC: &[u8; 8] = b"SPKHFEAT";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub allow_toy: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Also write `features/<target>.bin`.
    pub feature_sidecar: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    target_type: String,
    num_classes: usize,
    node_types: Vec<String>,
    relations: Vec<Relation>,
    metapaths: Vec<MetaPath>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodesFile {
    counts: BTreeMap<String, usize>,
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Validation {
        file: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn invalid(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Validation {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_pair(file: &Path, line: usize, text: &str) -> Result<(i64, i64)> {
    let mut parts = text.split('\t');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(invalid(file, line, format!("expected two tab-separated fields, got `{text}`")));
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<i64>()
            .map_err(|_| invalid(file, line, format!("`{s}` is not an integer")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn features_dir(dir: &Path) -> PathBuf {
    dir.join("features")
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    load_dataset_with(dir, LoadOptions::default())
}

/// Load and validate a dataset directory. Malformed input is rejected, never repaired.
pub fn load_dataset_with(dir: &Path, options: LoadOptions) -> Result<DatasetBundle> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let meta: MetaFile = read_json(&dir.join("meta.json"))?;
    let nodes: NodesFile = read_json(&dir.join("nodes.json"))?;
    let schema = Schema {
        node_types: meta.node_types.clone(),
        relations: meta.relations.clone(),
    };

    let mut edge_lists = Vec::with_capacity(schema.relations.len());
    for rel in &schema.relations {
        let path = dir.join("edges").join(format!("{}.tsv", rel.file_stem()));
        let text = read_text(&path)?;
        let n_src = *nodes.counts.get(&rel.src).unwrap_or(&0) as i64;
        let n_dst = *nodes.counts.get(&rel.dst).unwrap_or(&0) as i64;
        let mut list = Vec::new();
        for (line, l) in lines(&text) {
            let (s, d) = parse_pair(&path, line, l)?;
            if s < 0 || s >= n_src || d < 0 || d >= n_dst {
                return Err(invalid(
                    &path,
                    line,
                    format!("edge ({s}, {d}) out of range for {} × {} nodes", n_src, n_dst),
                ));
            }
            list.push((s as usize, d as usize));
        }
        edge_lists.push(list);
    }
    let graph = build_graph(
        schema,
        nodes.counts.clone(),
        edge_lists,
        GraphOptions {
            allow_toy: options.allow_toy,
        },
    )?;
    let n = graph.node_count(&meta.target_type)?;

    let features = load_features(dir, &meta.target_type, n)?;

    let labels_path = dir.join("labels.tsv");
    let text = read_text(&labels_path)?;
    let mut labels: Vec<Option<i64>> = vec![None; n];
    for (line, l) in lines(&text) {
        let (node, class) = parse_pair(&labels_path, line, l)?;
        if node < 0 || node as usize >= n {
            return Err(invalid(&labels_path, line, format!("node id {node} out of range for {n} nodes")));
        }
        if class < -1 || class >= meta.num_classes as i64 {
            return Err(invalid(
                &labels_path,
                line,
                format!("class id {class} outside -1..{}", meta.num_classes),
            ));
        }
        let slot = &mut labels[node as usize];
        if slot.is_some() {
            return Err(invalid(&labels_path, line, format!("node {node} labeled twice")));
        }
        *slot = Some(class);
    }
    let labels = labels.into_iter().map(|l| l.unwrap_or(-1)).collect();

    let splits_path = dir.join("splits.json");
    let splits = if splits_path.exists() {
        Some(read_json::<Splits>(&splits_path)?)
    } else {
        None
    };

    let bundle = DatasetBundle {
        graph,
        target_type: meta.target_type,
        num_classes: meta.num_classes,
        features,
        labels,
        metapaths: meta.metapaths,
        splits,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn load_features(dir: &Path, target: &str, n: usize) -> Result<Tensor<f64>> {
    let csv_path = features_dir(dir).join(format!("{target}.csv"));
    if !csv_path.exists() {
        return Err(Error::MissingFile(csv_path));
    }
    let csv_bytes = fs::read(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let bin_path = features_dir(dir).join(format!("{target}.bin"));
    if bin_path.exists() {
        let bin = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let digest = Sha256::digest(&csv_bytes);
        if let Some(t) = decode_sidecar(&bin, digest.as_slice()) {
            if t.rows() != n {
                return Err(Error::Dimension(format!(
                    "{} has {} rows, expected {n}",
                    bin_path.display(),
                    t.rows()
                )));
            }
            return Ok(t);
        }
    }
    let text = String::from_utf8(csv_bytes).map_err(|_| invalid(&csv_path, 0, "not valid UTF-8"))?;
    parse_features_csv(&csv_path, &text, n)
}

fn parse_features_csv(path: &Path, text: &str, n: usize) -> Result<Tensor<f64>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, l) in lines(text) {
        let row: Vec<f64> = l
            .split(',')
            .map(|s| {
                let s = s.trim();
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(invalid(path, line, format!("`{s}` is not a finite real"))),
                }
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(invalid(path, line, format!("{} values, expected {c}", row.len())));
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::Dimension(format!(
            "{} has {rows} feature rows, expected {n} target nodes",
            path.display()
        )));
    }
    Tensor::matrix(rows, cols.unwrap_or(0), data)
}

fn decode_sidecar(bin: &[u8], csv_digest: &[u8]) -> Option<Tensor<f64>> {
    if bin.len() < 56 || &bin[..8] != FEATURE_SIDECAR_MAGIC || &bin[24..56] != csv_digest {
        return None;
    }
    let rows = u64::from_le_bytes(bin[8..16].try_into().ok()?) as usize;
    let cols = u64::from_le_bytes(bin[16..24].try_into().ok()?) as usize;
    let body = &bin[56..];
    if body.len() != rows.checked_mul(cols)?.checked_mul(8)? {
        return None;
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor::matrix(rows, cols, data).ok()
}

fn features_csv(features: &Tensor<f64>) -> String {
    let mut out = String::new();
    for i in 0..features.rows() {
        let row: Vec<String> = features.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
}

/// Write a bundle in the directory layout read by [`load_dataset`].
pub fn write_dataset(bundle: &DatasetBundle, dir: &Path, options: WriteOptions) -> Result<()> {
    bundle.validate()?;
    for sub in [dir.to_path_buf(), dir.join("edges"), features_dir(dir)] {
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    let meta = MetaFile {
        target_type: bundle.target_type.clone(),
        num_classes: bundle.num_classes,
        node_types: bundle.graph.node_types().to_vec(),
        relations: bundle.graph.relations().to_vec(),
        metapaths: bundle.metapaths.clone(),
    };
    let p = dir.join("meta.json");
    write_file(&p, json_pretty(&p, &meta)?)?;
    let nodes = NodesFile {
        counts: bundle.graph.counts().clone(),
    };
    let p = dir.join("nodes.json");
    write_file(&p, json_pretty(&p, &nodes)?)?;

    for (id, rel) in bundle.graph.relations().iter().enumerate() {
        let mut text = String::new();
        for (s, d) in bundle.graph.edges(id) {
            text.push_str(&format!("{s}\t{d}\n"));
        }
        write_file(&dir.join("edges").join(format!("{}.tsv", rel.file_stem())), text)?;
    }

    let csv = features_csv(&bundle.features);
    let csv_path = features_dir(dir).join(format!("{}.csv", bundle.target_type));
    write_file(&csv_path, &csv)?;
    let bin_path = features_dir(dir).join(format!("{}.bin", bundle.target_type));
    if options.feature_sidecar {
        let mut bin = Vec::with_capacity(56 + 8 * bundle.features.len());
        bin.extend_from_slice(FEATURE_SIDECAR_MAGIC);
        bin.extend_from_slice(&(bundle.features.rows() as u64).to_le_bytes());
        bin.extend_from_slice(&(bundle.features.cols() as u64).to_le_bytes());
        bin.extend_from_slice(Sha256::digest(csv.as_bytes()).as_slice());
        for v in bundle.features.data() {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        write_file(&bin_path, bin)?;
    } else if bin_path.exists() {
        fs::remove_file(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    }

    let mut labels = String::new();
    for (i, l) in bundle.labels.iter().enumerate() {
        labels.push_str(&format!("{i}\t{l}\n"));
    }
    write_file(&dir.join("labels.tsv"), labels)?;

    let splits_path = dir.join("splits.json");
    match &bundle.splits {
        Some(s) => write_file(&splits_path, serde_json::to_string(s).expect("splits serialize") + "\n")?,
        None if splits_path.exists() => fs::remove_file(&splits_path).map_err(|e| Error::io(&splits_path, e))?,
        None => {}
    }
    Ok(())
}
