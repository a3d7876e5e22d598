use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into [`HeteroGraph::relations`].
pub type RelationId = usize;

/// A typed edge set `src_type --name--> dst_type`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub src: String,
    pub name: String,
    pub dst: String,
}

impl Relation {
    pub fn new(src: impl Into<String>, name: impl Into<String>, dst: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            name: name.into(),
            dst: dst.into(),
        }
    }

    /// File stem used by the dataset layout: `<src>__<name>__<dst>`.
    pub fn file_stem(&self) -> String {
        format!("{}__{}__{}", self.src, self.name, self.dst)
    }
}

/// Node types and relations, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    pub node_types: Vec<String>,
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GraphOptions {
    /// Accept graphs with `|types| + |relations| <= 2`.
    pub allow_toy: bool,
}

/// Compressed adjacency for one traversal direction of a relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn from_pairs(rows: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for (r, c) in pairs {
            buckets[r].push(c);
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut b in buckets {
            b.sort_unstable();
            targets.extend(b);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub(crate) fn row(&self, r: usize) -> &[usize] {
        &self.targets[self.offsets[r]..self.offsets[r + 1]]
    }
}

/// Typed nodes (0-based contiguous ids per type) and deduplicated typed edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    schema: Schema,
    counts: BTreeMap<String, usize>,
    edges: Vec<Vec<(usize, usize)>>,
    forward: Vec<Csr>,
    backward: Vec<Csr>,
    heterogeneous: bool,
}

/// Validate a schema plus edge lists and build an immutable [`HeteroGraph`].
///
/// Edge lists are indexed like `schema.relations`. Duplicate pairs are
/// dropped and each list is sorted.
pub fn build_graph(
    schema: Schema,
    counts: BTreeMap<String, usize>,
    edge_lists: Vec<Vec<(usize, usize)>>,
    options: GraphOptions,
) -> Result<HeteroGraph> {
    for (i, t) in schema.node_types.iter().enumerate() {
        if schema.node_types[..i].contains(t) {
            return Err(Error::Schema(format!("duplicate node type `{t}`")));
        }
        if !counts.contains_key(t) {
            return Err(Error::Schema(format!("no node count for type `{t}`")));
        }
    }
    for t in counts.keys() {
        if !schema.node_types.contains(t) {
            return Err(Error::Schema(format!("count given for unknown node type `{t}`")));
        }
    }
    for (i, rel) in schema.relations.iter().enumerate() {
        for end in [&rel.src, &rel.dst] {
            if !schema.node_types.contains(end) {
                return Err(Error::Schema(format!(
                    "relation `{}` references unknown node type `{end}`",
                    rel.name
                )));
            }
        }
        if schema.relations[..i].iter().any(|r| r.name == rel.name) {
            return Err(Error::Schema(format!("duplicate relation name `{}`", rel.name)));
        }
    }
    if edge_lists.len() != schema.relations.len() {
        return Err(Error::Schema(format!(
            "{} edge lists given for {} relations",
            edge_lists.len(),
            schema.relations.len()
        )));
    }

    let heterogeneous = schema.node_types.len() + schema.relations.len() > 2;
    if !heterogeneous && !options.allow_toy {
        return Err(Error::Schema(format!(
            "not heterogeneous: {} node types + {} relations <= 2 (set allow_toy to accept)",
            schema.node_types.len(),
            schema.relations.len()
        )));
    }

    let mut edges = Vec::with_capacity(edge_lists.len());
    let mut forward = Vec::with_capacity(edge_lists.len());
    let mut backward = Vec::with_capacity(edge_lists.len());
    for (rel, mut list) in schema.relations.iter().zip(edge_lists) {
        let n_src = counts[&rel.src];
        let n_dst = counts[&rel.dst];
        if let Some(&(s, d)) = list.iter().find(|&&(s, d)| s >= n_src || d >= n_dst) {
            return Err(Error::EdgeOutOfRange {
                relation: rel.file_stem(),
                src: s,
                dst: d,
            });
        }
        list.sort_unstable();
        list.dedup();
        forward.push(Csr::from_pairs(n_src, list.iter().copied()));
        backward.push(Csr::from_pairs(n_dst, list.iter().map(|&(s, d)| (d, s))));
        edges.push(list);
    }

    Ok(HeteroGraph {
        schema,
        counts,
        edges,
        forward,
        backward,
        heterogeneous,
    })
}

impl HeteroGraph {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_types(&self) -> &[String] {
        &self.schema.node_types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.schema.relations
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    /// Node count of a type, or a schema error for an unknown type.
    pub fn node_count(&self, node_type: &str) -> Result<usize> {
        self.counts
            .get(node_type)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown node type `{node_type}`")))
    }

    /// Sorted, deduplicated `(src_id, dst_id)` pairs of a relation.
    pub fn edges(&self, relation: RelationId) -> &[(usize, usize)] {
        &self.edges[relation]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.schema.relations.iter().position(|r| r.name == name)
    }

    /// `|types| + |relations| > 2`.
    pub fn is_heterogeneous(&self) -> bool {
        self.heterogeneous
    }

    pub(crate) fn forward_csr(&self, relation: RelationId) -> &Csr {
        &self.forward[relation]
    }

    pub(crate) fn backward_csr(&self, relation: RelationId) -> &Csr {
        &self.backward[relation]
    }
}
