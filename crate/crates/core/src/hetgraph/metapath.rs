use serde::{Deserialize, Serialize};

use super::graph::{HeteroGraph, RelationId};
use crate::error::{Error, Result};

/// A named relation sequence `R1 ∘ R2 ∘ … ∘ Rl` between target nodes.
///
/// Relations are referenced by name. Each relation may be traversed in
/// either direction; the direction of every step is fixed by the node type
/// reached so far, starting at the target type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub name: String,
    pub relations: Vec<String>,
}

/// Traversal direction of one meta-path step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// src → dst
    Forward,
    /// dst → src
    Backward,
    /// Relation between nodes of one type: both orientations.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaPathStep {
    pub relation: RelationId,
    pub direction: Direction,
}

impl MetaPath {
    pub fn new<S: Into<String>>(name: impl Into<String>, relations: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            relations: relations.into_iter().map(Into::into).collect(),
        }
    }

    /// Build a meta-path from a node-type sequence such as `"PAP"`.
    ///
    /// Type names are matched as single characters when every type name in
    /// the schema is one character long, otherwise the string is split on
    /// `-`. Each consecutive pair must be joined by exactly one relation.
    pub fn from_type_string(graph: &HeteroGraph, path: &str) -> Result<Self> {
        let types = graph.node_types();
        let tokens: Vec<String> = if types.iter().all(|t| t.chars().count() == 1) && !path.contains('-') {
            path.chars().map(String::from).collect()
        } else {
            path.split('-').map(str::to_owned).collect()
        };
        if tokens.len() < 2 {
            return Err(Error::MetaPath(format!("`{path}` needs at least two node types")));
        }
        let mut relations = Vec::with_capacity(tokens.len() - 1);
        for pair in tokens.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            for t in [a, b] {
                if !types.contains(t) {
                    return Err(Error::MetaPath(format!("`{path}`: unknown node type `{t}`")));
                }
            }
            let joining: Vec<_> = graph
                .relations()
                .iter()
                .filter(|r| (&r.src == a && &r.dst == b) || (&r.src == b && &r.dst == a))
                .collect();
            match joining.as_slice() {
                [r] => relations.push(r.name.clone()),
                [] => {
                    return Err(Error::MetaPath(format!(
                        "`{path}`: schema has no relation between `{a}` and `{b}`"
                    )))
                }
                _ => {
                    return Err(Error::MetaPath(format!(
                        "`{path}`: several relations join `{a}` and `{b}`; name them explicitly"
                    )))
                }
            }
        }
        Ok(Self::new(path, relations))
    }

    /// Check the relation chain against the graph and fix step directions.
    ///
    /// The chain must start and end at `target_type`.
    pub fn resolve(&self, graph: &HeteroGraph, target_type: &str) -> Result<Vec<MetaPathStep>> {
        if self.relations.is_empty() {
            return Err(Error::MetaPath(format!("meta-path `{}` has no relations", self.name)));
        }
        if !graph.node_types().iter().any(|t| t == target_type) {
            return Err(Error::MetaPath(format!("unknown target type `{target_type}`")));
        }
        let mut current = target_type;
        let mut steps = Vec::with_capacity(self.relations.len());
        for name in &self.relations {
            let id = graph.relation_id(name).ok_or_else(|| {
                Error::MetaPath(format!("meta-path `{}`: unknown relation `{name}`", self.name))
            })?;
            let rel = &graph.relations()[id];
            let direction = if rel.src == current && rel.dst == current {
                Direction::Both
            } else if rel.src == current {
                Direction::Forward
            } else if rel.dst == current {
                Direction::Backward
            } else {
                return Err(Error::MetaPath(format!(
                    "meta-path `{}`: relation `{name}` ({} -> {}) does not continue from type `{current}`",
                    self.name, rel.src, rel.dst
                )));
            };
            current = match direction {
                Direction::Backward => &rel.src,
                _ => &rel.dst,
            };
            steps.push(MetaPathStep { relation: id, direction });
        }
        if current != target_type {
            return Err(Error::MetaPath(format!(
                "meta-path `{}` ends at type `{current}`, expected target type `{target_type}`",
                self.name
            )));
        }
        Ok(steps)
    }
}
