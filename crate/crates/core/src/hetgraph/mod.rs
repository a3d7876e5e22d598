//! Heterogeneous graphs, meta-paths and the normalized meta-path adjacency
//! consumed by the shared graph convolution.

mod adjacency;
mod graph;
mod metapath;

pub use adjacency::{compose_metapath_adjacency, metapath_neighbors, MetaPathAdjacency};
pub use graph::{build_graph, GraphOptions, HeteroGraph, Relation, RelationId, Schema};
pub use metapath::{Direction, MetaPath, MetaPathStep};
