use super::graph::HeteroGraph;
use super::metapath::{Direction, MetaPath};
use crate::error::{Error, Result};

/// Binary meta-path adjacency over the target nodes with forced self-loops
/// and symmetric normalization coefficients `1 / sqrt(D_i * D_j)`.
///
/// Stored row-compressed: row `i` lists the sorted neighbor set `N_i`
/// (which always contains `i`) and the matching coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaPathAdjacency {
    name: String,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    coeffs: Vec<f64>,
}

impl MetaPathAdjacency {
    /// Build from explicit neighbor sets. Self-loops are added, rows sorted.
    pub fn from_neighbor_sets(name: impl Into<String>, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        for (i, set) in sets.iter_mut().enumerate() {
            if let Some(&j) = set.iter().find(|&&j| j >= n) {
                return Err(Error::Index { index: j, len: n });
            }
            set.push(i);
            set.sort_unstable();
            set.dedup();
        }
        let degrees: Vec<usize> = sets.iter().map(Vec::len).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut coeffs = Vec::new();
        offsets.push(0);
        for (i, set) in sets.into_iter().enumerate() {
            for j in set {
                coeffs.push(1.0 / ((degrees[i] * degrees[j]) as f64).sqrt());
                neighbors.push(j);
            }
            offsets.push(neighbors.len());
        }
        Ok(Self {
            name: name.into(),
            offsets,
            neighbors,
            coeffs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of target nodes.
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sorted neighbor ids of `i` (unchecked; see [`metapath_neighbors`]).
    pub fn row(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Normalization coefficients aligned with [`Self::row`].
    pub fn row_coeffs(&self, i: usize) -> &[f64] {
        &self.coeffs[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `D_i = |N_i| >= 1`.
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// Coefficient of `(i, j)`, `None` when `j` is not a neighbor of `i`.
    pub fn coeff(&self, i: usize, j: usize) -> Option<f64> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_coeffs(i)[k])
    }

    /// Number of stored (i, j) entries including self-loops.
    pub fn nnz(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n()).all(|i| self.row(i).iter().all(|&j| self.contains(j, i)))
    }

    /// The adjacency under the relabeling `old id i -> perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::Shape(format!("permutation of length {} for {n} nodes", perm.len())));
        }
        let mut sets = vec![Vec::new(); n];
        for i in 0..n {
            sets[perm[i]] = self.row(i).iter().map(|&j| perm[j]).collect();
        }
        Self::from_neighbor_sets(self.name.clone(), sets)
    }
}

/// Compose the meta-path relation by relation as sparse boolean products,
/// then force the diagonal and attach normalization coefficients.
pub fn compose_metapath_adjacency(
    graph: &HeteroGraph,
    target_type: &str,
    metapath: &MetaPath,
) -> Result<MetaPathAdjacency> {
    let steps = metapath.resolve(graph, target_type)?;
    let n = graph.node_count(target_type)?;
    let max_count = graph.counts().values().copied().max().unwrap_or(0);

    // `seen[v] == stamp` marks v as already in the next frontier.
    let mut seen = vec![usize::MAX; max_count];
    let mut stamp = 0usize;
    let mut sets = Vec::with_capacity(n);
    let mut next = Vec::new();
    for i in 0..n {
        let mut frontier = vec![i];
        for step in &steps {
            next.clear();
            stamp += 1;
            let forward = graph.forward_csr(step.relation);
            let backward = graph.backward_csr(step.relation);
            for &u in &frontier {
                let rows: [&[usize]; 2] = match step.direction {
                    Direction::Forward => [forward.row(u), &[]],
                    Direction::Backward => [backward.row(u), &[]],
                    Direction::Both => [forward.row(u), backward.row(u)],
                };
                for &v in rows.into_iter().flatten() {
                    if seen[v] != stamp {
                        seen[v] = stamp;
                        next.push(v);
                    }
                }
            }
            std::mem::swap(&mut frontier, &mut next);
        }
        sets.push(frontier);
    }
    MetaPathAdjacency::from_neighbor_sets(metapath.name.clone(), sets)
}

/// `N_i` including `i` itself.
pub fn metapath_neighbors(adj: &MetaPathAdjacency, i: usize) -> Result<&[usize]> {
    if i >= adj.n() {
        return Err(Error::Index { index: i, len: adj.n() });
    }
    Ok(adj.row(i))
}
