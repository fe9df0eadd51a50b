//! Bond configurations and their open clusters.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graphs::TransitiveGraph;
use crate::scalar::Scalar;

/// Bond percolation on a graph with per-edge open probability `p`.
#[derive(Debug, Clone, Copy)]
pub struct PercolationModel<'g, T> {
    graph: &'g TransitiveGraph,
    p: T,
}

impl<'g, T: Scalar> PercolationModel<'g, T> {
    pub fn new(graph: &'g TransitiveGraph, p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(LabError::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
        }
        Ok(Self { graph, p })
    }

    pub fn graph(&self) -> &'g TransitiveGraph {
        self.graph
    }

    pub fn p(&self) -> T {
        self.p
    }
}

/// Provenance of a percolation model for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub graph: crate::graphs::GraphDescription,
    pub p: f64,
}

impl<T: Scalar> PercolationModel<'_, T> {
    pub fn provenance(&self) -> ModelProvenance {
        ModelProvenance { graph: self.graph.describe(), p: self.p.to_f64_lossy() }
    }
}

/// One bit per edge index; bit set means the edge is open.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeConfiguration {
    words: Vec<u64>,
    len: usize,
}

impl EdgeConfiguration {
    pub fn all_closed(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn all_open(len: usize) -> Self {
        let mut c = Self::all_closed(len);
        for e in 0..len {
            c.set(e, true);
        }
        c
    }

    pub fn from_open_edges(len: usize, open: &[usize]) -> Self {
        let mut c = Self::all_closed(len);
        for &e in open {
            c.set(e, true);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn is_open(&self, e: usize) -> bool {
        self.words[e / 64] >> (e % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, e: usize, open: bool) {
        assert!(e < self.len, "edge index out of range");
        if open {
            self.words[e / 64] |= 1 << (e % 64);
        } else {
            self.words[e / 64] &= !(1 << (e % 64));
        }
    }

    pub fn open_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
    }

    #[inline]
    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    #[inline]
    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
    }

    /// Size of the set containing `x`; valid when `x` is a root or after `find`.
    #[inline]
    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// Partition of the vertices into open clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl ClusterLabeling {
    /// Cluster id per vertex; ids are numbered by first appearance.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Size of each cluster, indexed by cluster id.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cluster_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn connected(&self, v: usize, w: usize) -> bool {
        self.labels[v] == self.labels[w]
    }

    pub fn cluster_size_of(&self, v: usize) -> usize {
        self.sizes[self.labels[v]]
    }

    /// Members of each cluster in ascending vertex order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (v, &l) in self.labels.iter().enumerate() {
            out[l].push(v);
        }
        out
    }
}

/// Open clusters of a configuration.
pub fn clusters(g: &TransitiveGraph, config: &EdgeConfiguration) -> ClusterLabeling {
    assert_eq!(config.len(), g.edge_count(), "configuration length differs from edge count");
    let mut dsu = DisjointSets::new(g.vertex_count());
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        if config.is_open(e) {
            dsu.union(u, v);
        }
    }
    labeling_from(&mut dsu)
}

pub(crate) fn labeling_from(dsu: &mut DisjointSets) -> ClusterLabeling {
    let n = dsu.parent.len();
    let mut root_label = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut sizes = Vec::new();
    for v in 0..n {
        let r = dsu.find(v);
        if root_label[r] == usize::MAX {
            root_label[r] = sizes.len();
            sizes.push(dsu.size[r] as usize);
        }
        labels.push(root_label[r]);
    }
    ClusterLabeling { labels, sizes }
}
