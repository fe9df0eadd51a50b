//! Finite vertex-transitive graphs with explicit translation automorphisms.
//!
//! Vertex encodings:
//! - cycle: `i` in `0..n`;
//! - torus `(Z/LZ)^d`: row-major, the first coordinate is the most significant digit;
//! - complete graph: `i` in `0..n`;
//! - hypercube `{0,1}^k`: bitmask.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_VERTEX_BUDGET: usize = 4096;

/// Which builder produced a graph, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Cycle { n: usize },
    Torus { d: usize, l: usize },
    Complete { n: usize },
    Hypercube { k: usize },
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphFamily::Cycle { n } => write!(f, "cycle:{n}"),
            GraphFamily::Torus { d, l } => write!(f, "torus:{d},{l}"),
            GraphFamily::Complete { n } => write!(f, "complete:{n}"),
            GraphFamily::Hypercube { k } => write!(f, "hypercube:{k}"),
        }
    }
}

impl FromStr for GraphFamily {
    type Err = LabError;

    /// Parses `cycle:n`, `torus:d,L`, `complete:n` or `hypercube:k`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::InvalidParameter(format!("unrecognized graph spec {s:?}"));
        let (name, params) = s.split_once(':').ok_or_else(bad)?;
        let nums =
            params.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        match (name.trim(), nums.as_slice()) {
            ("cycle", &[n]) => Ok(GraphFamily::Cycle { n }),
            ("torus", &[d, l]) => Ok(GraphFamily::Torus { d, l }),
            ("complete", &[n]) => Ok(GraphFamily::Complete { n }),
            ("hypercube", &[k]) => Ok(GraphFamily::Hypercube { k }),
            _ => Err(bad()),
        }
    }
}

impl GraphFamily {
    pub fn vertex_count(&self) -> Option<usize> {
        match *self {
            GraphFamily::Cycle { n } | GraphFamily::Complete { n } => Some(n),
            GraphFamily::Torus { d, l } => u32::try_from(d).ok().and_then(|d| l.checked_pow(d)),
            GraphFamily::Hypercube { k } => u32::try_from(k).ok().and_then(|k| 1usize.checked_shl(k)),
        }
    }
}

/// A graph automorphism stored as an explicit permutation with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphism {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Automorphism {
    pub fn identity(n: usize) -> Self {
        Self { forward: (0..n).collect(), inverse: (0..n).collect() }
    }

    pub fn from_permutation(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &j) in forward.iter().enumerate() {
            if j >= n || inverse[j] != usize::MAX {
                return Err(LabError::InvalidParameter("not a permutation".into()));
            }
            inverse[j] = i;
        }
        Ok(Self { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    #[inline]
    pub fn apply(&self, v: usize) -> usize {
        self.forward[v]
    }

    #[inline]
    pub fn apply_inverse(&self, v: usize) -> usize {
        self.inverse[v]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> Self {
        Self { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let forward = other.forward.iter().map(|&i| self.forward[i]).collect();
        Self::from_permutation(forward).expect("composition of permutations")
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Exhaustive check that `{u,v}` is an edge iff `{φ(u),φ(v)}` is one.
    pub fn preserves_adjacency(&self, g: &TransitiveGraph) -> bool {
        if self.len() != g.vertex_count() {
            return false;
        }
        // A bijection mapping every edge to an edge preserves non-edges too (finite edge set).
        g.edges().iter().all(|&(u, v)| g.is_edge(self.apply(u), self.apply(v)))
    }
}

/// Real-valued function on the vertex set; `1_v` is the indicator special case.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> VertexVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n] }
    }

    pub fn indicator(n: usize, v: usize) -> Self {
        let mut values = vec![T::zero(); n];
        values[v] = T::one();
        Self { values }
    }

    pub fn from_vec(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(LabError::InvalidParameter("vector has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|x| x.is_zero())
    }

    /// Sorted indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, _)| i).collect()
    }
}

impl<T> std::ops::Index<usize> for VertexVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// `(Φf)(v) = f(φ⁻¹(v))`.
pub fn automorphism_isometry<T: Scalar>(phi: &Automorphism, f: &VertexVector<T>) -> VertexVector<T> {
    assert_eq!(phi.len(), f.len(), "automorphism and vector sizes differ");
    VertexVector { values: (0..f.len()).map(|v| f.values[phi.apply_inverse(v)]).collect() }
}

/// JSON provenance record for a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDescription {
    pub spec: String,
    #[serde(flatten)]
    pub family: GraphFamily,
    pub vertices: usize,
    pub edges: usize,
}

#[derive(Debug)]
pub struct TransitiveGraph {
    family: GraphFamily,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    generators: Vec<Automorphism>,
    distances: OnceLock<Vec<u16>>,
}

impl TransitiveGraph {
    pub fn build(family: GraphFamily) -> Result<Self> {
        Self::build_with_budget(family, DEFAULT_VERTEX_BUDGET)
    }

    pub fn build_with_budget(family: GraphFamily, vertex_budget: usize) -> Result<Self> {
        let budget = vertex_budget;
        let n = family.vertex_count().ok_or(LabError::CapExceeded {
            what: "vertex",
            requested: u64::MAX,
            cap: budget as u64,
        })?;
        if n > budget {
            return Err(LabError::CapExceeded { what: "vertex", requested: n as u64, cap: budget as u64 });
        }
        match family {
            GraphFamily::Cycle { n } if n < 3 => {
                Err(LabError::InvalidParameter(format!("cycle needs n >= 3, got {n}")))
            }
            GraphFamily::Torus { d, l } if d < 1 || l < 3 => {
                Err(LabError::InvalidParameter(format!("torus needs d >= 1 and L >= 3, got d={d}, L={l}")))
            }
            GraphFamily::Complete { n } if n < 2 => {
                Err(LabError::InvalidParameter(format!("complete graph needs n >= 2, got {n}")))
            }
            GraphFamily::Hypercube { k } if k < 1 => Err(LabError::InvalidParameter("hypercube needs k >= 1".into())),
            GraphFamily::Cycle { n } => {
                let edge_list = (0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>();
                let rot = Automorphism::from_permutation((0..n).map(|i| (i + 1) % n).collect())?;
                Ok(Self::assemble(family, n, edge_list, vec![rot]))
            }
            GraphFamily::Torus { d, l } => {
                let mut edge_list = Vec::with_capacity(n * d);
                let mut generators = Vec::with_capacity(d);
                for axis in 0..d {
                    let shift = (0..n).map(|i| torus_shift(i, axis, 1, d, l)).collect::<Vec<_>>();
                    for (i, &j) in shift.iter().enumerate() {
                        edge_list.push((i, j));
                    }
                    generators.push(Automorphism::from_permutation(shift)?);
                }
                Ok(Self::assemble(family, n, edge_list, generators))
            }
            GraphFamily::Complete { n } => {
                let mut edge_list = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        edge_list.push((u, v));
                    }
                }
                let generators = (1..n).map(|i| transposition(n, 0, i)).collect();
                Ok(Self::assemble(family, n, edge_list, generators))
            }
            GraphFamily::Hypercube { k } => {
                let mut edge_list = Vec::new();
                let mut generators = Vec::new();
                for bit in 0..k {
                    let flip = (0..n).map(|i| i ^ (1 << bit)).collect::<Vec<_>>();
                    for i in 0..n {
                        if i & (1 << bit) == 0 {
                            edge_list.push((i, i | (1 << bit)));
                        }
                    }
                    generators.push(Automorphism::from_permutation(flip)?);
                }
                Ok(Self::assemble(family, n, edge_list, generators))
            }
        }
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Self::build(GraphFamily::Cycle { n })
    }

    pub fn torus(d: usize, l: usize) -> Result<Self> {
        Self::build(GraphFamily::Torus { d, l })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::build(GraphFamily::Complete { n })
    }

    pub fn hypercube(k: usize) -> Result<Self> {
        Self::build(GraphFamily::Hypercube { k })
    }

    fn assemble(family: GraphFamily, n: usize, raw_edges: Vec<(usize, usize)>, generators: Vec<Automorphism>) -> Self {
        let mut edges = raw_edges.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect::<Vec<_>>();
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Self { family, adjacency, edges, generators, distances: OnceLock::new() }
    }

    pub fn family(&self) -> GraphFamily {
        self.family
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edges `(u, v)` with `u < v`, sorted; the position is the edge index.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn generators(&self) -> &[Automorphism] {
        &self.generators
    }

    pub fn describe(&self) -> GraphDescription {
        GraphDescription {
            spec: self.family.to_string(),
            family: self.family,
            vertices: self.vertex_count(),
            edges: self.edge_count(),
        }
    }

    /// Torus coordinates of a vertex (row-major encoding).
    pub fn torus_coordinates(&self, v: usize) -> Option<Vec<usize>> {
        match self.family {
            GraphFamily::Torus { d, l } => Some(torus_coords(v, d, l)),
            _ => None,
        }
    }

    pub fn torus_vertex(&self, coords: &[usize]) -> Option<usize> {
        match self.family {
            GraphFamily::Torus { d, l } if coords.len() == d => Some(coords.iter().fold(0, |acc, &c| acc * l + c % l)),
            _ => None,
        }
    }

    fn distance_table(&self) -> &[u16] {
        self.distances.get_or_init(|| {
            let n = self.vertex_count();
            let mut table = vec![u16::MAX; n * n];
            let mut queue = VecDeque::new();
            for s in 0..n {
                let row = &mut table[s * n..(s + 1) * n];
                row[s] = 0;
                queue.push_back(s);
                while let Some(u) = queue.pop_front() {
                    let du = row[u];
                    for &w in &self.adjacency[u] {
                        if row[w] == u16::MAX {
                            row[w] = du + 1;
                            queue.push_back(w);
                        }
                    }
                }
            }
            table
        })
    }

    /// Shortest-path distance.
    pub fn distance(&self, v: usize, w: usize) -> usize {
        let n = self.vertex_count();
        self.distance_table()[v * n + w] as usize
    }

    pub fn diameter(&self) -> usize {
        self.distance_table().iter().copied().max().unwrap_or(0) as usize
    }

    /// `{w : d(v, w) <= radius}` in ascending order.
    pub fn ball(&self, v: usize, radius: usize) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&w| self.distance(v, w) <= radius).collect()
    }

    /// Vertices strictly outside the ball of the given radius.
    pub fn outside_ball(&self, v: usize, radius: usize) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&w| self.distance(v, w) > radius).collect()
    }

    /// An automorphism from the translation family mapping `v` to `w`.
    pub fn translation_to(&self, v: usize, w: usize) -> Automorphism {
        let n = self.vertex_count();
        assert!(v < n && w < n, "vertex out of range");
        let forward = match self.family {
            GraphFamily::Cycle { n } => (0..n).map(|i| (i + w + n - v) % n).collect(),
            GraphFamily::Torus { d, l } => {
                let from = torus_coords(v, d, l);
                let to = torus_coords(w, d, l);
                (0..n)
                    .map(|i| {
                        let c = torus_coords(i, d, l);
                        c.iter()
                            .zip(from.iter().zip(&to))
                            .fold(0, |acc, (&ci, (&fi, &ti))| acc * l + (ci + ti + l - fi) % l)
                    })
                    .collect()
            }
            GraphFamily::Hypercube { .. } => (0..n).map(|i| i ^ v ^ w).collect(),
            GraphFamily::Complete { n } => return transposition(n, v, w),
        };
        Automorphism::from_permutation(forward).expect("translation is a permutation")
    }

    /// Exhaustive structural checks: symmetric simple adjacency, generators are automorphisms.
    pub fn verify_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(LabError::InvalidParameter(msg));
        for (v, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.windows(2).any(|w| w[0] == w[1]) {
                return fail(format!("duplicate neighbor at {v}"));
            }
            for &u in nbrs {
                if u == v {
                    return fail(format!("self-loop at {v}"));
                }
                if !self.is_edge(u, v) {
                    return fail(format!("asymmetric adjacency {v} -> {u}"));
                }
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            if !g.preserves_adjacency(self) {
                return fail(format!("generator {i} does not preserve adjacency"));
            }
        }
        Ok(())
    }
}

fn torus_coords(mut v: usize, d: usize, l: usize) -> Vec<usize> {
    let mut c = vec![0; d];
    for slot in c.iter_mut().rev() {
        *slot = v % l;
        v /= l;
    }
    c
}

fn torus_shift(v: usize, axis: usize, by: usize, d: usize, l: usize) -> usize {
    let mut c = torus_coords(v, d, l);
    c[axis] = (c[axis] + by) % l;
    c.iter().fold(0, |acc, &x| acc * l + x)
}

fn transposition(n: usize, a: usize, b: usize) -> Automorphism {
    let mut forward: Vec<usize> = (0..n).collect();
    forward.swap(a, b);
    Automorphism::from_permutation(forward).expect("transposition")
}
