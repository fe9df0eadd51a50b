//! Exact percolation quantities by exhaustive enumeration of edge configurations.
//!
//! Every configuration is visited once and its clusters recomputed with union-find.
//! Connection events are tallied as integer counts bucketed by the number of open
//! edges `k`, so a quantity at probability `p` is the polynomial
//! `Σ_k p^k (1-p)^(|E|-k) · count_k`. The counts are exact, independent of `p`, and
//! independent of how the configuration range is split across workers.

use std::thread;

use crate::error::{LabError, Result};
use crate::graphs::{TransitiveGraph, VertexVector};
use crate::matrix::Matrix;
use crate::percolation::{DisjointSets, PercolationModel};
use crate::scalar::{Compensated, Scalar};

pub const DEFAULT_EDGE_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    pub edge_cap: usize,
    pub workers: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { edge_cap: DEFAULT_EDGE_CAP, workers: 1 }
    }
}

/// Two-point matrix `B(v,w) = P(v ↔ w)`: symmetric, entries in `[0,1]`, unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointMatrix<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> TwoPointMatrix<T> {
    /// Validates the two-point invariants; `tol` bounds the allowed asymmetry.
    pub fn new(matrix: Matrix<T>, tol: T) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LabError::NotSquare { rows: matrix.rows(), cols: matrix.cols() });
        }
        let asym = matrix.asymmetry().unwrap_or(T::zero());
        if asym > tol {
            return Err(LabError::NotSymmetric { asymmetry: asym.to_f64_lossy() });
        }
        let n = matrix.rows();
        for i in 0..n {
            if matrix[(i, i)] != T::one() {
                return Err(LabError::InvalidParameter(format!("B({i},{i}) must be exactly 1")));
            }
            for j in 0..n {
                let x = matrix[(i, j)];
                if !(x >= T::zero() && x <= T::one()) {
                    return Err(LabError::InvalidParameter(format!("B({i},{j}) = {x} outside [0,1]")));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn get(&self, v: usize, w: usize) -> T {
        self.matrix[(v, w)]
    }

    /// The vector `B 1_w = (B(y, w))_y`.
    pub fn column(&self, w: usize) -> VertexVector<T> {
        VertexVector::from_vec(self.matrix.column(w)).expect("finite entries")
    }
}

/// The matrices `B_n(v,w) = P(v ↔ w, |C(v)| = n)` for `n = 1..=len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeResolvedFamily<T> {
    matrices: Vec<Matrix<T>>,
}

impl<T: Scalar> SizeResolvedFamily<T> {
    pub fn new(matrices: Vec<Matrix<T>>) -> Result<Self> {
        if let Some(first) = matrices.first() {
            let (r, c) = (first.rows(), first.cols());
            if r != c {
                return Err(LabError::NotSquare { rows: r, cols: c });
            }
            if let Some(bad) = matrices.iter().find(|m| m.rows() != r || m.cols() != c) {
                return Err(LabError::DimensionMismatch { expected: r * c, found: bad.rows() * bad.cols() });
            }
        }
        Ok(Self { matrices })
    }

    /// Largest cluster size represented.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.rows())
    }

    /// `B_n` for `n >= 1`.
    pub fn get(&self, n: usize) -> &Matrix<T> {
        &self.matrices[n - 1]
    }

    /// Pairs `(n, B_n)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Matrix<T>)> {
        self.matrices.iter().enumerate().map(|(i, m)| (i + 1, m))
    }

    /// Keeps only `B_1..=B_{n_max}`.
    pub fn truncated(&self, n_max: usize) -> Self {
        Self { matrices: self.matrices.iter().take(n_max).cloned().collect() }
    }

    /// Entrywise `Σ_n B_n` with compensated accumulation.
    pub fn sum(&self) -> Matrix<T> {
        let d = self.dim();
        Matrix::from_fn(d, d, |i, j| self.matrices.iter().map(|m| m[(i, j)]).collect::<Compensated<T>>().value())
    }
}

/// Integer tallies of connection events over all `2^|E|` configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigurationCounts {
    vertices: usize,
    edges: usize,
    /// `[k][v][w]`: configurations with `k` open edges where `v ↔ w`.
    two_point: Vec<u64>,
    /// `[k][n-1][v][w]`: as above with `|C(v)| = n`.
    size_resolved: Vec<u64>,
}

impl ConfigurationCounts {
    pub fn enumerate(g: &TransitiveGraph, opts: EnumerationOptions) -> Result<Self> {
        let edges = g.edge_count();
        check_cap(edges, opts.edge_cap)?;
        let total: u64 = 1 << edges;
        let workers = opts.workers.clamp(1, 64) as u64;
        let chunk = total.div_ceil(workers);
        let parts = thread::scope(|s| {
            let handles = (0..workers)
                .map(|i| {
                    let lo = (i * chunk).min(total);
                    let hi = ((i + 1) * chunk).min(total);
                    s.spawn(move || Self::enumerate_range(g, lo, hi))
                })
                .collect::<Vec<_>>();
            handles.into_iter().map(|h| h.join().expect("enumeration worker panicked")).collect::<Vec<_>>()
        });
        let mut parts = parts.into_iter();
        let mut acc = parts.next().expect("at least one worker");
        for part in parts {
            for (a, b) in acc.two_point.iter_mut().zip(&part.two_point) {
                *a += b;
            }
            for (a, b) in acc.size_resolved.iter_mut().zip(&part.size_resolved) {
                *a += b;
            }
        }
        Ok(acc)
    }

    fn enumerate_range(g: &TransitiveGraph, lo: u64, hi: u64) -> Self {
        let n = g.vertex_count();
        let edges = g.edge_count();
        let mut two_point = vec![0u64; (edges + 1) * n * n];
        let mut size_resolved = vec![0u64; (edges + 1) * n * n * n];
        let mut dsu = DisjointSets::new(n);
        let mut roots = vec![0usize; n];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for mask in lo..hi {
            dsu.reset();
            let mut bits = mask;
            while bits != 0 {
                let e = bits.trailing_zeros() as usize;
                let (u, v) = g.edges()[e];
                dsu.union(u, v);
                bits &= bits - 1;
            }
            let k = mask.count_ones() as usize;
            for m in members.iter_mut() {
                m.clear();
            }
            for (v, r) in roots.iter_mut().enumerate() {
                *r = dsu.find(v);
                members[*r].push(v);
            }
            for cluster in members.iter().filter(|m| !m.is_empty()) {
                let size = cluster.len();
                let tp = &mut two_point[k * n * n..(k + 1) * n * n];
                let base = (k * n + size - 1) * n * n;
                let sr = &mut size_resolved[base..base + n * n];
                for &v in cluster {
                    for &w in cluster {
                        tp[v * n + w] += 1;
                        sr[v * n + w] += 1;
                    }
                }
            }
        }
        Self { vertices: n, edges, two_point, size_resolved }
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> usize {
        self.edges
    }

    /// Number of configurations with `k` open edges in which `v ↔ w`.
    pub fn connection_count(&self, k: usize, v: usize, w: usize) -> u64 {
        let n = self.vertices;
        self.two_point[(k * n + v) * n + w]
    }

    pub fn two_point<T: Scalar>(&self, p: T) -> TwoPointMatrix<T> {
        let n = self.vertices;
        let weights = configuration_weights(p, self.edges);
        let mut m = Matrix::from_fn(n, n, |v, w| {
            weights
                .iter()
                .enumerate()
                .map(|(k, &wk)| wk * T::from_count(self.two_point[(k * n + v) * n + w]))
                .collect::<Compensated<T>>()
                .value()
        });
        for v in 0..n {
            // v ↔ v in every configuration
            m[(v, v)] = T::one();
        }
        TwoPointMatrix { matrix: m }
    }

    pub fn size_resolved<T: Scalar>(&self, p: T) -> SizeResolvedFamily<T> {
        let n = self.vertices;
        let weights = configuration_weights(p, self.edges);
        let matrices = (1..=n)
            .map(|size| {
                Matrix::from_fn(n, n, |v, w| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(k, &wk)| {
                            let idx = ((k * n + size - 1) * n + v) * n + w;
                            wk * T::from_count(self.size_resolved[idx])
                        })
                        .collect::<Compensated<T>>()
                        .value()
                })
            })
            .collect();
        SizeResolvedFamily { matrices }
    }
}

fn check_cap(edges: usize, cap: usize) -> Result<()> {
    let cap = cap.min(63);
    if edges > cap {
        return Err(LabError::CapExceeded { what: "enumeration edge", requested: edges as u64, cap: cap as u64 });
    }
    Ok(())
}

/// `p^k (1-p)^(m-k)` for `k = 0..=m`.
fn configuration_weights<T: Scalar>(p: T, m: usize) -> Vec<T> {
    let q = T::one() - p;
    (0..=m).map(|k| p.powi(k as i32) * q.powi((m - k) as i32)).collect()
}

pub fn enumerate_two_point<T: Scalar>(
    model: &PercolationModel<'_, T>,
    opts: EnumerationOptions,
) -> Result<TwoPointMatrix<T>> {
    Ok(ConfigurationCounts::enumerate(model.graph(), opts)?.two_point(model.p()))
}

pub fn enumerate_size_resolved<T: Scalar>(
    model: &PercolationModel<'_, T>,
    opts: EnumerationOptions,
) -> Result<SizeResolvedFamily<T>> {
    Ok(ConfigurationCounts::enumerate(model.graph(), opts)?.size_resolved(model.p()))
}

/// `E[ Σ_{C : |C| = n} (Σ_{v ∈ C} f(v))² ]` for every `f` in `fs` and every `n`;
/// result is indexed `[f][n - 1]`.
///
/// Computed straight from cluster sums in each configuration, without forming any `B_n`.
pub fn cluster_functionals<T: Scalar>(
    model: &PercolationModel<'_, T>,
    fs: &[VertexVector<T>],
    opts: EnumerationOptions,
) -> Result<Vec<Vec<T>>> {
    let g = model.graph();
    let n = g.vertex_count();
    let edges = g.edge_count();
    check_cap(edges, opts.edge_cap)?;
    if let Some(bad) = fs.iter().find(|f| f.len() != n) {
        return Err(LabError::DimensionMismatch { expected: n, found: bad.len() });
    }
    // acc[k][fi][size-1]
    let mut acc = vec![Compensated::<T>::new(); (edges + 1) * fs.len() * n];
    let mut dsu = DisjointSets::new(n);
    let mut cluster_sum = vec![T::zero(); n];
    let mut cluster_size = vec![0usize; n];
    for mask in 0u64..(1 << edges) {
        dsu.reset();
        let mut bits = mask;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            let (u, v) = g.edges()[e];
            dsu.union(u, v);
            bits &= bits - 1;
        }
        let k = mask.count_ones() as usize;
        cluster_size.fill(0);
        let roots = (0..n).map(|v| dsu.find(v)).collect::<Vec<_>>();
        for &r in &roots {
            cluster_size[r] += 1;
        }
        for (fi, f) in fs.iter().enumerate() {
            cluster_sum.fill(T::zero());
            for (v, &r) in roots.iter().enumerate() {
                cluster_sum[r] = cluster_sum[r] + f[v];
            }
            let base = (k * fs.len() + fi) * n;
            for r in 0..n {
                if cluster_size[r] > 0 {
                    let s = cluster_sum[r];
                    acc[base + cluster_size[r] - 1].add(s * s);
                }
            }
        }
    }
    let weights = configuration_weights(model.p(), edges);
    Ok((0..fs.len())
        .map(|fi| {
            (0..n)
                .map(|size_idx| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(k, &wk)| wk * acc[(k * fs.len() + fi) * n + size_idx].value())
                        .collect::<Compensated<T>>()
                        .value()
                })
                .collect()
        })
        .collect())
}

/// Single-`f`, single-`n` form of [`cluster_functionals`].
pub fn cluster_functional<T: Scalar>(
    model: &PercolationModel<'_, T>,
    f: &VertexVector<T>,
    n: usize,
    opts: EnumerationOptions,
) -> Result<T> {
    let nv = model.graph().vertex_count();
    if n == 0 || n > nv {
        return Err(LabError::InvalidParameter(format!("cluster size {n} outside 1..={nv}")));
    }
    Ok(cluster_functionals(model, std::slice::from_ref(f), opts)?[0][n - 1])
}

/// `P(v ↔ w)` on the `n`-cycle for arc distance `k`: `p^k + p^(n-k) - p^n`, and 1 at `k = 0`.
pub fn cycle_closed_form<T: Scalar>(n: usize, p: T, k: usize) -> Result<T> {
    if k >= n {
        return Err(LabError::InvalidParameter(format!("arc distance {k} out of range for cycle {n}")));
    }
    if k == 0 {
        return Ok(T::one());
    }
    Ok(p.powi(k as i32) + p.powi((n - k) as i32) - p.powi(n as i32))
}

/// Closed-form two-point matrix of the `n`-cycle.
pub fn cycle_two_point<T: Scalar>(n: usize, p: T) -> Result<TwoPointMatrix<T>> {
    if n < 3 {
        return Err(LabError::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
    }
    let mut row = Vec::with_capacity(n);
    for k in 0..n {
        row.push(cycle_closed_form(n, p, k)?);
    }
    Ok(TwoPointMatrix { matrix: Matrix::from_fn(n, n, |v, w| row[(w + n - v) % n]) })
}

/// Closed-form `B_size(v,w)` on the `n`-cycle where `w` sits `k` steps clockwise from `v`.
///
/// A cluster of `size < n` vertices is an arc with `size - 1` open interior edges and
/// two closed boundary edges; it contains both endpoints in `size - k` positions going
/// clockwise and `size - (n - k)` going the other way. The whole cycle is a cluster
/// iff at most one edge is closed.
pub fn cycle_size_resolved_entry<T: Scalar>(n: usize, p: T, k: usize, size: usize) -> Result<T> {
    if k >= n || size == 0 || size > n {
        return Err(LabError::InvalidParameter(format!("need k < n and 1 <= size <= n (n={n}, k={k}, size={size})")));
    }
    let q = T::one() - p;
    if size == n {
        return Ok(p.powi(n as i32) + T::from_count(n as u64) * p.powi(n as i32 - 1) * q);
    }
    let positions = if k == 0 { size } else { size.saturating_sub(k) + size.saturating_sub(n - k) };
    Ok(T::from_count(positions as u64) * p.powi(size as i32 - 1) * q * q)
}

pub fn cycle_size_resolved<T: Scalar>(n: usize, p: T) -> Result<SizeResolvedFamily<T>> {
    if n < 3 {
        return Err(LabError::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
    }
    let mut matrices = Vec::with_capacity(n);
    for size in 1..=n {
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            row.push(cycle_size_resolved_entry(n, p, k, size)?);
        }
        matrices.push(Matrix::from_fn(n, n, |v, w| row[(w + n - v) % n]));
    }
    Ok(SizeResolvedFamily { matrices })
}
