//! Seeded Monte Carlo estimates of `B` and `B_n`.
//!
//! Worker `i` draws from `ChaCha8Rng::seed_from_u64(seed ^ i)` and handles a fixed
//! contiguous share of the samples; per-worker integer counts are summed in worker
//! order. Estimates are therefore a pure function of `(model, samples, seed, workers)`.

use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graphs::TransitiveGraph;
use crate::matrix::Matrix;
use crate::percolation::{DisjointSets, EdgeConfiguration, ModelProvenance, PercolationModel};

pub const GENERATOR_NAME: &str = "chacha8";
pub const MIN_SAMPLES: u64 = 100;

/// Source vertices whose rows are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    /// One row; on a transitive graph it determines the whole matrix.
    Root(usize),
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub rows: RowSelection,
}

impl McOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, workers: 1, rows: RowSelection::Root(0) }
    }

    pub fn full(mut self) -> Self {
        self.rows = RowSelection::Full;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Replay information carried by every estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McProvenance {
    pub model: ModelProvenance,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub generator: String,
    pub rows: RowSelection,
}

/// Mean and binomial standard error per estimated entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub provenance: McProvenance,
    /// Source vertex of each estimated row.
    pub rows: Vec<usize>,
    /// Raw hit counts, `rows × |V|`.
    pub hits: Vec<u64>,
    pub mean: Matrix<f64>,
    pub stderr: Matrix<f64>,
}

impl MCEstimate {
    fn from_hits(provenance: McProvenance, rows: Vec<usize>, n: usize, hits: Vec<u64>) -> Self {
        let samples = provenance.samples as f64;
        let mean = Matrix::from_fn(rows.len(), n, |i, j| hits[i * n + j] as f64 / samples);
        let stderr = mean.map(|m| (m * (1.0 - m) / samples).max(0.0).sqrt());
        Self { provenance, rows, hits, mean, stderr }
    }

    pub fn samples(&self) -> u64 {
        self.provenance.samples
    }

    /// Full `|V| × |V|` mean. A single-root estimate is spread to every row through
    /// the translation family and then symmetrized.
    pub fn expanded_mean(&self, g: &TransitiveGraph) -> Result<Matrix<f64>> {
        self.expand(g, &self.mean)
    }

    pub fn expanded_stderr(&self, g: &TransitiveGraph) -> Result<Matrix<f64>> {
        self.expand(g, &self.stderr)
    }

    fn expand(&self, g: &TransitiveGraph, m: &Matrix<f64>) -> Result<Matrix<f64>> {
        let n = g.vertex_count();
        if m.cols() != n {
            return Err(LabError::DimensionMismatch { expected: n, found: m.cols() });
        }
        if self.rows.len() == n && self.rows.iter().enumerate().all(|(i, &r)| i == r) {
            return Ok(m.clone());
        }
        match self.rows.as_slice() {
            &[root] => expand_transitive_row(g, root, m.row(0)),
            _ => Err(LabError::InvalidParameter("cannot expand a partial multi-row estimate".into())),
        }
    }
}

/// `M(v, w) = row(φ_v⁻¹(w))` with `φ_v` the translation taking `root` to `v`, symmetrized.
pub fn expand_transitive_row(g: &TransitiveGraph, root: usize, row: &[f64]) -> Result<Matrix<f64>> {
    let n = g.vertex_count();
    if row.len() != n {
        return Err(LabError::DimensionMismatch { expected: n, found: row.len() });
    }
    let mut m = Matrix::zeros(n, n);
    for v in 0..n {
        let phi = g.translation_to(root, v);
        for w in 0..n {
            m[(v, w)] = row[phi.apply_inverse(w)];
        }
    }
    m.symmetrized()
}

/// Size-resolved estimates sharing one set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeResolvedEstimate {
    /// Estimates of `B_1..=B_{n_max}`.
    pub by_size: Vec<MCEstimate>,
    /// Estimate of `P(v ↔ w, |C(v)| > n_max)`.
    pub overflow: MCEstimate,
    /// Estimate of `B` from the same samples.
    pub total: MCEstimate,
}

/// Each edge independently open with probability `p`.
pub fn sample_configuration<R: Rng + ?Sized>(model: &PercolationModel<'_, f64>, rng: &mut R) -> EdgeConfiguration {
    let m = model.graph().edge_count();
    let mut config = EdgeConfiguration::all_closed(m);
    for e in 0..m {
        if rng.gen::<f64>() < model.p() {
            config.set(e, true);
        }
    }
    config
}

pub fn mc_two_point(model: &PercolationModel<'_, f64>, opts: McOptions) -> Result<MCEstimate> {
    let (total, _) = run(model, opts, None)?;
    Ok(total)
}

pub fn mc_size_resolved(
    model: &PercolationModel<'_, f64>,
    opts: McOptions,
    n_max: usize,
) -> Result<SizeResolvedEstimate> {
    if n_max < 1 {
        return Err(LabError::InvalidParameter("n_max must be at least 1".into()));
    }
    let (total, sized) = run(model, opts, Some(n_max))?;
    let mut sized = sized.expect("size buckets requested");
    let overflow = sized.pop().expect("overflow bucket");
    Ok(SizeResolvedEstimate { by_size: sized, overflow, total })
}

struct Tally {
    two_point: Vec<u64>,
    sized: Vec<u64>,
}

fn run(
    model: &PercolationModel<'_, f64>,
    opts: McOptions,
    n_max: Option<usize>,
) -> Result<(MCEstimate, Option<Vec<MCEstimate>>)> {
    if opts.samples < MIN_SAMPLES {
        return Err(LabError::InvalidParameter(format!(
            "at least {MIN_SAMPLES} samples required, got {}",
            opts.samples
        )));
    }
    if opts.workers == 0 {
        return Err(LabError::InvalidParameter("workers must be at least 1".into()));
    }
    let g = model.graph();
    let n = g.vertex_count();
    let rows = match opts.rows {
        RowSelection::Root(r) if r < n => vec![r],
        RowSelection::Root(r) => return Err(LabError::InvalidParameter(format!("root vertex {r} out of range"))),
        RowSelection::Full => (0..n).collect(),
    };
    let buckets = n_max.map_or(0, |m| m + 1);
    let workers = opts.workers as u64;
    let tallies = thread::scope(|s| {
        let handles = (0..workers)
            .map(|i| {
                let share = opts.samples / workers + u64::from(i < opts.samples % workers);
                let rows = &rows;
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ i);
                    sample_batch(model, &mut rng, share, rows, n_max)
                })
            })
            .collect::<Vec<_>>();
        handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect::<Vec<_>>()
    });
    let mut two_point = vec![0u64; rows.len() * n];
    let mut sized = vec![0u64; buckets * rows.len() * n];
    for t in tallies {
        two_point.iter_mut().zip(&t.two_point).for_each(|(a, b)| *a += b);
        sized.iter_mut().zip(&t.sized).for_each(|(a, b)| *a += b);
    }
    let provenance = McProvenance {
        model: model.provenance(),
        samples: opts.samples,
        seed: opts.seed,
        workers: opts.workers,
        generator: GENERATOR_NAME.to_string(),
        rows: opts.rows,
    };
    let per_bucket = rows.len() * n;
    let sized_estimates = n_max.map(|_| {
        sized
            .chunks(per_bucket)
            .map(|c| MCEstimate::from_hits(provenance.clone(), rows.clone(), n, c.to_vec()))
            .collect()
    });
    Ok((MCEstimate::from_hits(provenance, rows, n, two_point), sized_estimates))
}

fn sample_batch(
    model: &PercolationModel<'_, f64>,
    rng: &mut ChaCha8Rng,
    samples: u64,
    rows: &[usize],
    n_max: Option<usize>,
) -> Tally {
    let g = model.graph();
    let n = g.vertex_count();
    let buckets = n_max.map_or(0, |m| m + 1);
    let mut tally = Tally { two_point: vec![0; rows.len() * n], sized: vec![0; buckets * rows.len() * n] };
    let mut dsu = DisjointSets::new(n);
    let mut roots = vec![0usize; n];
    for _ in 0..samples {
        let config = sample_configuration(model, rng);
        dsu.reset();
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            if config.is_open(e) {
                dsu.union(u, v);
            }
        }
        for (v, r) in roots.iter_mut().enumerate() {
            *r = dsu.find(v);
        }
        for (i, &src) in rows.iter().enumerate() {
            let root = roots[src];
            let bucket = n_max.map(|m| (dsu.set_size(root) - 1).min(m));
            for (w, &rw) in roots.iter().enumerate() {
                if rw == root {
                    tally.two_point[i * n + w] += 1;
                    if let Some(b) = bucket {
                        tally.sized[(b * rows.len() + i) * n + w] += 1;
                    }
                }
            }
        }
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::cycle_closed_form;

    fn model(g: &TransitiveGraph, p: f64) -> PercolationModel<'_, f64> {
        PercolationModel::new(g, p).unwrap()
    }

    #[test]
    fn extreme_probabilities() {
        let g = TransitiveGraph::cycle(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_configuration(&model(&g, 0.0), &mut rng).open_count(), 0);
        assert_eq!(sample_configuration(&model(&g, 1.0), &mut rng).open_count(), 7);
        let est = mc_two_point(&model(&g, 1.0), McOptions::new(200, 3).full()).unwrap();
        assert!(est.mean.as_slice().iter().all(|&m| m == 1.0));
        assert!(est.stderr.as_slice().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sampling_is_deterministic_per_state() {
        let g = TransitiveGraph::torus(2, 4).unwrap();
        let m = model(&g, 0.4);
        let a = sample_configuration(&m, &mut ChaCha8Rng::seed_from_u64(99));
        let b = sample_configuration(&m, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn triangle_estimate() {
        let g = TransitiveGraph::complete(3).unwrap();
        let est = mc_two_point(&model(&g, 0.5), McOptions::new(1_000_000, 11).workers(4)).unwrap();
        for w in 1..3 {
            let (m, s) = (est.mean[(0, w)], est.stderr[(0, w)]);
            assert!((m - 0.625).abs() <= 4.0 * s, "mean {m} stderr {s}");
        }
        assert_eq!(est.stderr[(0, 0)], 0.0);
    }

    #[test]
    fn long_cycle_estimate() {
        let g = TransitiveGraph::cycle(64).unwrap();
        let est = mc_two_point(&model(&g, 0.3), McOptions::new(200_000, 5).workers(2)).unwrap();
        let exact = cycle_closed_form(64, 0.3, 8).unwrap();
        let (m, s) = (est.mean[(0, 8)], est.stderr[(0, 8)]);
        // exact ≈ 6.6e-5: a handful of hits, so allow the zero-hit outcome as well
        assert!((m - exact).abs() <= 4.0 * s.max((exact / 200_000.0).sqrt()));
    }

    #[test]
    fn size_resolved_partitions_every_sample() {
        let g = TransitiveGraph::cycle(8).unwrap();
        let est = mc_size_resolved(&model(&g, 0.6), McOptions::new(5_000, 8).full().workers(3), 3).unwrap();
        for idx in 0..est.total.hits.len() {
            let parts: u64 = est.by_size.iter().map(|e| e.hits[idx]).sum::<u64>() + est.overflow.hits[idx];
            assert_eq!(parts, est.total.hits[idx]);
        }
        let k2 = TransitiveGraph::complete(2).unwrap();
        let est = mc_size_resolved(&model(&k2, 0.5), McOptions::new(100_000, 1).full(), 2).unwrap();
        let (m, s) = (est.by_size[1].mean[(0, 1)], est.by_size[1].stderr[(0, 1)]);
        assert!((m - 0.5).abs() <= 4.0 * s);
        let est = mc_size_resolved(&model(&g, 0.0), McOptions::new(100, 1).full(), 2).unwrap();
        assert_eq!(est.by_size[0].mean, Matrix::identity(8));
        assert!(mc_size_resolved(&model(&g, 0.5), McOptions::new(100, 1), 0).is_err());
    }

    #[test]
    fn deterministic_given_workers() {
        let g = TransitiveGraph::torus(2, 5).unwrap();
        let opts = McOptions::new(3_000, 42).workers(3);
        let a = mc_two_point(&model(&g, 0.45), opts).unwrap();
        let b = mc_two_point(&model(&g, 0.45), opts).unwrap();
        assert_eq!(a, b);
        assert!(mc_two_point(&model(&g, 0.45), McOptions::new(99, 1)).is_err());
    }

    #[test]
    fn row_expansion_matches_full_structure() {
        let g = TransitiveGraph::cycle(5).unwrap();
        let row = [1.0, 0.4, 0.1, 0.1, 0.4];
        let m = expand_transitive_row(&g, 0, &row).unwrap();
        for v in 0..5 {
            for w in 0..5 {
                assert_eq!(m[(v, w)], row[(w + 5 - v) % 5]);
            }
        }
    }
}
