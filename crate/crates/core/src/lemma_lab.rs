//! Constructive almost-orthogonality checks and the end-to-end open-triangle argument
//! replayed on a finite graph.
//!
//! For `f` and a base vertex `v`, a finite set `A` carrying all but a
//! `δ / (3‖f‖)` sliver of the mass of `f` gives the radius `R = 2 max_{x∈A} d(v,x) + 1`.
//! Any translation moving `v` beyond `R` moves `A` off itself, so `⟨Φ f_loc, f_loc⟩ = 0`
//! and `|⟨Φf, f⟩| < δ`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exact::{SizeResolvedFamily, TwoPointMatrix};
use crate::graphs::{Automorphism, TransitiveGraph, VertexVector};
use crate::operators::{default_psd_tol, SpectralChain};
use crate::scalar::{compensated_sum, Compensated, Scalar};

/// Outcome of a check that can be empty on a small graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No vertex lies outside the ball; nothing was tested.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationWitness<T> {
    pub base: usize,
    pub delta: T,
    /// `A`, in the greedy order it was built (descending `|f|`, ties by index).
    pub support: Vec<usize>,
    pub radius: usize,
    /// `‖f_glob‖`.
    pub tail_norm: T,
    /// `δ / (3‖f‖)`.
    pub tail_bound: T,
    pub f_loc: VertexVector<T>,
    pub f_glob: VertexVector<T>,
}

impl<T: Scalar> LocalizationWitness<T> {
    pub fn contains(&self, x: usize) -> bool {
        self.support.contains(&x)
    }

    /// Exact re-check of the witness invariants against `f`.
    pub fn check(&self, g: &TransitiveGraph, f: &VertexVector<T>) -> bool {
        let n = f.len();
        let mut in_a = vec![false; n];
        for &x in &self.support {
            in_a[x] = true;
        }
        let split = (0..n).all(|i| self.f_loc[i] + self.f_glob[i] == f[i]);
        let loc_vanishes = (0..n).all(|i| in_a[i] || self.f_loc[i].is_zero());
        let glob_vanishes = (0..n).all(|i| !in_a[i] || self.f_glob[i].is_zero());
        let radius = 2 * self.support.iter().map(|&x| g.distance(self.base, x)).max().unwrap_or(0) + 1;
        split
            && loc_vanishes
            && glob_vanishes
            && self.tail_norm < self.tail_bound
            && self.f_glob.norm() == self.tail_norm
            && radius == self.radius
    }
}

/// Builds `A` as the shortest nonempty prefix of vertices sorted by descending `|f|`
/// (ties by index) with `‖f · 1_{Aᶜ}‖ < δ / (3‖f‖)`.
pub fn localization_radius<T: Scalar>(
    g: &TransitiveGraph,
    f: &VertexVector<T>,
    v: usize,
    delta: T,
) -> Result<LocalizationWitness<T>> {
    let n = g.vertex_count();
    if f.len() != n {
        return Err(LabError::DimensionMismatch { expected: n, found: f.len() });
    }
    if delta <= T::zero() || !delta.is_finite() {
        return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if f.is_zero() {
        return Err(LabError::ZeroVector);
    }
    let tail_bound = delta / (T::lit(3.0) * f.norm());
    let mut order = (0..n).collect::<Vec<_>>();
    order.sort_by(|&a, &b| f[b].abs().partial_cmp(&f[a].abs()).expect("finite entries").then(a.cmp(&b)));
    // suffix[k] = Σ_{i ≥ k} f(order[i])², accumulated from the small end.
    let mut suffix = vec![T::zero(); n + 1];
    let mut acc = Compensated::new();
    for k in (0..n).rev() {
        let x = f[order[k]];
        acc.add(x * x);
        suffix[k] = acc.value();
    }
    let mut k = (1..=n).find(|&k| suffix[k].sqrt() < tail_bound).unwrap_or(n);
    loop {
        let (f_loc, f_glob) = split(f, &order[..k]);
        let tail_norm = f_glob.norm();
        if tail_norm < tail_bound || k == n {
            let support = order[..k].to_vec();
            let radius = 2 * support.iter().map(|&x| g.distance(v, x)).max().unwrap_or(0) + 1;
            return Ok(LocalizationWitness { base: v, delta, support, radius, tail_norm, tail_bound, f_loc, f_glob });
        }
        k += 1;
    }
}

fn split<T: Scalar>(f: &VertexVector<T>, support: &[usize]) -> (VertexVector<T>, VertexVector<T>) {
    let mut loc = vec![T::zero(); f.len()];
    let mut glob = f.as_slice().to_vec();
    for &x in support {
        loc[x] = f[x];
        glob[x] = T::zero();
    }
    (VertexVector::from_vec(loc).expect("finite"), VertexVector::from_vec(glob).expect("finite"))
}

/// `⟨Φ_φ f, f⟩ = Σ_v f(φ⁻¹(v)) f(v)`.
pub fn overlap<T: Scalar>(f: &VertexVector<T>, phi: &Automorphism) -> T {
    compensated_sum((0..f.len()).map(|v| f[phi.apply_inverse(v)] * f[v]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub base: usize,
    pub delta: f64,
    pub norm_squared: f64,
    pub support_size: usize,
    pub radius: usize,
    pub tail_norm: f64,
    pub tail_bound: f64,
    pub far_vertices: usize,
    /// Every far translation moves `A` off itself.
    pub separated: bool,
    /// `d(φ(x), w) = d(x, v)` and `d(φ(x), v) > R/2` for every `x ∈ A`.
    pub distance_chain: bool,
    /// `⟨Φ f_loc, f_loc⟩` is exactly zero for every far translation.
    pub local_overlap_zero: bool,
    /// `|⟨Φf,f⟩| ≤ |⟨Φf_loc,f_loc⟩| + 2‖f_glob‖‖f_loc‖ + ‖f_glob‖²` for every far translation.
    pub split_bound: bool,
    pub worst_overlap: Option<f64>,
    pub worst_vertex: Option<usize>,
    /// `δ ≥ ‖f‖²` makes the bound automatic.
    pub uninformative: bool,
    pub verdict: Verdict,
}

/// Checks the overlap bound for every `w ∉ B(v, R)` with `φ = translation_to(v, w)`.
pub fn verify_lemma<T: Scalar>(g: &TransitiveGraph, f: &VertexVector<T>, v: usize, delta: T) -> Result<LemmaReport> {
    let witness = localization_radius(g, f, v, delta)?;
    Ok(check_far_translations(g, f, &witness))
}

fn check_far_translations<T: Scalar>(
    g: &TransitiveGraph,
    f: &VertexVector<T>,
    witness: &LocalizationWitness<T>,
) -> LemmaReport {
    let v = witness.base;
    let n = g.vertex_count();
    let mut in_a = vec![false; n];
    for &x in &witness.support {
        in_a[x] = true;
    }
    let loc_norm = witness.f_loc.norm();
    let glob_norm = witness.tail_norm;
    let norm_sq = f.dot(f);
    let far = g.outside_ball(v, witness.radius);
    let mut separated = true;
    let mut chain = true;
    let mut local_zero = true;
    let mut split_ok = true;
    let mut within = true;
    let mut worst: Option<(T, usize)> = None;
    for &w in &far {
        let phi = g.translation_to(v, w);
        for &x in &witness.support {
            let image = phi.apply(x);
            separated &= !in_a[image];
            chain &= g.distance(image, w) == g.distance(x, v) && 2 * g.distance(image, v) > witness.radius;
        }
        let loc = overlap(&witness.f_loc, &phi);
        local_zero &= loc == T::zero();
        let full = overlap(f, &phi).abs();
        let bound = loc.abs() + T::lit(2.0) * glob_norm * loc_norm + glob_norm * glob_norm;
        split_ok &= full <= bound + T::lit(1e-12) * T::one().max(norm_sq);
        within &= full < witness.delta;
        if worst.is_none_or(|(x, _)| full > x) {
            worst = Some((full, w));
        }
    }
    let verdict = if far.is_empty() {
        Verdict::Vacuous
    } else if separated && chain && local_zero && split_ok && within {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    LemmaReport {
        base: v,
        delta: witness.delta.to_f64_lossy(),
        norm_squared: norm_sq.to_f64_lossy(),
        support_size: witness.support.len(),
        radius: witness.radius,
        tail_norm: witness.tail_norm.to_f64_lossy(),
        tail_bound: witness.tail_bound.to_f64_lossy(),
        far_vertices: far.len(),
        separated,
        distance_chain: chain,
        local_overlap_zero: local_zero,
        split_bound: split_ok,
        worst_overlap: worst.map(|(x, _)| x.to_f64_lossy()),
        worst_vertex: worst.map(|(_, w)| w),
        uninformative: witness.delta >= norm_sq,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStage {
    pub n: usize,
    /// `‖S_n B 1_v‖`.
    pub norm: f64,
    /// `R_n`, or 0 when `S_n B 1_v` vanishes.
    pub radius: usize,
    pub lemma: Option<LemmaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub base: usize,
    pub epsilon: f64,
    pub q_vv: f64,
    /// `Σ_n ‖S_n B 1_v‖²` over the whole family.
    pub series_total: f64,
    #[serde(rename = "N")]
    pub n_cut: usize,
    /// `Σ_{n>N} ‖S_n B 1_v‖²`.
    pub tail_after_cut: f64,
    /// `ε / 2N`; absent when `N = 0`.
    pub delta: Option<f64>,
    pub stages: Vec<PipelineStage>,
    #[serde(rename = "R")]
    pub radius: usize,
    pub far_vertices: usize,
    pub worst_far_vertex: Option<usize>,
    pub worst_q: Option<f64>,
    /// `Σ_{n≤N} ⟨S_n B 1_v, S_n B 1_w⟩ ≤ ε/2` for every far `w`.
    pub head_bound: bool,
    pub verdict: Verdict,
}

pub fn proof_pipeline<T: Scalar>(
    g: &TransitiveGraph,
    b: &TwoPointMatrix<T>,
    family: &SizeResolvedFamily<T>,
    v: usize,
    epsilon: T,
) -> Result<PipelineReport> {
    let chain = SpectralChain::new(b, family, default_psd_tol())?;
    proof_pipeline_with_chain(g, &chain, v, epsilon)
}

/// Picks `N` from the tail of `Σ_n ‖S_n B 1_v‖²`, builds `R_n` for `n ≤ N` with
/// `δ = ε / 2N`, and checks `Q(v, w) ≤ ε` for every `w ∉ B(v, max R_n)`.
///
/// `N` is the smallest cut with tail below `ε/2`, so `N = 0` when the whole series
/// already is; then the head sum is empty and `R = 0`.
pub fn proof_pipeline_with_chain<T: Scalar>(
    g: &TransitiveGraph,
    chain: &SpectralChain<T>,
    v: usize,
    epsilon: T,
) -> Result<PipelineReport> {
    let n_vertices = g.vertex_count();
    if chain.q().dim() != n_vertices {
        return Err(LabError::DimensionMismatch { expected: n_vertices, found: chain.q().dim() });
    }
    let q_vv = chain.q().get(v, v);
    let floor = T::lit(1e-8) * T::one().max(q_vv);
    if epsilon.is_nan() || epsilon <= floor {
        return Err(LabError::Refused(format!("epsilon {epsilon} is below the numerical residual floor {floor:e}")));
    }
    let family_len = chain.family_len();
    let terms = (1..=family_len).map(|n| chain.term(n, v, v)).collect::<Vec<_>>();
    let total = compensated_sum(terms.iter().copied());
    if (total - q_vv).abs() > floor {
        return Err(LabError::Refused(format!(
            "Σ_n ‖S_n B 1_v‖² = {total} differs from Q(v,v) = {q_vv}; the family does not resolve B"
        )));
    }
    // tails[k] = Σ_{n > k} terms
    let mut tails = vec![T::zero(); family_len + 1];
    let mut acc = Compensated::new();
    for k in (0..family_len).rev() {
        acc.add(terms[k]);
        tails[k] = acc.value();
    }
    let half = epsilon * T::lit(0.5);
    let n_cut = (0..=family_len).find(|&k| tails[k] < half).expect("empty tail is below ε/2");
    let delta = (n_cut > 0).then(|| epsilon / T::from_count(2 * n_cut as u64));
    let mut stages = Vec::with_capacity(n_cut);
    for n in 1..=n_cut {
        let image = VertexVector::from_vec(chain.image(n, v))?;
        let norm = image.norm();
        let (radius, lemma) = if image.is_zero() {
            (0, None)
        } else {
            let witness = localization_radius(g, &image, v, delta.expect("N > 0"))?;
            let report = check_far_translations(g, &image, &witness);
            (witness.radius, Some(report))
        };
        stages.push(PipelineStage { n, norm: norm.to_f64_lossy(), radius, lemma });
    }
    let radius = stages.iter().map(|s| s.radius).max().unwrap_or(0);
    let far = g.outside_ball(v, radius);
    let mut worst: Option<(T, usize)> = None;
    let mut head_ok = true;
    let rounding = T::lit(1e-12) * T::one().max(q_vv);
    for &w in &far {
        let q = chain.q().get(v, w);
        if worst.is_none_or(|(x, _)| q > x) {
            worst = Some((q, w));
        }
        let head = compensated_sum((1..=n_cut).map(|n| chain.term(n, v, w)));
        head_ok &= head <= half + rounding;
    }
    let lemmas_ok = stages.iter().filter_map(|s| s.lemma.as_ref()).all(|r| r.verdict != Verdict::Fail);
    let verdict = match worst {
        None => Verdict::Vacuous,
        Some((q, _)) if q <= epsilon && head_ok && lemmas_ok => Verdict::Pass,
        Some(_) => Verdict::Fail,
    };
    Ok(PipelineReport {
        base: v,
        epsilon: epsilon.to_f64_lossy(),
        q_vv: q_vv.to_f64_lossy(),
        series_total: total.to_f64_lossy(),
        n_cut,
        tail_after_cut: tails[n_cut].to_f64_lossy(),
        delta: delta.map(|d| d.to_f64_lossy()),
        stages,
        radius,
        far_vertices: far.len(),
        worst_far_vertex: worst.map(|(_, w)| w),
        worst_q: worst.map(|(q, _)| q.to_f64_lossy()),
        head_bound: head_ok,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{cycle_size_resolved, cycle_two_point};

    #[test]
    fn indicator_witness() {
        let g = TransitiveGraph::cycle(9).unwrap();
        for delta in [1e-6, 0.3, 50.0] {
            let w = localization_radius(&g, &VertexVector::<f64>::indicator(9, 4), 4, delta).unwrap();
            assert_eq!(w.support, vec![4]);
            assert_eq!(w.tail_norm, 0.0);
            assert_eq!(w.radius, 1);
            assert!(w.check(&g, &VertexVector::indicator(9, 4)));
        }
        assert!(matches!(localization_radius(&g, &VertexVector::<f64>::zeros(9), 0, 0.1), Err(LabError::ZeroVector)));
        assert!(localization_radius(&g, &VertexVector::<f64>::indicator(9, 0), 0, 0.0).is_err());
    }

    #[test]
    fn ball_supported_witness() {
        let g = TransitiveGraph::cycle(20).unwrap();
        let mut vals = vec![0.0; 20];
        for (x, val) in [(18, 0.2), (19, 0.5), (0, 1.0), (1, 0.5), (2, 0.2)] {
            vals[x] = val;
        }
        let f = VertexVector::from_vec(vals).unwrap();
        let w = localization_radius(&g, &f, 0, 1e-3).unwrap();
        let mut a = w.support.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2, 18, 19]);
        assert_eq!(w.radius, 5);
    }

    #[test]
    fn overlap_examples() {
        let g = TransitiveGraph::cycle(10).unwrap();
        let f = VertexVector::from_vec((0..10).map(|i| 1.0 / (1.0 + i as f64)).collect()).unwrap();
        assert!((overlap(&f, &g.translation_to(3, 3)) - f.dot(&f)).abs() < 1e-15);
        assert_eq!(overlap(&VertexVector::<f64>::indicator(10, 2), &g.translation_to(2, 5)), 0.0);
        let mut two = vec![0.0; 10];
        two[0] = 1.0;
        two[1] = 1.0;
        let two = VertexVector::from_vec(two).unwrap();
        assert_eq!(overlap(&two, &g.translation_to(0, 1)), 1.0);
    }

    #[test]
    fn lemma_on_indicator() {
        let g = TransitiveGraph::cycle(50).unwrap();
        let r = verify_lemma(&g, &VertexVector::<f64>::indicator(50, 0), 0, 0.5).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.worst_overlap, Some(0.0));
        assert_eq!(r.far_vertices, 47);
        assert!(!r.uninformative);
        let r = verify_lemma(&g, &VertexVector::<f64>::indicator(50, 0), 0, 2.0).unwrap();
        assert!(r.uninformative);
    }

    #[test]
    fn lemma_vacuous_on_small_graph() {
        let g = TransitiveGraph::cycle(5).unwrap();
        let f = VertexVector::from_vec(vec![1.0, 0.5, 0.25, 0.25, 0.5]).unwrap();
        let r = verify_lemma(&g, &f, 0, 1e-4).unwrap();
        assert_eq!(r.verdict, Verdict::Vacuous);
    }

    #[test]
    fn pipeline_at_p_zero() {
        let g = TransitiveGraph::cycle(12).unwrap();
        let b = cycle_two_point(12, 0.0f64).unwrap();
        let fam = cycle_size_resolved(12, 0.0f64).unwrap();
        let r = proof_pipeline(&g, &b, &fam, 0, 0.5).unwrap();
        assert_eq!((r.n_cut, r.radius), (1, 1));
        assert_eq!(r.worst_q, Some(0.0));
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn pipeline_with_large_epsilon() {
        let g = TransitiveGraph::cycle(12).unwrap();
        let b = cycle_two_point(12, 0.3f64).unwrap();
        let fam = cycle_size_resolved(12, 0.3f64).unwrap();
        let q_vv = crate::operators::triangle_value(b.matrix(), 0).unwrap();
        let r = proof_pipeline(&g, &b, &fam, 0, q_vv * 2.01).unwrap();
        assert_eq!((r.n_cut, r.radius, r.delta), (0, 0, None));
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(matches!(proof_pipeline(&g, &b, &fam, 0, 1e-10), Err(LabError::Refused(_))));
    }
}
