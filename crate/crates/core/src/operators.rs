//! Triangle diagrams, symmetric eigensolver, PSD square roots and the identities
//! linking `Q = B³` to the size-resolved square roots `S_n = √B_n`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exact::{SizeResolvedFamily, TwoPointMatrix};
use crate::graphs::{Automorphism, TransitiveGraph};
use crate::matrix::Matrix;
use crate::scalar::{compensated_sum, dot, Compensated, Scalar};

pub const MAX_SWEEPS: usize = 100;

/// Dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> SymmetricOperator<T> {
    /// Accepts `m` if it is square, finite and symmetric to `tol` relative to its largest entry.
    pub fn new(m: Matrix<T>, tol: T) -> Result<Self> {
        if !m.is_square() {
            return Err(LabError::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        if !m.all_finite() {
            return Err(LabError::InvalidParameter("matrix has non-finite entries".into()));
        }
        let asym = m.asymmetry().unwrap_or(T::zero());
        if asym > tol * T::one().max(m.max_abs()) {
            return Err(LabError::NotSymmetric { asymmetry: asym.to_f64_lossy() });
        }
        Ok(Self { matrix: m })
    }

    /// Symmetric by construction, e.g. the output of the eigensolver's reassembly.
    fn trusted(matrix: Matrix<T>) -> Self {
        Self { matrix }
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

    pub fn get(&self, i: usize, j: usize) -> T {
        self.matrix[(i, j)]
    }
}

fn symmetry_tol<T: Scalar>() -> T {
    T::lit(1e-14).max(T::epsilon() * T::lit(16.0))
}

impl<T: Scalar> TryFrom<Matrix<T>> for SymmetricOperator<T> {
    type Error = LabError;

    fn try_from(m: Matrix<T>) -> Result<Self> {
        Self::new(m, symmetry_tol())
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
    pub sweeps: usize,
}

impl<T: Scalar> EigenDecomposition<T> {
    /// `V f(Λ) Vᵀ`.
    pub fn reassemble(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fl = self.eigenvalues.iter().map(|&l| f(l)).collect::<Vec<_>>();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = compensated_sum((0..n).map(|k| v[(i, k)] * fl[k] * v[(j, k)]));
                out[(i, j)] = x;
                out[(j, i)] = x;
            }
        }
        out
    }

    /// `‖M − VΛVᵀ‖_F`.
    pub fn reconstruction_residual(&self, m: &Matrix<T>) -> T {
        m.sub(&self.reassemble(|l| l)).expect("same shape").frobenius_norm()
    }

    /// `‖VᵀV − I‖_F`.
    pub fn orthonormality_residual(&self) -> T {
        let v = &self.eigenvectors;
        let gram = v.transpose().matmul(v).expect("square");
        gram.sub(&Matrix::identity(v.rows())).expect("same shape").frobenius_norm()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or(T::zero())
    }
}

/// Cyclic Jacobi: sweeps of plane rotations until the off-diagonal Frobenius mass is at
/// most `tol · ‖M‖_F`, at most [`MAX_SWEEPS`] sweeps.
pub fn symmetric_eigen<T: Scalar>(m: &SymmetricOperator<T>, tol: T) -> Result<EigenDecomposition<T>> {
    let n = m.dim();
    let mut a = m.matrix().clone();
    let mut v = Matrix::identity(n);
    let threshold = tol * m.matrix().frobenius_norm();
    let off_diagonal = |a: &Matrix<T>| {
        let mut acc = Compensated::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc.add(a[(i, j)] * a[(i, j)]);
                }
            }
        }
        acc.value().sqrt()
    };
    let two = T::lit(2.0);
    let mut sweeps = 0;
    loop {
        let off = off_diagonal(&a);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(LabError::NotConverged { sweeps, residual: off.to_f64_lossy() });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = if theta.abs() > T::max_value().sqrt() {
                    T::one() / (two * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order = (0..n).collect::<Vec<_>>();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite eigenvalues").then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors, sweeps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdVerdict {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

fn psd_floor<T: Scalar>(m: &Matrix<T>, tol: T) -> T {
    tol * T::one().max(m.frobenius_norm())
}

/// PSD iff `λ_min ≥ −tol · max(1, ‖M‖_F)`.
pub fn is_psd<T: Scalar>(m: &SymmetricOperator<T>, tol: T) -> Result<PsdVerdict> {
    let eig = symmetric_eigen(m, T::default_solver_tol())?;
    let lmin = eig.min_eigenvalue();
    Ok(PsdVerdict { is_psd: lmin >= -psd_floor(m.matrix(), tol), min_eigenvalue: lmin.to_f64_lossy() })
}

/// `V diag(√max(λ, 0)) Vᵀ`; eigenvalues below `−tol · max(1, ‖M‖_F)` are refused.
pub fn sqrt_psd<T: Scalar>(m: &SymmetricOperator<T>, tol: T) -> Result<SymmetricOperator<T>> {
    let eig = symmetric_eigen(m, T::default_solver_tol())?;
    let lmin = eig.min_eigenvalue();
    if lmin < -psd_floor(m.matrix(), tol) {
        return Err(LabError::NotPsd { min_eigenvalue: lmin.to_f64_lossy() });
    }
    Ok(SymmetricOperator::trusted(eig.reassemble(|l| l.max(T::zero()).sqrt())))
}

/// Default tolerance for PSD verdicts and square roots.
pub fn default_psd_tol<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
}

/// `Q = B · B · B`, symmetrized against rounding.
pub fn triangle_diagram<T: Scalar>(b: &Matrix<T>) -> Result<SymmetricOperator<T>> {
    if !b.is_square() {
        return Err(LabError::NotSquare { rows: b.rows(), cols: b.cols() });
    }
    let q = b.matmul(b)?.matmul(b)?;
    Ok(SymmetricOperator::trusted(q.symmetrized()?))
}

/// `Q(v,v) = Σ_{x,y} B(v,x) B(x,y) B(y,v)`.
pub fn triangle_value<T: Scalar>(b: &Matrix<T>, v: usize) -> Result<T> {
    if !b.is_square() {
        return Err(LabError::NotSquare { rows: b.rows(), cols: b.cols() });
    }
    let col = b.column(v);
    let bcol = b.mul_vec(&col)?;
    Ok(dot(&col, &bcol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenTriangleProfile {
    pub base: usize,
    /// `(R, max_{w ∉ B(v,R)} Q(v,w), argmax)` for every radius with a nonempty complement.
    pub points: Vec<ProfilePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub radius: usize,
    pub value: f64,
    pub argmax: usize,
}

impl OpenTriangleProfile {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// `max_{w ∉ B(v,R)} Q(v,w)` for `R = 0..diameter`; ties go to the smaller vertex index.
pub fn open_triangle_profile<T: Scalar>(
    g: &TransitiveGraph,
    q: &SymmetricOperator<T>,
    v: usize,
) -> Result<OpenTriangleProfile> {
    let n = g.vertex_count();
    if q.dim() != n {
        return Err(LabError::DimensionMismatch { expected: n, found: q.dim() });
    }
    let diameter = (0..n).map(|w| g.distance(v, w)).max().unwrap_or(0);
    // best[r] = max over vertices at distance exactly r; suffix maxima give the profile.
    let mut best: Vec<Option<(T, usize)>> = vec![None; diameter + 1];
    for w in 0..n {
        let r = g.distance(v, w);
        let x = q.get(v, w);
        match best[r] {
            Some((b, _)) if b >= x => {}
            _ => best[r] = Some((x, w)),
        }
    }
    let mut points = Vec::with_capacity(diameter);
    let mut running: Option<(T, usize)> = None;
    for r in (1..=diameter).rev() {
        if let Some((x, w)) = best[r] {
            running = match running {
                Some((y, u)) if y > x || (y == x && u < w) => Some((y, u)),
                _ => Some((x, w)),
            };
        }
        let (x, w) = running.expect("distance shell at the diameter is nonempty");
        points.push(ProfilePoint { radius: r - 1, value: x.to_f64_lossy(), argmax: w });
    }
    points.reverse();
    Ok(OpenTriangleProfile { base: v, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Max entrywise `|B − Σ_n B_n|`.
pub fn verify_decomposition<T: Scalar>(
    b: &TwoPointMatrix<T>,
    family: &SizeResolvedFamily<T>,
    tol: f64,
) -> Result<DecompositionReport> {
    if family.dim() != b.dim() {
        return Err(LabError::DimensionMismatch { expected: b.dim(), found: family.dim() });
    }
    let residual = b.matrix().max_abs_diff(&family.sum())?.to_f64_lossy();
    Ok(DecompositionReport { max_residual: residual, tolerance: tol, pass: residual <= tol })
}

/// The vectors `S_n B 1_v` for every `n` and `v`, with `S_n = √B_n`.
#[derive(Debug, Clone)]
pub struct SpectralChain<T> {
    q: SymmetricOperator<T>,
    roots: Vec<SymmetricOperator<T>>,
    /// Column `v` of entry `n-1` is `S_n B 1_v`.
    images: Vec<Matrix<T>>,
    /// Column `v` of entry `n-1` is `B_n B 1_v`.
    direct: Vec<Matrix<T>>,
    b: Matrix<T>,
    min_eigenvalues: Vec<f64>,
}

impl<T: Scalar> SpectralChain<T> {
    /// Fails with [`LabError::NotPsd`] if some `B_n` is not PSD within `psd_tol`.
    pub fn new(b: &TwoPointMatrix<T>, family: &SizeResolvedFamily<T>, psd_tol: T) -> Result<Self> {
        if family.dim() != b.dim() {
            return Err(LabError::DimensionMismatch { expected: b.dim(), found: family.dim() });
        }
        let bm = b.matrix().clone();
        let q = triangle_diagram(&bm)?;
        let mut roots = Vec::with_capacity(family.len());
        let mut images = Vec::with_capacity(family.len());
        let mut direct = Vec::with_capacity(family.len());
        let mut min_eigenvalues = Vec::with_capacity(family.len());
        for (_, bn) in family.iter() {
            let op = SymmetricOperator::new(bn.clone(), symmetry_tol())?;
            let eig = symmetric_eigen(&op, T::default_solver_tol())?;
            let lmin = eig.min_eigenvalue();
            if lmin < -psd_floor(bn, psd_tol) {
                return Err(LabError::NotPsd { min_eigenvalue: lmin.to_f64_lossy() });
            }
            let s = SymmetricOperator::trusted(eig.reassemble(|l| l.max(T::zero()).sqrt()));
            images.push(s.matrix().matmul(&bm)?);
            direct.push(bn.matmul(&bm)?);
            roots.push(s);
            min_eigenvalues.push(lmin.to_f64_lossy());
        }
        Ok(Self { q, roots, images, direct, b: bm, min_eigenvalues })
    }

    pub fn q(&self) -> &SymmetricOperator<T> {
        &self.q
    }

    pub fn roots(&self) -> &[SymmetricOperator<T>] {
        &self.roots
    }

    pub fn family_len(&self) -> usize {
        self.roots.len()
    }

    pub fn min_eigenvalues(&self) -> &[f64] {
        &self.min_eigenvalues
    }

    /// `S_n B 1_v`.
    pub fn image(&self, n: usize, v: usize) -> Vec<T> {
        self.images[n - 1].column(v)
    }

    /// `⟨S_n B 1_v, S_n B 1_w⟩`.
    pub fn term(&self, n: usize, v: usize, w: usize) -> T {
        dot(&self.image(n, v), &self.image(n, w))
    }

    /// `⟨B_n B 1_v, B 1_w⟩`.
    pub fn direct_term(&self, n: usize, v: usize, w: usize) -> T {
        dot(&self.direct[n - 1].column(v), &self.b.column(w))
    }

    pub fn norm(&self, n: usize, v: usize) -> T {
        self.term(n, v, v).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralIdentityReport {
    pub v: usize,
    pub w: usize,
    pub q: f64,
    /// `Σ_n ⟨S_n B 1_v, S_n B 1_w⟩`.
    pub root_sum: f64,
    /// `Σ_n ⟨B_n B 1_v, B 1_w⟩`.
    pub direct_sum: f64,
    /// `|Q − root_sum| / max(1, |Q|)`.
    pub relative_error: f64,
    pub direct_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_spectral_identity<T: Scalar>(
    chain: &SpectralChain<T>,
    v: usize,
    w: usize,
    tol: f64,
) -> SpectralIdentityReport {
    let q = chain.q().get(v, w);
    let root_sum = compensated_sum((1..=chain.family_len()).map(|n| chain.term(n, v, w)));
    let direct_sum = compensated_sum((1..=chain.family_len()).map(|n| chain.direct_term(n, v, w)));
    let scale = T::one().max(q.abs());
    let relative_error = ((q - root_sum).abs() / scale).to_f64_lossy();
    let direct_relative_error = ((q - direct_sum).abs() / scale).to_f64_lossy();
    SpectralIdentityReport {
        v,
        w,
        q: q.to_f64_lossy(),
        root_sum: root_sum.to_f64_lossy(),
        direct_sum: direct_sum.to_f64_lossy(),
        relative_error,
        direct_relative_error,
        tolerance: tol,
        pass: relative_error <= tol && direct_relative_error <= tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub v: usize,
    pub w: usize,
    pub n_cut: usize,
    /// `Σ_{n>N} ⟨S_n B 1_v, S_n B 1_w⟩`.
    pub tail_inner: f64,
    /// `Σ_{n>N} ‖S_n B 1_v‖ ‖S_n B 1_w‖`.
    pub tail_cauchy_schwarz: f64,
    /// `Σ_{n>N} ‖S_n B 1_v‖²`.
    pub tail_squared_norm: f64,
    pub slack: f64,
    pub inequality_holds: bool,
    pub norms_agree: bool,
}

/// Checks the tail bound `Σ_{n>N} ⟨S_n B 1_v, S_n B 1_w⟩ ≤ Σ_{n>N} ‖S_n B 1_v‖²`.
pub fn tail_bound_check<T: Scalar>(chain: &SpectralChain<T>, v: usize, w: usize, n_cut: usize) -> TailBoundReport {
    let tail = (n_cut + 1)..=chain.family_len();
    let inner = compensated_sum(tail.clone().map(|n| chain.term(n, v, w)));
    let cs = compensated_sum(tail.clone().map(|n| chain.norm(n, v) * chain.norm(n, w)));
    let sq = compensated_sum(tail.map(|n| chain.term(n, v, v)));
    let rounding = T::lit(1e-12) * T::one().max(cs);
    let agree_tol = T::lit(1e-8) * T::one().max(sq);
    TailBoundReport {
        v,
        w,
        n_cut,
        tail_inner: inner.to_f64_lossy(),
        tail_cauchy_schwarz: cs.to_f64_lossy(),
        tail_squared_norm: sq.to_f64_lossy(),
        slack: (cs - inner).to_f64_lossy(),
        inequality_holds: inner <= cs + rounding,
        norms_agree: (cs - sq).abs() <= agree_tol,
    }
}

/// Partial sums of `Σ_n ‖S_n B 1_v‖²`.
pub fn triangle_finiteness_series<T: Scalar>(chain: &SpectralChain<T>, v: usize) -> Vec<T> {
    let mut acc = Compensated::new();
    (1..=chain.family_len())
        .map(|n| {
            acc.add(chain.term(n, v, v));
            acc.value()
        })
        .collect()
}

/// `‖S P_φ − P_φ S‖_F` where `P_φ 1_u = 1_{φ(u)}`.
pub fn commutation_defect<T: Scalar>(s: &SymmetricOperator<T>, phi: &Automorphism) -> Result<T> {
    let n = s.dim();
    if phi.len() != n {
        return Err(LabError::DimensionMismatch { expected: n, found: phi.len() });
    }
    let mut acc = Compensated::new();
    for i in 0..n {
        for j in 0..n {
            let d = s.get(i, phi.apply(j)) - s.get(phi.apply_inverse(i), j);
            acc.add(d * d);
        }
    }
    Ok(acc.value().sqrt())
}
