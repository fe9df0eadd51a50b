//! Radial power-law surrogates for lattice sums with a `|x|^(2-d)` two-point kernel.
//!
//! A lattice sum `Σ_{x∈ℤ^d} g(|x|)` is replaced by the shell sum `Σ_r r^(d-1) g(r)`.
//! With `f(r) ≍ r^(2-d)` and `(f*f)(r) ≍ r^(4-d)` the diagonal triangle has shell
//! exponent `5 - d`; with `Q(v,w) ≍ |v-w|^(6-d)` (valid for `d > 6`) the squared
//! row norm of `Q` has shell exponent `11 - d`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Compensated;

/// Default cutoffs `10², 10³, …, 10⁷`.
pub const DEFAULT_CUTOFFS: [u64; 6] = [100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000];
pub const CONVERGENT_SLOPE: f64 = 0.05;
pub const LOG_INCREMENT_TOLERANCE: f64 = 0.2;
pub const DEFAULT_BOX_BUDGET: u64 = 4_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSeries {
    pub exponent: f64,
    pub cutoffs: Vec<u64>,
    /// `Σ_{r=1}^{R} r^e` for each cutoff `R`.
    pub partial_sums: Vec<f64>,
}

pub fn radial_partial_sums(exponent: f64, cutoffs: &[u64]) -> Result<RadialSeries> {
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidParameter("cutoffs must be strictly increasing".into()));
    }
    let mut acc = Compensated::new();
    let mut r = 0u64;
    let partial_sums = cutoffs
        .iter()
        .map(|&cut| {
            while r < cut {
                r += 1;
                acc.add(shell_term(r, exponent));
            }
            acc.value()
        })
        .collect();
    Ok(RadialSeries { exponent, cutoffs: cutoffs.to_vec(), partial_sums })
}

#[inline]
fn shell_term(r: u64, exponent: f64) -> f64 {
    let x = r as f64;
    if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
        x.powi(exponent as i32)
    } else {
        x.powf(exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceClass {
    Convergent,
    DivergentLog,
    DivergentPoly,
}

impl ConvergenceClass {
    pub fn is_convergent(self) -> bool {
        self == ConvergenceClass::Convergent
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConvergenceClass::Convergent => "convergent",
            ConvergenceClass::DivergentLog => "divergent_log",
            ConvergenceClass::DivergentPoly => "divergent_poly",
        }
    }
}

impl std::str::FromStr for ConvergenceClass {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergent" => Ok(Self::Convergent),
            "divergent_log" => Ok(Self::DivergentLog),
            "divergent_poly" => Ok(Self::DivergentPoly),
            _ => Err(LabError::InvalidParameter(format!("unknown verdict {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub class: ConvergenceClass,
    /// Least-squares slope of `ln S(R)` against `ln R` over the last two decades.
    pub slope: f64,
    /// Last decade increment divided by the one before it.
    pub increment_ratio: f64,
    pub series: RadialSeries,
}

/// Slope `≤ 0.05` is convergent; otherwise decade increments within 20% of each other
/// mean logarithmic growth, anything else polynomial.
pub fn classify_convergence(series: &RadialSeries) -> Result<ConvergenceVerdict> {
    let m = series.cutoffs.len();
    if m < 3 {
        return Err(LabError::InvalidParameter(format!("need at least 3 cutoffs, got {m}")));
    }
    let last_r = series.cutoffs[m - 1] as f64;
    let window = (0..m).filter(|&i| series.cutoffs[i] as f64 * 100.0 >= last_r * (1.0 - 1e-12)).collect::<Vec<_>>();
    let window = if window.len() >= 2 { window } else { vec![m - 2, m - 1] };
    let xs = window.iter().map(|&i| (series.cutoffs[i] as f64).ln()).collect::<Vec<_>>();
    let ys = window.iter().map(|&i| series.partial_sums[i].ln()).collect::<Vec<_>>();
    let slope = least_squares_slope(&xs, &ys);
    let s = &series.partial_sums;
    let increment_ratio = (s[m - 1] - s[m - 2]) / (s[m - 2] - s[m - 3]);
    let class = if slope <= CONVERGENT_SLOPE {
        ConvergenceClass::Convergent
    } else if (increment_ratio - 1.0).abs() <= LOG_INCREMENT_TOLERANCE {
        ConvergenceClass::DivergentLog
    } else {
        ConvergenceClass::DivergentPoly
    };
    Ok(ConvergenceVerdict { class, slope, increment_ratio, series: series.clone() })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Shell exponent `5 - d` of the diagonal triangle.
pub fn triangle_exponent(d: u32) -> f64 {
    5.0 - f64::from(d)
}

/// Shell exponent `11 - d` of `‖Q 1_v‖²`, defined for `d > 6`.
pub fn l2_exponent(d: u32) -> Result<f64> {
    if d <= 6 {
        return Err(LabError::Refused(format!("Q has no power-law row below dimension 7 (d = {d})")));
    }
    Ok(11.0 - f64::from(d))
}

pub fn triangle_condition_diagnostic(d: u32) -> Result<ConvergenceVerdict> {
    if d < 1 {
        return Err(LabError::InvalidParameter("dimension must be at least 1".into()));
    }
    classify_convergence(&radial_partial_sums(triangle_exponent(d), &DEFAULT_CUTOFFS)?)
}

pub fn l2_membership_diagnostic(d: u32) -> Result<ConvergenceVerdict> {
    classify_convergence(&radial_partial_sums(l2_exponent(d)?, &DEFAULT_CUTOFFS)?)
}

/// `f(x) = (1 + |x|₂)^(2-d)`.
pub fn power_kernel(x: &[i64], d: u32) -> f64 {
    let r = x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    (1.0 + r).powi(2 - d as i32)
}

/// `∇(L) = Σ_{x,y ∈ [-L,L]^d} f(x) f(y-x) f(y)` evaluated as `Σ_y (f*f)(y) f(y)`.
///
/// `f*f` restricted to the box is invariant under coordinate permutations and sign flips,
/// so it is evaluated only on `0 ≤ y_1 ≤ … ≤ y_d` and weighted by orbit size. Work is
/// `(2L+1)^d` times the number of orbit representatives and must fit `budget`.
pub fn box_triangle_sum(d: u32, l: u32, budget: u64) -> Result<f64> {
    if !(1..=4).contains(&d) {
        return Err(LabError::InvalidParameter(format!("box sums need 1 <= d <= 4, got {d}")));
    }
    let side = 2 * l as i64 + 1;
    let box_points = (side as u64).pow(d);
    let reps = orbit_representatives(d, l as i64);
    let work = box_points.saturating_mul(reps.len() as u64);
    if work > budget {
        return Err(LabError::CapExceeded { what: "box-sum work", requested: work, cap: budget });
    }
    let table = KernelTable::new(d, 2 * l as i64);
    let points = box_coordinates(d, l as i64);
    let values = points.iter().map(|x| table.get(x)).collect::<Vec<_>>();
    let mut total = Compensated::new();
    let mut diff = vec![0i64; d as usize];
    for (y, multiplicity) in &reps {
        let mut conv = Compensated::new();
        for (x, &fx) in points.iter().zip(&values) {
            for k in 0..d as usize {
                diff[k] = y[k] - x[k];
            }
            conv.add(fx * table.get(&diff));
        }
        total.add(*multiplicity as f64 * conv.value() * table.get(y));
    }
    Ok(total.value())
}

/// Unsymmetrized reference for [`box_triangle_sum`] (tests and tiny boxes).
pub fn box_triangle_sum_direct(d: u32, l: u32) -> f64 {
    let points = box_coordinates(d, l as i64);
    let mut total = Compensated::new();
    let mut diff = vec![0i64; d as usize];
    for x in &points {
        for y in &points {
            for k in 0..d as usize {
                diff[k] = y[k] - x[k];
            }
            total.add(power_kernel(x, d) * power_kernel(&diff, d) * power_kernel(y, d));
        }
    }
    total.value()
}

/// Log-log slope of `∇(L)` between consecutive box sizes.
pub fn box_slopes(d: u32, sizes: &[u32], budget: u64) -> Result<Vec<(u32, f64, Option<f64>)>> {
    let mut out: Vec<(u32, f64, Option<f64>)> = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let value = box_triangle_sum(d, l, budget)?;
        let slope = out.last().and_then(|&(pl, pv, _)| {
            (pl > 0 && l > pl).then(|| (value / pv).ln() / (f64::from(l) / f64::from(pl)).ln())
        });
        out.push((l, value, slope));
    }
    Ok(out)
}

struct KernelTable {
    half: i64,
    side: i64,
    values: Vec<f64>,
}

impl KernelTable {
    fn new(d: u32, half: i64) -> Self {
        let side = 2 * half + 1;
        let values = box_coordinates(d, half).iter().map(|x| power_kernel(x, d)).collect();
        Self { half, side, values }
    }

    #[inline]
    fn get(&self, x: &[i64]) -> f64 {
        let idx = x.iter().fold(0i64, |acc, &c| acc * self.side + (c + self.half));
        self.values[idx as usize]
    }
}

fn box_coordinates(d: u32, l: i64) -> Vec<Vec<i64>> {
    let side = 2 * l + 1;
    let count = (side as usize).pow(d);
    (0..count)
        .map(|mut i| {
            let mut c = vec![0i64; d as usize];
            for slot in c.iter_mut().rev() {
                *slot = (i % side as usize) as i64 - l;
                i /= side as usize;
            }
            c
        })
        .collect()
}

/// Points `0 ≤ y_1 ≤ … ≤ y_d ≤ L` with the size of their orbit under the box symmetries.
fn orbit_representatives(d: u32, l: i64) -> Vec<(Vec<i64>, u64)> {
    fn rec(d: usize, l: i64, start: i64, cur: &mut Vec<i64>, out: &mut Vec<(Vec<i64>, u64)>) {
        if cur.len() == d {
            let nonzero = cur.iter().filter(|&&c| c != 0).count() as u32;
            let mut perms = factorial(d as u64);
            let mut i = 0;
            while i < d {
                let j = (i..d).take_while(|&j| cur[j] == cur[i]).count();
                perms /= factorial(j as u64);
                i += j;
            }
            out.push((cur.clone(), perms << nonzero));
            return;
        }
        for c in start..=l {
            cur.push(c);
            rec(d, l, c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d as usize, l, 0, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basel_partial_sum() {
        let s = radial_partial_sums(-2.0, &[100]).unwrap();
        assert!((s.partial_sums[0] - 1.634_983_900_184_892).abs() < 1e-12);
        let s = radial_partial_sums(0.0, &[10, 37]).unwrap();
        assert_eq!(s.partial_sums, vec![10.0, 37.0]);
        assert!(radial_partial_sums(1.0, &[10, 10]).is_err());
    }

    #[test]
    fn harmonic_decades() {
        let s = radial_partial_sums(-1.0, &[100, 10_000, 1_000_000]).unwrap();
        let inc = s.partial_sums[2] - s.partial_sums[1];
        assert!((inc - 100f64.ln()).abs() < 1e-3);
        assert!((s.partial_sums[1] - s.partial_sums[0] - 100f64.ln()).abs() < 1e-2);
    }

    #[test]
    fn classification_examples() {
        let classify = |e: f64| classify_convergence(&radial_partial_sums(e, &DEFAULT_CUTOFFS).unwrap()).unwrap().class;
        assert_eq!(classify(-2.0), ConvergenceClass::Convergent);
        assert_eq!(classify(-1.0), ConvergenceClass::DivergentLog);
        assert_eq!(classify(0.0), ConvergenceClass::DivergentPoly);
        let short = radial_partial_sums(-2.0, &[10, 100]).unwrap();
        assert!(classify_convergence(&short).is_err());
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(triangle_condition_diagnostic(7).unwrap().class, ConvergenceClass::Convergent);
        assert_eq!(triangle_condition_diagnostic(6).unwrap().class, ConvergenceClass::DivergentLog);
        assert_eq!(triangle_condition_diagnostic(5).unwrap().class, ConvergenceClass::DivergentPoly);
        assert_eq!(l2_membership_diagnostic(13).unwrap().class, ConvergenceClass::Convergent);
        assert_eq!(l2_membership_diagnostic(12).unwrap().class, ConvergenceClass::DivergentLog);
        assert_eq!(l2_membership_diagnostic(8).unwrap().class, ConvergenceClass::DivergentPoly);
        assert!(matches!(l2_membership_diagnostic(6), Err(LabError::Refused(_))));
    }

    #[test]
    fn orbit_weights_cover_the_box() {
        for d in 1..=4 {
            for l in 0..4 {
                let total: u64 = orbit_representatives(d, l).iter().map(|(_, m)| m).sum();
                assert_eq!(total, ((2 * l + 1) as u64).pow(d));
            }
        }
    }

    #[test]
    fn box_sum_matches_direct() {
        assert_eq!(box_triangle_sum(1, 0, DEFAULT_BOX_BUDGET).unwrap(), 1.0);
        for (d, l) in [(1, 5), (2, 3), (3, 2)] {
            let fast = box_triangle_sum(d, l, DEFAULT_BOX_BUDGET).unwrap();
            let direct = box_triangle_sum_direct(d, l);
            assert!((fast - direct).abs() <= 1e-12 * direct, "d={d} L={l}: {fast} vs {direct}");
        }
        assert!(matches!(box_triangle_sum(3, 8, 1000), Err(LabError::CapExceeded { .. })));
        assert!(box_triangle_sum(5, 1, DEFAULT_BOX_BUDGET).is_err());
    }

    #[test]
    fn box_slopes_decrease_with_dimension() {
        let d3 = box_slopes(3, &[4, 8, 16], DEFAULT_BOX_BUDGET).unwrap();
        assert!(d3.windows(2).all(|w| w[1].1 > w[0].1));
        let d4 = box_slopes(4, &[4, 8], DEFAULT_BOX_BUDGET).unwrap();
        let s3 = d3[1].2.unwrap();
        let s4 = d4[1].2.unwrap();
        assert!(s3 > 0.0 && s4 > 0.0 && s3 > s4, "slopes d3={s3} d4={s4}");
    }
}
