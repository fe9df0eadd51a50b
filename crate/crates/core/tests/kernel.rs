use trilab::kernel::{
    classify_convergence, l2_membership_diagnostic, radial_partial_sums, triangle_condition_diagnostic,
    ConvergenceClass, DEFAULT_CUTOFFS,
};

#[test]
fn radial_sums_monotone_and_antitone() {
    let cutoffs = [10, 100, 1_000, 10_000];
    let exps = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 1.0];
    let series = exps.iter().map(|&e| radial_partial_sums(e, &cutoffs).unwrap()).collect::<Vec<_>>();
    for s in &series {
        assert!(s.partial_sums.windows(2).all(|w| w[0] <= w[1]));
    }
    for pair in series.windows(2) {
        for (lo, hi) in pair[0].partial_sums.iter().zip(&pair[1].partial_sums) {
            assert!(lo <= hi);
        }
    }
}

#[test]
fn verdicts_by_exponent() {
    let classify = |e: f64| classify_convergence(&radial_partial_sums(e, &DEFAULT_CUTOFFS).unwrap()).unwrap().class;
    for e in [-3.0, -2.0, -1.5] {
        assert_eq!(classify(e), ConvergenceClass::Convergent, "e={e}");
    }
    assert_eq!(classify(-1.0), ConvergenceClass::DivergentLog);
    for e in [0.0, 1.0] {
        assert_eq!(classify(e), ConvergenceClass::DivergentPoly, "e={e}");
    }
}

#[test]
fn dimension_frontiers() {
    for d in [3, 4, 5, 6] {
        assert!(!triangle_condition_diagnostic(d).unwrap().class.is_convergent(), "d={d}");
    }
    for d in [7, 8, 10] {
        assert!(triangle_condition_diagnostic(d).unwrap().class.is_convergent(), "d={d}");
    }
    for d in [8, 10, 12] {
        assert!(!l2_membership_diagnostic(d).unwrap().class.is_convergent(), "d={d}");
    }
    for d in [13, 15] {
        assert!(l2_membership_diagnostic(d).unwrap().class.is_convergent(), "d={d}");
    }
}
