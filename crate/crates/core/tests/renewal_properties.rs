//! Renewal exponents, configuration-entropy scaling and branching arithmetic.

use impuritylab::renewal::*;
use proptest::prelude::*;

fn exponent(source: KernelSource, dt: f64, p_m: f64) -> f64 {
    let (times, a0) = free_kernel(source, dt, 500.0).unwrap();
    solve_renewal(&times, &a0, p_m).unwrap().fit((20.0, 400.0)).unwrap().exponent
}

#[test]
fn monitoring_steepens_the_bulk_kernel_only() {
    assert!((exponent(KernelSource::Bulk, 0.1, 0.0) + 1.0).abs() < 0.1);
    assert!((exponent(KernelSource::Bulk, 0.1, 0.5) + 3.0).abs() < 0.2);
    for p in [0.0, 0.2, 0.5, 0.9] {
        assert!((exponent(KernelSource::Boundary, 0.1, p) + 3.0).abs() < 0.2, "p_m = {p}");
    }
}

#[test]
fn grid_refinement_keeps_the_exponent() {
    for (source, p) in [(KernelSource::Bulk, 0.5), (KernelSource::Boundary, 0.5), (KernelSource::Bulk, 0.0)] {
        let coarse = exponent(source, 0.1, p);
        let fine = exponent(source, 0.05, p);
        assert!((coarse - fine).abs() < 0.05, "{source:?}: {coarse} vs {fine}");
    }
}

fn s_conf(xi: f64, t: f64) -> f64 {
    config_entropy(&ConfigEntropyParams::new(xi, t)).unwrap()
}

#[test]
fn entropy_grows_like_xi_log_t() {
    let ratio = s_conf(2.0, 1e4) / s_conf(2.0, 1e2);
    assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
}

#[test]
fn logarithmic_correlation_length_gives_log_squared_growth() {
    let scaled: Vec<f64> = [2.0, 3.0, 4.0, 5.0, 6.0]
        .iter()
        .map(|e| {
            let t = 10f64.powf(*e);
            s_conf(t.ln(), t) / t.ln().powi(2)
        })
        .collect();
    let max = scaled.iter().copied().fold(f64::MIN, f64::max);
    let min = scaled.iter().copied().fold(f64::MAX, f64::min);
    assert!(max / min < 1.2, "{scaled:?}");
}

proptest! {
    #[test]
    fn entropy_increases_with_correlation_length(xi in 0.05f64..20.0, dxi in 0.01f64..5.0, t in 5.0f64..500.0) {
        // only inside the regime ξ ≪ vt, where the estimator applies
        prop_assume!(10.0 * (xi + dxi) <= DEFAULT_VELOCITY * t);
        prop_assert!(s_conf(xi + dxi, t) > s_conf(xi, t));
    }

    #[test]
    fn criterion_is_symmetric(a in 0.0f64..4.0, b in 0.0f64..4.0) {
        prop_assert_eq!(branching_criterion(a, b).unwrap(), branching_criterion(b, a).unwrap());
    }

    #[test]
    fn recurrence_round_trip(p in 0.0f64..0.999) {
        let n = expected_returns(p).unwrap().unwrap();
        prop_assert!((return_probability_from(n).unwrap() - p).abs() < 1e-15);
    }
}
