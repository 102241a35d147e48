use pparabolic::barriers::{beta_from_alpha, estimate_alpha_and_beta, TuskHouseBarrierSpec};
use pparabolic::geometry::{scale_domain, SpacetimePoint};
use pparabolic::operator::OperatorParams;
use pparabolic::regularity::tusk_holder_exponent;

#[test]
fn beta_arithmetic() {
    assert!((beta_from_alpha(0.25) - 2.0).abs() < 1e-15);
    assert!((beta_from_alpha(0.5) - 1.0).abs() < 1e-15);
    assert!((tusk_holder_exponent(1.0, 0.5) - 0.5).abs() < 1e-15);
    assert!((tusk_holder_exponent(1.0, 0.75) - 0.5 * beta_from_alpha(0.75)).abs() < 1e-15);
}

#[test]
fn data_matches_boundary_values() {
    let spec = TuskHouseBarrierSpec::new(&[1.0], 0.5, 2.0).unwrap();
    let f = spec.data();
    // On the tusk boundary x = (1 ± 1/2) sqrt(-t).
    for t in [-0.9, -0.3, -0.01] {
        let s = f64::sqrt(-t);
        for x in [0.5 * s, 1.5 * s] {
            assert!((f(&SpacetimePoint::new(&[x], t)) - (-t)).abs() < 1e-12);
        }
        assert_eq!(f(&SpacetimePoint::new(&[2.0], t)), 1.0);
        assert_eq!(f(&SpacetimePoint::new(&[-2.0], t)), 1.0);
    }
    assert_eq!(f(&SpacetimePoint::new(&[0.0], 1.0)), 1.0);
    assert_eq!(f(&SpacetimePoint::new(&[0.3], -1.0)), 1.0);
}

#[test]
fn k_points_lie_on_half_scale_house() {
    let spec = TuskHouseBarrierSpec::new(&[1.0], 0.5, 2.0).unwrap();
    let half = scale_domain(&spec.domain().unwrap(), 2.0, 1).unwrap();
    for p in spec.k_points(50) {
        assert!(!half.membership(&p), "{p}");
    }
}

#[test]
fn alpha1_regression() {
    let spec = TuskHouseBarrierSpec::new(&[1.0], 0.5, 2.0).unwrap();
    let ab = estimate_alpha_and_beta(&spec, &OperatorParams::new(2.0).unwrap(), 1.0 / 64.0).unwrap();
    assert!((ab.alpha1 - 0.91787).abs() < 1e-4, "{ab:?}");
    assert!(ab.beta > 0.0 && ab.alpha == ab.alpha1);
    let coarse = estimate_alpha_and_beta(&spec, &OperatorParams::new(2.0).unwrap(), 1.0 / 32.0).unwrap();
    assert!((coarse.alpha1 - ab.alpha1).abs() < 1e-2);
}
