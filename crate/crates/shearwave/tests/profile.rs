use shearwave::profile::{build_profile, ProfileKind, ProfileSpec};
use shearwave::Error;

fn table(f: impl Fn(f64) -> f64, n: usize) -> Vec<(f64, f64)> {
    (0..=n).map(|i| -1.0 + i as f64 / n as f64).map(|x| (x, f(x))).collect()
}

#[test]
fn margin_follows_slope_and_curvature() {
    let p = build_profile(&ProfileSpec::polynomial(1.0, &[0.0, 1.0, 0.5, 0.1])).unwrap();
    // U' = 1 + x + 0.3 x^2 is smallest at -1 (0.3); |U''| = |1 + 0.6 x| is largest at 0 (1)
    assert!((p.slope_min - 0.3).abs() < 1e-6);
    assert!((p.curv_max - 1.0).abs() < 1e-12);
    assert!(p.h0 <= 0.3 / 4.0 + 1e-9 && p.h0 > 0.0);
    let (lo, hi) = p.domain();
    assert_eq!((lo, hi), (-1.0 - p.h0, p.h0));
    assert!(p.u(lo, 1) >= 0.5 * p.slope_min);
}

#[test]
fn shifted_couette() {
    let p = build_profile(&ProfileSpec::couette(2.0).with("slope", 3.0).with("offset", 1.0)).unwrap();
    assert_eq!((p.u_min, p.u_max), (-5.0, 1.0));
    assert_eq!(p.h0, 1.0);
    assert_eq!(p.kind(), ProfileKind::Couette);
    assert!((p.inverse_u(-2.0).unwrap() + 1.0).abs() < 1e-14);
    assert!(matches!(p.inverse_u(1.0 + 2.0 * 3.0 * p.h0), Err(Error::OutOfRange { .. })));
}

#[test]
fn surface_speed_inverts_to_surface() {
    for spec in [ProfileSpec::tanh_shear(1.0), ProfileSpec::polynomial(1.0, &[0.2, 1.0, -0.3])] {
        let p = build_profile(&spec).unwrap();
        assert_eq!(p.inverse_u(p.u_max).unwrap(), 0.0);
        assert!((p.inverse_u(p.u_min).unwrap() + 1.0).abs() < 1e-12);
    }
}

#[test]
fn tabulated_tanh_tracks_the_analytic_profile() {
    let f = |x: f64| (2.0 * (x + 0.5)).tanh();
    let p = build_profile(&ProfileSpec::tabulated(1.0, table(f, 80))).unwrap();
    let q = build_profile(&ProfileSpec::tanh_shear(1.0)).unwrap();
    for i in 0..=50 {
        let x = -1.0 + i as f64 / 50.0;
        assert!((p.u(x, 0) - q.u(x, 0)).abs() < 1e-8);
        assert!((p.u(x, 2) - q.u(x, 2)).abs() < 1e-4);
    }
    let inf = p.inflection_points();
    assert_eq!(inf.points.len(), 1);
    assert!((inf.points[0].0 + 0.5).abs() < 1e-6);
}

#[test]
fn malformed_tables_are_rejected() {
    let f = |x: f64| x;
    assert!(matches!(build_profile(&ProfileSpec::tabulated(1.0, table(f, 4))), Err(Error::InsufficientSmoothness(_))));
    let short: Vec<(f64, f64)> = table(f, 20).into_iter().filter(|p| p.0 <= -0.1).collect();
    assert!(matches!(build_profile(&ProfileSpec::tabulated(1.0, short)), Err(Error::InvalidSpec(_))));
    let mut flat = table(f, 20);
    flat[7].1 = flat[6].1;
    assert!(matches!(build_profile(&ProfileSpec::tabulated(1.0, flat)), Err(Error::NonMonotonic { .. })));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(build_profile(&ProfileSpec::couette(0.0)), Err(Error::InvalidSpec(_))));
    assert!(matches!(build_profile(&ProfileSpec::couette(1.0).with("slope", -1.0)), Err(Error::NonMonotonic { .. })));
    assert!(matches!(build_profile(&ProfileSpec::polynomial(1.0, &[0.0, 1.0, 2.0])), Err(Error::NonMonotonic { .. })));
    let p = build_profile(&ProfileSpec::couette(1.0)).unwrap();
    assert!(p.eval(-0.2, 7).is_err());
}
