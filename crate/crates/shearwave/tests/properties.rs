//! Randomized invariants across the library.

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use shearwave::dispersion::*;
use shearwave::evolution::*;
use shearwave::profile::{build_profile, ProfileSpec, ShearProfile};
use shearwave::rayleigh::*;
use std::sync::Arc;

fn spec_strategy() -> impl Strategy<Value = ProfileSpec> {
    prop_oneof![
        (0.5..2.0f64, -1.0..1.0f64).prop_map(|(s, o)| ProfileSpec::couette(1.0).with("slope", s).with("offset", o)),
        (0.5..2.0f64, 0.5..3.0f64, -0.8..-0.2f64).prop_map(|(a, s, c)| ProfileSpec::tanh_shear(1.0)
            .with("amplitude", a)
            .with("steepness", s)
            .with("center", c)),
        (-1.0..1.0f64, 1.0..1.5f64, -0.3..0.3f64, -0.1..0.1f64)
            .prop_map(|(c0, c1, c2, c3)| ProfileSpec::polynomial(1.0, &[c0, c1, c2, c3])),
        (0.5..2.0f64, 0.5..2.5f64).prop_map(|(a, s)| {
            let table = (0..=40).map(|i| -1.0 + i as f64 / 40.0).map(|x| (x, a * (s * (x + 0.5)).tanh())).collect();
            ProfileSpec::tabulated(1.0, table)
        }),
    ]
}

fn profile_strategy() -> impl Strategy<Value = Arc<ShearProfile>> {
    spec_strategy().prop_map(|s| Arc::new(build_profile(&s).unwrap()))
}

fn ctx(p: &Arc<ShearProfile>, k: f64) -> WaveContext {
    WaveContext::new(p.clone(), k, 1.0, 0.5, BcKind::FreeSurface, Numerics::default()).unwrap()
}

/// A complex speed off the real range, scaled to the profile.
fn off_axis(p: &ShearProfile, re: f64, im: f64) -> C64 {
    let w = p.u_max - p.u_min;
    C64::new(p.u_min + re * w, im * w)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivatives_are_consistent(spec in spec_strategy(), t in 0.0..1.0f64) {
        let p = build_profile(&spec).unwrap();
        let (lo, hi) = p.domain();
        let x = lo + 0.02 + t * (hi - lo - 0.04);
        let top = if p.is_tabulated() { 3 } else { 4 };
        let hs = 1e-4;
        for order in 0..=top {
            let fd = (p.eval(x + hs, order).unwrap() - p.eval(x - hs, order).unwrap()) / (2.0 * hs);
            let exact = p.eval(x, order + 1).unwrap();
            let scale = (0..=20).map(|i| p.u(-1.0 + i as f64 / 20.0, order + 1).abs()).fold(1.0, f64::max);
            prop_assert!((fd - exact).abs() <= 1e-5 * scale, "order {} at {}: fd {} exact {}", order, x, fd, exact);
        }
    }

    #[test]
    fn inverse_round_trips(spec in spec_strategy(), t in 0.0..1.0f64) {
        let p = build_profile(&spec).unwrap();
        let x = -p.h + t * p.h;
        let back = p.inverse_u(p.u(x, 0)).unwrap();
        prop_assert!((back - x).abs() <= 1e-10, "{} -> {}", x, back);
    }

    #[test]
    fn extension_is_smooth_and_monotone(spec in spec_strategy()) {
        let p = build_profile(&spec).unwrap();
        let eps = 1e-12;
        // spline derivatives lose digits to knot-spacing powers
        let rtol = if p.is_tabulated() { 1e-7 } else { 1e-9 };
        for x in [0.0, -p.h] {
            for order in 0..=4 {
                let a = p.eval(x - eps, order).unwrap();
                let b = p.eval(x + eps, order).unwrap();
                // the gap itself contributes 2 eps times the next derivative
                let slack = 4.0 * eps * p.eval(x, order + 1).unwrap().abs();
                prop_assert!((a - b).abs() < rtol * (1.0 + a.abs()) + slack, "order {} at {}: {} vs {}", order, x, a, b);
            }
        }
        let (lo, hi) = p.domain();
        for i in 0..=400 {
            let x = lo + (hi - lo) * i as f64 / 400.0;
            prop_assert!(p.u(x, 1) >= 0.5 * p.slope_min * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn traces_are_conjugate_symmetric(p in profile_strategy(), k in 0.1..30.0f64, re in -0.5..1.5f64, im in 0.01..1.0f64) {
        let cx = ctx(&p, k);
        let c = off_axis(&p, re, im);
        let grid = uniform_grid(p.h, 33);
        let a = solve_y_minus(&cx, c, &grid).unwrap();
        let b = solve_y_minus(&cx, c.conj(), &grid).unwrap();
        let s = (b.log_scale - a.log_scale).exp();
        for i in 0..grid.len() {
            prop_assert!((b.y[i] * s - a.y[i].conj()).norm() <= 1e-10 * a.y[i].norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn traces_are_even_in_k(p in profile_strategy(), k in 0.1..30.0f64, re in -0.5..1.5f64, im in 0.01..1.0f64) {
        let c = off_axis(&p, re, im);
        let grid = uniform_grid(p.h, 33);
        let a = solve_y_minus(&ctx(&p, k), c, &grid).unwrap();
        let b = solve_y_minus(&ctx(&p, -k), c, &grid).unwrap();
        let s = (b.log_scale - a.log_scale).exp();
        for i in 1..grid.len() {
            prop_assert!(rel(b.y[i] * s, a.y[i]) <= 1e-12);
        }
    }

    #[test]
    fn wronskian_is_constant(p in profile_strategy(), k in 0.1..40.0f64, re in -0.5..1.5f64, im in 0.01..1.0f64) {
        let cx = ctx(&p, k);
        let c = off_axis(&p, re, im);
        let grid = cx.grid();
        let tm = solve_y_minus(&cx, c, &grid).unwrap();
        let tp = solve_y_plus(&cx, c, &grid).unwrap();
        prop_assert!(wronskian_drift(&tm, &tp).max_rel_drift <= 1e-7);
    }

    #[test]
    fn bottom_solution_is_positive_off_range(p in profile_strategy(), k in 0.0..30.0f64, gap in 0.01..2.0f64, above in any::<bool>()) {
        let cx = ctx(&p, k);
        let c = if above { p.u_max + gap } else { p.u_min - gap };
        let grid = uniform_grid(p.h, 65);
        let t = solve_y_minus(&cx, C64::new(c, 0.0), &grid).unwrap();
        for i in 1..grid.len() {
            prop_assert!(t.y[i].re > 0.0 && t.y[i].im.abs() <= 1e-10 * t.y[i].re);
        }
    }

    #[test]
    fn dispersion_symmetries(p in profile_strategy(), k in 0.1..30.0f64, re in -0.5..1.5f64, im in 0.01..1.0f64) {
        let c = off_axis(&p, re, im);
        let f = eval_dispersion(&ctx(&p, k), c).unwrap().f;
        let f_neg = eval_dispersion(&ctx(&p, -k), c).unwrap().f;
        let f_conj = eval_dispersion(&ctx(&p, k), c.conj()).unwrap().f;
        prop_assert!(rel(f_neg, f) <= 1e-10);
        prop_assert!(rel(f_conj, f.conj()) <= 1e-10);
    }

    #[test]
    fn boundary_and_wronskian_forms_agree(p in profile_strategy(), k in 0.1..30.0f64, re in -0.5..1.5f64, im in 0.01..1.0f64) {
        let cx = ctx(&p, k);
        let c = off_axis(&p, re, im);
        let (a, la) = big_f(&cx, c).unwrap();
        let (b, lb) = big_f_wronskian(&cx, c).unwrap();
        prop_assert!(rel(b * (lb - la).exp(), a) <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn index_matches_located_roots(p in profile_strategy(), k in 0.3..10.0f64, re in -1.0..2.0f64, im in -0.5..0.5f64, w in 0.05..2.0f64, h in 0.05..1.0f64) {
        let cx = ctx(&p, k);
        let span = p.u_max - p.u_min;
        let r = Rect::new(p.u_min + re * span, p.u_min + (re + w) * span, im, im + h);
        prop_assume!(r.distance_to_segment(p.u_min, p.u_max) > 2e-3);
        match (count_roots_rect(&cx, &r), find_modes(&cx, &r, 16)) {
            (Ok(n), Ok(found)) => {
                prop_assert_eq!(n, found.iter().map(|m| m.multiplicity).sum::<usize>());
                for m in found.iter().filter(|m| m.c.im > 0.0) {
                    prop_assert!(semicircle_excess(&p, m.c) <= 1e-6);
                }
            }
            (Err(shearwave::Error::BoundaryRoot { .. }), _) | (_, Err(shearwave::Error::BoundaryRoot { .. })) => {}
            (a, b) => prop_assert!(false, "{:?} / {:?}", a.err(), b.err()),
        }
    }

    #[test]
    fn evolution_is_linear(p in profile_strategy(), k in 0.2..10.0f64, seed in any::<u64>(), ar in -2.0..2.0f64, ai in -2.0..2.0f64) {
        let cx = ctx(&p, k);
        let ev = Evolver::new(&cx).unwrap();
        let n = cx.numerics.grid_n;
        let field = |s: u64| ModeState {
            omega: (0..n).map(|i| {
                let x = (i as f64 + s as f64 * 0.37).sin();
                C64::new(x, (x * 3.0 + s as f64).cos())
            }).collect(),
            eta: C64::new((s % 7) as f64 - 3.0, 0.5),
            b: C64::new(0.25, (s % 5) as f64 - 2.0),
        };
        let (x, y) = (field(seed % 1000), field(seed % 997 + 1));
        let a = C64::new(ar, ai);
        let dt = 1e-3f64.min(cfl_bound(&cx));
        let lhs = ev.step(&x.axpy(a, &y), dt).unwrap();
        let rhs = ev.step(&x, dt).unwrap().axpy(a, &ev.step(&y, dt).unwrap());
        let dx = cx.grid_dx();
        prop_assert!(lhs.axpy(C64::new(-1.0, 0.0), &rhs).norm(dx) <= 1e-12 * rhs.norm(dx));
    }

    #[test]
    fn velocity_round_trip(k in 0.2..8.0f64, a1 in -1.0..1.0f64, a2 in -1.0..1.0f64, a3 in -1.0..1.0f64) {
        let p = Arc::new(build_profile(&ProfileSpec::couette(1.0)).unwrap());
        let cx = ctx(&p, k);
        let pi = std::f64::consts::PI;
        // v2 vanishing at the bottom, with its analytic second derivative
        let modes = [(a1, 0.5), (a2, 1.0), (a3, 1.5)];
        let v = |x: f64| modes.iter().map(|&(a, m)| a * (m * pi * (x + 1.0)).sin()).sum::<f64>();
        let dv = |x: f64| modes.iter().map(|&(a, m)| a * m * pi * (m * pi * (x + 1.0)).cos()).sum::<f64>();
        let d2v = |x: f64| modes.iter().map(|&(a, m)| -a * (m * pi).powi(2) * (m * pi * (x + 1.0)).sin()).sum::<f64>();
        let ik = C64::new(0.0, k);
        let omega: Vec<C64> = cx.grid().iter().map(|&x| C64::new(d2v(x) - k * k * v(x), 0.0) / ik).collect();
        let (v2, v1) = recover_velocity(&cx, &omega, C64::new(dv(0.0), 0.0)).unwrap();
        let scale = 1.0 + a1.abs() + a2.abs() + a3.abs();
        for (i, &x) in cx.grid().iter().enumerate() {
            prop_assert!((v2[i] - v(x)).norm() <= 1e-6 * scale);
            prop_assert!((v1[i] - C64::new(0.0, dv(x) / k)).norm() <= 1e-4 * scale * (1.0 + 1.0 / k));
        }
    }
}
