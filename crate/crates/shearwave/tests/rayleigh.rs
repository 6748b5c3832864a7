use num_complex::Complex64 as C64;
use shearwave::evolution::eigen_state;
use shearwave::oracles::{couette_modes, richardson_eps};
use shearwave::profile::{build_profile, ProfileSpec};
use shearwave::rayleigh::*;
use std::sync::Arc;

fn ctx(spec: ProfileSpec, k: f64, bc: BcKind) -> WaveContext {
    let p = Arc::new(build_profile(&spec).unwrap());
    WaveContext::new(p, k, 1.0, 1.0, bc, Numerics::default()).unwrap()
}

fn couette(k: f64) -> WaveContext {
    ctx(ProfileSpec::couette(1.0), k, BcKind::FreeSurface)
}

fn cubic(k: f64) -> WaveContext {
    ctx(ProfileSpec::polynomial(1.0, &[0.0, 1.0, 0.5, 0.1]), k, BcKind::FreeSurface)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn couette_y_plus_closed_form() {
    for (k, c) in [(0.7, C64::new(0.4, 0.3)), (4.0, C64::new(2.0, 0.0)), (12.0, C64::new(-0.5, -0.2))] {
        let cx = couette(k);
        let grid = uniform_grid(1.0, 33);
        let t = solve_y_plus(&cx, c, &grid).unwrap();
        let y = t.true_y();
        let gk = cx.gk();
        let d = -c;
        let (a, b) = (d * d / gk, (1.0 + d / gk) / k);
        for (i, &x) in grid.iter().enumerate() {
            let ex = a * (k * x).cosh() + b * (k * x).sinh();
            assert!(rel(y[i], ex) <= 1e-8, "k={k} x={x}: {} vs {ex}", y[i]);
        }
    }
}

#[test]
fn channel_y_plus_starts_from_unit_slope() {
    let k = 2.5;
    let cx = ctx(ProfileSpec::couette(1.0), k, BcKind::Channel);
    let grid = uniform_grid(1.0, 33);
    let y = solve_y_plus(&cx, C64::new(0.2, 0.5), &grid).unwrap().true_y();
    for (i, &x) in grid.iter().enumerate().take(grid.len() - 1) {
        let ex = (k * x).sinh() / k;
        assert!(rel(y[i], C64::new(ex, 0.0)) <= 1e-8, "{x}");
    }
    assert!(y.last().unwrap().norm() < 1e-14);
}

#[test]
fn couette_y_minus_at_large_wavenumber() {
    let cx = couette(200.0);
    let grid = uniform_grid(1.0, 21);
    let t = solve_y_minus(&cx, C64::new(0.5, 0.0), &grid).unwrap();
    // compare logarithms of the scaled trace
    for (i, &x) in grid.iter().enumerate().skip(1) {
        let ln_ex = (200.0 * (x + 1.0)).sinh().ln() - 200f64.ln();
        let ln_y = t.y[i].norm().ln() + t.log_scale;
        assert!((ln_y - ln_ex).abs() <= 1e-8 * ln_ex.abs().max(1.0), "{x}: {ln_y} vs {ln_ex}");
        assert!(t.y[i].im.abs() <= 1e-12 * t.y[i].re.abs());
    }
}

#[test]
fn wronskian_drift_is_small() {
    let cx = couette(1.5);
    let grid = cx.grid();
    let c = C64::new(3.0, 0.0);
    let r = wronskian_drift(&solve_y_minus(&cx, c, &grid).unwrap(), &solve_y_plus(&cx, c, &grid).unwrap());
    assert!(r.max_rel_drift <= 1e-8, "{}", r.max_rel_drift);
    for cx in [cubic(0.8), cubic(9.0), ctx(ProfileSpec::tanh_shear(1.0), 3.0, BcKind::FreeSurface)] {
        for re in [-0.5, 0.2, 0.9] {
            let c = C64::new(re, 0.5);
            let r = wronskian_drift(&solve_y_minus(&cx, c, &grid).unwrap(), &solve_y_plus(&cx, c, &grid).unwrap());
            assert!(r.max_rel_drift <= 1e-8, "{c}: {}", r.max_rel_drift);
        }
    }
}

#[test]
fn wronskian_of_mismatched_traces_is_infinite() {
    let cx = couette(1.0);
    let grid = uniform_grid(1.0, 9);
    let a = solve_y_minus(&cx, C64::new(2.0, 0.0), &grid).unwrap();
    let b = solve_y_plus(&cx, C64::new(2.5, 0.0), &grid).unwrap();
    assert_eq!(wronskian_drift(&a, &b).max_rel_drift, f64::INFINITY);
}

#[test]
fn couette_limit_has_no_jump() {
    let cx = couette(2.0);
    let grid = uniform_grid(1.0, 41);
    let c = -0.4;
    let t = limit_real(&cx, c, &grid, Which::Minus).unwrap();
    let y = t.true_y();
    for (i, &x) in grid.iter().enumerate().skip(1) {
        let ex = (2.0 * (x + 1.0)).sinh() / 2.0;
        assert!(rel(y[i], C64::new(ex, 0.0)) <= 1e-8, "{x}");
    }
}

#[test]
fn inflection_value_limit_is_real() {
    let cx = ctx(ProfileSpec::tanh_shear(1.0), 1.7, BcKind::FreeSurface);
    let grid = uniform_grid(1.0, 81);
    let c = cx.profile.u(-0.5, 0);
    for which in [Which::Minus, Which::Plus] {
        let t = limit_real(&cx, c, &grid, which).unwrap();
        for v in &t.y {
            assert!(v.im.abs() <= 1e-12 * v.norm().max(1e-300));
        }
    }
}

#[test]
fn limit_matches_eps_continuation() {
    let cx = cubic(1.3);
    let p = cx.profile.clone();
    let range = p.u_max - p.u_min;
    let xc = -0.4;
    let c_r = p.u(xc, 0);
    let grid = uniform_grid(1.0, 101);
    let lim = limit_real(&cx, c_r, &grid, Which::Minus).unwrap().true_y();
    let eps: Vec<f64> = [4e-6, 2e-6, 1e-6].iter().map(|e| e * range).collect();
    let vals: Vec<Vec<C64>> = eps.iter().map(|&e| solve_y_minus(&cx, C64::new(c_r, e), &grid).unwrap().true_y()).collect();
    let ext = richardson_eps(&eps, &vals).unwrap();
    let scale = lim.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let delta = cx.numerics.delta_cl;
    for (i, &x) in grid.iter().enumerate() {
        if (x - xc).abs() > 2.0 * delta {
            assert!((ext[i] - lim[i]).norm() <= 1e-7 * scale, "{x}: {} vs {}", ext[i], lim[i]);
        }
    }
}

#[test]
fn lower_limit_is_the_conjugate() {
    let cx = cubic(2.0);
    let grid = uniform_grid(1.0, 41);
    let c_r = cx.profile.u(-0.6, 0);
    let up = limit_real_branch(&cx, c_r, &grid, Which::Minus, TraceSide::LimitPlus).unwrap().true_y();
    let lo = limit_real_branch(&cx, c_r, &grid, Which::Minus, TraceSide::LimitMinus).unwrap().true_y();
    for i in 0..grid.len() {
        assert!((up[i].conj() - lo[i]).norm() <= 1e-10 * up[i].norm().max(1e-300));
    }
    // convex profile: the jump adds a positive imaginary part above the layer
    assert!(up.last().unwrap().im > 0.0);
    assert!(limit_real(&cx, cx.profile.u_max + 0.1, &grid, Which::Minus).is_err());
}

#[test]
fn zero_forcing_gives_zero() {
    let cx = cubic(1.0);
    let psi = vec![C64::new(0.0, 0.0); cx.numerics.grid_n];
    let t = solve_nonhomogeneous(&cx, C64::new(0.4, 0.2), &psi).unwrap();
    assert!(t.true_y().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn couette_unit_forcing_closed_form() {
    let k = 1.7;
    let cx = couette(k);
    let c = C64::new(0.3, 0.25);
    let grid = cx.grid();
    let psi: Vec<C64> = grid.iter().map(|&x| C64::new(x, 0.0) - c).collect();
    let y = solve_nonhomogeneous(&cx, c, &psi).unwrap().true_y();
    // y = (1 - cosh k(x+1))/k^2 + B sinh k(x+1), d^2 y'(0) = (d + g + sigma k^2) y(0)
    let (d, gk) = (-c, cx.gk());
    let (ch, sh) = (k.cosh(), k.sinh());
    let b = ((d + gk) * (1.0 - ch) / (k * k) + d * d * sh / k) / (d * d * k * ch - (d + gk) * sh);
    for (i, &x) in grid.iter().enumerate().step_by(64) {
        let s = k * (x + 1.0);
        let ex = (1.0 - s.cosh()) / (k * k) + b * s.sinh();
        assert!((y[i] - ex).norm() <= 1e-8 * (1.0 + ex.norm()), "{x}: {} vs {ex}", y[i]);
    }
}

#[test]
fn real_forcing_limit_matches_eps_continuation() {
    let cx = cubic(1.1);
    let p = cx.profile.clone();
    let range = p.u_max - p.u_min;
    let c_r = p.u(-0.55, 0);
    let grid = cx.grid();
    let psi: Vec<C64> = grid.iter().map(|&x| C64::new((3.0 * x).cos(), 0.5 * x)).collect();
    let lim = solve_nonhomogeneous(&cx, C64::new(c_r, 0.0), &psi).unwrap().true_y();
    let eps: Vec<f64> = [4e-6, 2e-6, 1e-6].iter().map(|e| e * range).collect();
    let vals: Vec<Vec<C64>> =
        eps.iter().map(|&e| solve_nonhomogeneous(&cx, C64::new(c_r, e), &psi).unwrap().true_y()).collect();
    let ext = richardson_eps(&eps, &vals).unwrap();
    let dx = cx.grid_dx();
    let l2 = |v: &[C64]| (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt();
    let diff: Vec<C64> = ext.iter().zip(&lim).map(|(a, b)| a - b).collect();
    assert!(l2(&diff) <= 1e-7 * l2(&lim), "{} vs {}", l2(&diff), l2(&lim));
}

#[test]
fn zero_data_gives_zero_transform() {
    let cx = cubic(2.0);
    let zero = vec![C64::new(0.0, 0.0); cx.numerics.grid_n];
    let (t, eta) = solve_bvp_v2(&cx, C64::new(0.5, 0.3), &zero, C64::new(0.0, 0.0), C64::new(0.0, 0.0)).unwrap();
    assert!(t.true_y().iter().all(|v| v.norm() == 0.0));
    assert_eq!(eta, C64::new(0.0, 0.0));
}

#[test]
fn couette_transform_without_vorticity_is_sinh() {
    let k = 1.2;
    let cx = couette(k);
    let zero = vec![C64::new(0.0, 0.0); cx.numerics.grid_n];
    let (t, _) = solve_bvp_v2(&cx, C64::new(0.4, 0.6), &zero, C64::new(0.7, 0.1), C64::new(-0.2, 0.3)).unwrap();
    let y = t.true_y();
    let grid = cx.grid();
    let top = grid.len() - 1;
    let ratio = y[top] / (k * 1.0f64).sinh();
    for (i, &x) in grid.iter().enumerate().step_by(50) {
        let ex = ratio * (k * (x + 1.0)).sinh();
        assert!((y[i] - ex).norm() <= 1e-8 * ratio.norm(), "{x}");
    }
}

#[test]
fn transform_has_eigenvalue_pole_with_mode_residue() {
    let k = 1.0;
    let cx = couette(k);
    let cs = C64::new(couette_modes(k, 1.0, 1.0, 1.0).unwrap().c_plus, 0.0);
    let s = eigen_state(&cx, cs).unwrap();
    let grid = cx.grid();
    let mode: Vec<C64> = grid.iter().map(|&x| C64::new((k * (x + 1.0)).sinh() / k.sinh(), 0.0)).collect();
    let ik = C64::new(0.0, k);
    for d in [1e-4, 1e-5] {
        let c = cs + C64::new(d, d);
        let (t, _) = solve_bvp_v2(&cx, c, &s.omega, s.eta, s.b).unwrap();
        let v = t.true_y();
        let worst = (0..grid.len()).map(|i| (v[i] * ik * (cs - c) - mode[i]).norm()).fold(0.0, f64::max);
        assert!(worst <= 10.0 * d, "{d}: {worst}");
    }
}
