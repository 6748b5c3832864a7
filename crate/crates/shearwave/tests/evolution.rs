use num_complex::Complex64 as C64;
use shearwave::dispersion::find_all_modes;
use shearwave::evolution::*;
use shearwave::oracles::couette_modes;
use shearwave::profile::{build_profile, ProfileSpec, ShearProfile};
use shearwave::rayleigh::*;
use std::sync::Arc;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn profile(spec: ProfileSpec) -> Arc<ShearProfile> {
    Arc::new(build_profile(&spec).unwrap())
}

fn ctx(p: &Arc<ShearProfile>, k: f64, bc: BcKind) -> WaveContext {
    WaveContext::new(p.clone(), k, 1.0, 1.0, bc, Numerics { grid_n: 513, ..Numerics::default() }).unwrap()
}

fn couette(k: f64) -> WaveContext {
    ctx(&profile(ProfileSpec::couette(1.0)), k, BcKind::FreeSurface)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn harmonic_velocity_recovery() {
    let k = 1.6;
    let cx = couette(k);
    let amp = C64::new(0.3, -0.8);
    let zeros = vec![zero(); cx.numerics.grid_n];
    let (v2, v1) = recover_velocity(&cx, &zeros, amp * k * k.cosh()).unwrap();
    for (i, &x) in cx.grid().iter().enumerate() {
        let s = k * (x + 1.0);
        assert!((v2[i] - amp * s.sinh()).norm() <= 1e-10 * amp.norm() * k.sinh());
        let dv1 = C64::new(0.0, 1.0) * amp * s.cosh();
        assert!((v1[i] - dv1).norm() <= 1e-4 * amp.norm() * k.cosh(), "{x}");
    }
    let (v2, v1) = recover_velocity(&cx, &zeros, zero()).unwrap();
    assert!(v2.iter().chain(&v1).all(|v| *v == zero()));
    assert!(recover_velocity(&cx, &zeros[1..], zero()).is_err());
}

#[test]
fn couette_vorticity_is_transported() {
    let k = 1.0;
    let cx = couette(k);
    let w0 = gaussian_vorticity(&cx, -0.5, 0.15, C64::new(1.0, 0.0));
    let s0 = ModeState { omega: w0.clone(), eta: C64::new(0.2, 0.0), b: C64::new(0.0, 0.1) };
    let s = Evolver::new(&cx).unwrap().advance(&s0, 20.0, 1e-3).unwrap();
    let exact: Vec<C64> = cx.grid().iter().zip(&w0).map(|(&x, w)| w * C64::new(0.0, -k * x * 20.0).exp()).collect();
    assert!(max_diff(&s.omega, &exact) <= 1e-6, "{}", max_diff(&s.omega, &exact));
}

#[test]
fn zero_state_stays_zero() {
    let cx = ctx(&profile(ProfileSpec::tanh_shear(1.0)), 2.0, BcKind::FreeSurface);
    let z = ModeState::zeros(cx.numerics.grid_n);
    let s = Evolver::new(&cx).unwrap().advance(&z, 3.0, 1e-2).unwrap();
    assert!(s.is_zero());
    assert!(step(&cx, &z, 1e-3).unwrap().is_zero());
}

#[test]
fn couette_mode_oscillates_at_its_speed() {
    let k = 1.0;
    let cx = couette(k);
    let c = C64::new(couette_modes(k, 1.0, 1.0, 1.0).unwrap().c_plus, 0.0);
    let s0 = eigen_state(&cx, c).unwrap();
    let s = Evolver::new(&cx).unwrap().advance(&s0, 10.0, 1e-3).unwrap();
    let expect = s0.scale((C64::new(0.0, -k) * c * 10.0).exp());
    let dx = cx.grid_dx();
    let err = s.axpy(C64::new(-1.0, 0.0), &expect).norm(dx) / s0.norm(dx);
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn projection_of_a_mode_is_the_mode() {
    let p = profile(ProfileSpec::tanh_shear(1.0));
    let cx = ctx(&p, 1.0, BcKind::FreeSurface);
    let catalog = find_all_modes(&cx, 16).unwrap();
    let top = catalog.iter().max_by(|a, b| a.c.re.total_cmp(&b.c.re)).unwrap();
    let s0 = eigen_state(&cx, top.c).unwrap();
    let split = project_point_modes(&cx, &s0, &catalog).unwrap();
    let dx = cx.grid_dx();
    assert!(split.continuous.norm(dx) <= 1e-6 * s0.norm(dx), "{}", split.continuous.norm(dx));
    let point = split.point_state(cx.numerics.grid_n);
    assert!(point.axpy(C64::new(-1.0, 0.0), &s0).norm(dx) <= 1e-6 * s0.norm(dx));
}

#[test]
fn projection_is_idempotent() {
    let p = profile(ProfileSpec::tanh_shear(1.0));
    let cx = ctx(&p, 1.5, BcKind::FreeSurface);
    let catalog = find_all_modes(&cx, 16).unwrap();
    let s0 = ModeState { omega: gaussian_vorticity(&cx, -0.3, 0.2, C64::new(1.0, 0.5)), eta: C64::new(0.4, 0.0), b: C64::new(0.1, 0.2) };
    let n = cx.numerics.grid_n;
    let first = project_point_modes(&cx, &s0, &catalog).unwrap().point_state(n);
    let second = project_point_modes(&cx, &first, &catalog).unwrap().point_state(n);
    let dx = cx.grid_dx();
    assert!(first.norm(dx) > 0.0);
    assert!(second.axpy(C64::new(-1.0, 0.0), &first).norm(dx) <= 1e-6 * first.norm(dx));
}

#[test]
fn zero_state_has_empty_split() {
    let cx = couette(1.0);
    let catalog = find_all_modes(&cx, 16).unwrap();
    let split = project_point_modes(&cx, &ModeState::zeros(cx.numerics.grid_n), &catalog).unwrap();
    assert!(split.point_modes.is_empty() && split.continuous.is_zero());
}

#[test]
fn pure_point_data_has_no_continuous_part() {
    let k = 1.0;
    let cx = couette(k);
    let catalog = find_all_modes(&cx, 16).unwrap();
    let m = couette_modes(k, 1.0, 1.0, 1.0).unwrap();
    let s0 = eigen_state(&cx, C64::new(m.c_minus, 0.0)).unwrap();
    let run = evolve(&cx, &s0, &catalog, &[1.0, 2.0, 4.0], &EvolveOptions { crosscheck: true, ..Default::default() }).unwrap();
    for row in &run.checkpoints {
        assert!(row.norm_v2c <= 1e-6 && row.norm_v1c <= 1e-6 && row.abs_etac <= 1e-6, "{row:?}");
        assert!(row.split_crosscheck <= 1e-6);
    }
}

#[test]
fn couette_scattering_profile_is_the_vorticity() {
    let cx = couette(1.0);
    let s0 = ModeState { omega: gaussian_vorticity(&cx, -0.5, 0.2, C64::new(1.0, 0.0)), eta: C64::new(0.3, 0.0), b: zero() };
    let prof = asymptotic_profiles(&cx, &s0).unwrap();
    assert_eq!(prof.omega_c, s0.omega);
    assert_eq!(prof.side_difference(), 0.0);
}

#[test]
fn boundary_profiles_vanish_with_their_data() {
    let p = profile(ProfileSpec::tanh_shear(1.0));
    let cx = ctx(&p, 1.0, BcKind::FreeSurface);
    let grid = cx.grid();
    let eta0 = C64::new(0.7, 0.0);
    // omega(-h) = 0 and omega(0) = U''(0) eta0
    let top = p.u(0.0, 2) * eta0;
    let omega: Vec<C64> = grid.iter().map(|&x| top * (x + 1.0) * (x + 1.0).exp() / 1f64.exp()).collect();
    let prof = asymptotic_profiles(&cx, &ModeState { omega: omega.clone(), eta: eta0, b: zero() }).unwrap();
    assert!(prof.lambda_b.iter().all(|v| *v == zero()));
    assert!(prof.lambda_t.iter().all(|v| *v == zero()));
    let shifted: Vec<C64> = omega.iter().map(|w| w + 0.1).collect();
    let prof = asymptotic_profiles(&cx, &ModeState { omega: shifted, eta: eta0, b: zero() }).unwrap();
    assert!(prof.lambda_b.iter().any(|v| *v != zero()));
    assert!(prof.lambda_t.iter().any(|v| *v != zero()));
}

#[test]
fn channel_top_profile_ignores_elevation() {
    let p = profile(ProfileSpec::tanh_shear(1.0));
    let cx = ctx(&p, 1.0, BcKind::Channel);
    let omega: Vec<C64> = cx.grid().iter().map(|&x| C64::new(-x * (x + 1.0), 0.0)).collect();
    let prof = asymptotic_profiles(&cx, &ModeState { omega, eta: C64::new(2.0, 0.0), b: zero() }).unwrap();
    assert!(prof.lambda_t.iter().all(|v| *v == zero()));
}

#[test]
fn decay_fit_fixtures() {
    let ts: Vec<f64> = (1..=400).map(|i| i as f64 * 0.5).collect();
    let pow: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
    let f = fit_decay(&ts, &pow, (10.0, 200.0)).unwrap();
    assert!((f.exponent + 1.5).abs() <= 1e-10);
    let wavy: Vec<f64> = ts.iter().map(|t| t.powi(-2) * (1.0 + 0.1 * t.sin())).collect();
    let f = fit_decay(&ts, &wavy, (20.0, 200.0)).unwrap();
    assert!(f.exponent >= -2.1 && f.exponent <= -1.9, "{}", f.exponent);
    assert!(f.band.0 <= f.exponent && f.exponent <= f.band.1);
    let flat = vec![0.25; ts.len()];
    assert!(fit_decay(&ts, &flat, (5.0, 100.0)).unwrap().exponent.abs() <= 1e-12);
    assert!(fit_decay(&ts, &flat, (50.0, 100.0)).is_err());
}

#[test]
fn checkpoints_must_increase() {
    let cx = couette(1.0);
    let s0 = ModeState::zeros(cx.numerics.grid_n);
    assert!(evolve(&cx, &s0, &[], &[2.0, 1.0], &EvolveOptions::default()).is_err());
    let opts = EvolveOptions { dt: Some(10.0), ..Default::default() };
    assert!(matches!(evolve(&cx, &s0, &[], &[1.0], &opts), Err(shearwave::Error::CflViolation { .. })));
}
