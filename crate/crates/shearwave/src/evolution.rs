//! Time evolution of one Fourier mode of the linearized system, spectral
//! splitting into point and continuous parts, and asymptotic profiles.
//!
//! The state is (omega, eta, b) with b = v2'(0); v2 is recovered from
//! (D^2 - k^2) v2 = i k omega, v2(-h) = 0, v2'(0) = b.

use crate::dispersion::{f_real_limit, FoundMode};
use crate::error::{Error, Result};
use crate::quad::{derivative, integrate_grid, l2_norm, second_derivative};
use crate::rayleigh::{
    limit_real_branch, particular_top, solve_y_minus, top_values, trace_plus, v2_on_diagonal, BcKind, TraceSide,
    WaveContext, Which,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub omega: Vec<C64>,
    pub eta: C64,
    pub b: C64,
}

impl ModeState {
    pub fn zeros(n: usize) -> Self {
        Self { omega: vec![zero(); n], eta: zero(), b: zero() }
    }

    pub fn axpy(&self, a: C64, other: &ModeState) -> ModeState {
        ModeState {
            omega: self.omega.iter().zip(&other.omega).map(|(x, y)| x + a * y).collect(),
            eta: self.eta + a * other.eta,
            b: self.b + a * other.b,
        }
    }

    pub fn scale(&self, a: C64) -> ModeState {
        ModeState { omega: self.omega.iter().map(|x| x * a).collect(), eta: self.eta * a, b: self.b * a }
    }

    /// sqrt(||omega||^2 + |eta|^2 + |b|^2) with grid spacing dx.
    pub fn norm(&self, dx: f64) -> f64 {
        (l2_norm(&self.omega, dx).powi(2) + self.eta.norm_sqr() + self.b.norm_sqr()).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.eta == zero() && self.b == zero() && self.omega.iter().all(|w| *w == zero())
    }
}

/// Prefactored tridiagonal system of the Numerov discretization.
#[derive(Debug, Clone)]
struct Elliptic {
    n: usize,
    dx: f64,
    k: f64,
    channel: bool,
    off: f64,
    top_diag: f64,
    cp: Vec<f64>,
    den: Vec<f64>,
}

impl Elliptic {
    fn new(ctx: &WaveContext) -> Result<Self> {
        if ctx.k == 0.0 {
            return Err(Error::ZeroWavenumber);
        }
        let n = ctx.numerics.grid_n;
        let dx = ctx.grid_dx();
        let k = ctx.k;
        let q = dx * dx * k * k;
        let off = 1.0 - q / 12.0;
        let diag = -2.0 * (1.0 + 5.0 * q / 12.0);
        let channel = ctx.bc == BcKind::Channel;
        let top_diag = if channel { 1.0 } else { -(1.0 + q / 2.0 + q * q / 24.0) };
        // unknowns v_1 .. v_{n-1}
        let m = n - 1;
        let mut cp = vec![0.0; m];
        let mut den = vec![0.0; m];
        for j in 0..m {
            let (sub, d, sup) = if j + 1 == m {
                (if channel { 0.0 } else { 1.0 }, top_diag, 0.0)
            } else {
                (if j == 0 { 0.0 } else { off }, diag, off)
            };
            let prev = if j == 0 { 0.0 } else { cp[j - 1] };
            den[j] = d - sub * prev;
            if !(den[j].abs() > 0.0 && den[j].is_finite()) {
                return Err(Error::SingularElliptic);
            }
            cp[j] = sup / den[j];
        }
        Ok(Self { n, dx, k, channel, off, top_diag, cp, den })
    }

    fn solve(&self, omega: &[C64], b: C64) -> Vec<C64> {
        let (n, dx, k) = (self.n, self.dx, self.k);
        let ik = C64::new(0.0, k);
        let f = |i: usize| omega[i] * ik;
        let m = n - 1;
        let mut d = vec![zero(); m];
        let w = dx * dx / 12.0;
        for (j, dj) in d.iter_mut().enumerate().take(m - 1) {
            let i = j + 1;
            *dj = (f(i - 1) + f(i) * 10.0 + f(i + 1)) * w;
        }
        d[m - 1] = if self.channel {
            zero()
        } else {
            let t = n - 1;
            let (f0, f1, f2, f3, f4) = (f(t), f(t - 1), f(t - 2), f(t - 3), f(t - 4));
            let d1 = (f0 * 25.0 - f1 * 48.0 + f2 * 36.0 - f3 * 16.0 + f4 * 3.0) / (12.0 * dx);
            let d2 = (f0 * 35.0 - f1 * 104.0 + f2 * 114.0 - f3 * 56.0 + f4 * 11.0) / (12.0 * dx * dx);
            let d3 = (f0 * 5.0 - f1 * 18.0 + f2 * 24.0 - f3 * 14.0 + f4 * 3.0) / (2.0 * dx * dx * dx);
            let k2 = k * k;
            let h2 = dx * dx;
            -b * dx + f0 * (h2 / 2.0) - (b * k2 + d1) * (h2 * dx / 6.0) + (f0 * k2 + d2) * (h2 * h2 / 24.0)
                - (b * (k2 * k2) + d1 * k2 + d3) * (h2 * h2 * dx / 120.0)
        };
        let _ = (self.off, self.top_diag);
        for j in 0..m {
            let sub = if j == 0 {
                0.0
            } else if j + 1 == m {
                if self.channel { 0.0 } else { 1.0 }
            } else {
                self.off
            };
            let prev = if j == 0 { zero() } else { d[j - 1] };
            d[j] = (d[j] - prev * sub) / self.den[j];
        }
        for j in (0..m - 1).rev() {
            let next = d[j + 1];
            d[j] -= next * self.cp[j];
        }
        let mut v = Vec::with_capacity(n);
        v.push(zero());
        v.extend(d);
        v
    }
}

/// Velocity (v2, v1) of a vorticity field with surface slope data b.
pub fn recover_velocity(ctx: &WaveContext, omega: &[C64], b: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    if omega.len() != ctx.numerics.grid_n {
        return Err(Error::InvalidSpec(format!("omega has {} samples, grid has {}", omega.len(), ctx.numerics.grid_n)));
    }
    let el = Elliptic::new(ctx)?;
    let v2 = el.solve(omega, b);
    let v1 = velocity_v1(ctx, &v2);
    Ok((v2, v1))
}

fn velocity_v1(ctx: &WaveContext, v2: &[C64]) -> Vec<C64> {
    let f = I / ctx.k;
    derivative(v2, ctx.grid_dx()).into_iter().map(|d| d * f).collect()
}

/// Stable time step bound 0.5 / (|k| max|U| + 1).
pub fn cfl_bound(ctx: &WaveContext) -> f64 {
    let p = &ctx.profile;
    0.5 / (ctx.k.abs() * p.u_max.abs().max(p.u_min.abs()) + 1.0)
}

/// Fixed-k integrator with the elliptic factorization and profile samples
/// cached.
#[derive(Debug, Clone)]
pub struct Evolver {
    ctx: WaveContext,
    el: Elliptic,
    u: Vec<f64>,
    upp: Vec<f64>,
}

impl Evolver {
    pub fn new(ctx: &WaveContext) -> Result<Self> {
        let el = Elliptic::new(ctx)?;
        let grid = ctx.grid();
        let u = grid.iter().map(|&x| ctx.profile.u(x, 0)).collect();
        let upp = grid.iter().map(|&x| ctx.profile.u(x, 2)).collect();
        Ok(Self { ctx: ctx.clone(), el, u, upp })
    }

    pub fn context(&self) -> &WaveContext {
        &self.ctx
    }

    pub fn velocity(&self, s: &ModeState) -> (Vec<C64>, Vec<C64>) {
        let v2 = self.el.solve(&s.omega, s.b);
        let v1 = velocity_v1(&self.ctx, &v2);
        (v2, v1)
    }

    fn rhs(&self, s: &ModeState) -> ModeState {
        let k = self.ctx.k;
        let ik = C64::new(0.0, k);
        let v2 = self.el.solve(&s.omega, s.b);
        let omega = s.omega.iter().enumerate().map(|(i, w)| -ik * self.u[i] * w + v2[i] * self.upp[i]).collect();
        if self.ctx.bc == BcKind::Channel {
            return ModeState { omega, eta: zero(), b: zero() };
        }
        let p = &self.ctx.profile;
        let u0 = p.u_max;
        let v0 = *v2.last().unwrap();
        ModeState {
            omega,
            eta: -ik * u0 * s.eta + v0,
            b: -ik * u0 * s.b + ik * p.u(0.0, 1) * v0 - s.eta * (k * k * self.ctx.gk()),
        }
    }

    /// One classical Runge-Kutta step.
    pub fn step(&self, s: &ModeState, dt: f64) -> Result<ModeState> {
        let bound = cfl_bound(&self.ctx);
        if dt > bound {
            return Err(Error::CflViolation { dt, bound });
        }
        Ok(self.rk4(s, dt))
    }

    fn rk4(&self, s: &ModeState, dt: f64) -> ModeState {
        let h = C64::new(dt, 0.0);
        let k1 = self.rhs(s);
        let k2 = self.rhs(&s.axpy(h * 0.5, &k1));
        let k3 = self.rhs(&s.axpy(h * 0.5, &k2));
        let k4 = self.rhs(&s.axpy(h, &k3));
        let n = s.omega.len();
        let mut out = ModeState::zeros(n);
        for i in 0..n {
            out.omega[i] = s.omega[i] + (k1.omega[i] + (k2.omega[i] + k3.omega[i]) * 2.0 + k4.omega[i]) * (dt / 6.0);
        }
        out.eta = s.eta + (k1.eta + (k2.eta + k3.eta) * 2.0 + k4.eta) * (dt / 6.0);
        out.b = s.b + (k1.b + (k2.b + k3.b) * 2.0 + k4.b) * (dt / 6.0);
        out
    }

    /// Advance by `t` using the largest step <= dt that divides t evenly.
    pub fn advance(&self, s: &ModeState, t: f64, dt: f64) -> Result<ModeState> {
        if t <= 0.0 {
            return Ok(s.clone());
        }
        let n = (t / dt).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let bound = cfl_bound(&self.ctx);
        if h > bound {
            return Err(Error::CflViolation { dt: h, bound });
        }
        let mut cur = s.clone();
        for _ in 0..n {
            cur = self.rk4(&cur, h);
        }
        Ok(cur)
    }
}

/// One Runge-Kutta step of the linearized system.
pub fn step(ctx: &WaveContext, state: &ModeState, dt: f64) -> Result<ModeState> {
    Evolver::new(ctx)?.step(state, dt)
}

/// Normalized y_- on the context grid: values, derivatives, and the scale
/// factor relating them to y_- with y_-'(-h) = 1.
struct NormalizedY {
    y: Vec<C64>,
    dy: Vec<C64>,
    scale: C64,
}

fn normalized_y_minus(ctx: &WaveContext, c: C64) -> Result<NormalizedY> {
    let grid = ctx.grid();
    let t = solve_y_minus(ctx, c, &grid)?;
    let (y0, dy0) = t.last();
    let nrm = if y0.norm() > 1e-12 * dy0.norm() { y0 } else { dy0 };
    Ok(NormalizedY {
        y: t.y.iter().map(|v| v / nrm).collect(),
        dy: t.dy.iter().map(|v| v / nrm).collect(),
        scale: nrm * t.log_scale.exp(),
    })
}

/// State (omega, eta, b) of the normal mode with speed c built on y_-,
/// normalized so that v2(0) = 1 (or v2'(0) = 1 for a channel).
pub fn eigen_state(ctx: &WaveContext, c: C64) -> Result<ModeState> {
    let ny = normalized_y_minus(ctx, c)?;
    Ok(state_from_v2(ctx, c, &ny.y, *ny.dy.last().unwrap()))
}

fn state_from_v2(ctx: &WaveContext, c: C64, v2: &[C64], dv2_top: C64) -> ModeState {
    let grid = ctx.grid();
    let p = &ctx.profile;
    let k = ctx.k;
    let omega = grid
        .iter()
        .zip(v2)
        .map(|(&x, v)| {
            let upp = p.u(x, 2);
            if upp == 0.0 {
                zero()
            } else {
                -(I / k) * upp * v / (C64::new(p.u(x, 0), 0.0) - c)
            }
        })
        .collect();
    if ctx.bc == BcKind::Channel {
        return ModeState { omega, eta: zero(), b: zero() };
    }
    let d = C64::new(p.u_max, 0.0) - c;
    ModeState { omega, eta: *v2.last().unwrap() / (I * k * d), b: dv2_top }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMode {
    pub c: C64,
    /// residue profile b(x2) (the v2 part of the mode)
    pub profile: Vec<C64>,
    pub state: ModeState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSplit {
    pub point_modes: Vec<PointMode>,
    pub continuous: ModeState,
    /// a multiple root was present and skipped
    pub degenerate: bool,
    /// roots on the range of U that were not projected
    pub skipped: Vec<C64>,
}

impl SpectralSplit {
    pub fn point_state(&self, n: usize) -> ModeState {
        let mut s = ModeState::zeros(n);
        for m in &self.point_modes {
            s = s.axpy(C64::new(1.0, 0.0), &m.state);
        }
        s
    }

    /// Point part evolved exactly to time t.
    pub fn point_state_at(&self, n: usize, k: f64, t: f64) -> ModeState {
        let mut s = ModeState::zeros(n);
        for m in &self.point_modes {
            s = s.axpy((-I * k * m.c * t).exp(), &m.state);
        }
        s
    }
}

/// Residue coefficients of the point spectrum for simple roots in `catalog`.
pub fn project_point_modes(ctx: &WaveContext, state0: &ModeState, catalog: &[FoundMode]) -> Result<SpectralSplit> {
    let n = ctx.numerics.grid_n;
    if state0.omega.len() != n {
        return Err(Error::InvalidSpec("state does not match the grid".into()));
    }
    if ctx.k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let mut split = SpectralSplit { point_modes: Vec::new(), continuous: state0.clone(), degenerate: false, skipped: Vec::new() };
    if state0.is_zero() {
        return Ok(split);
    }
    let p = &ctx.profile;
    let k = ctx.k;
    let grid = ctx.grid();
    let dx = ctx.grid_dx();
    for m in catalog {
        if m.multiplicity != 1 {
            split.degenerate = true;
            continue;
        }
        let c = m.c;
        if c.im == 0.0 && c.re >= p.u_min && c.re <= p.u_max {
            split.skipped.push(c);
            continue;
        }
        let ny = normalized_y_minus(ctx, c)?;
        let coef = match ctx.bc {
            BcKind::FreeSurface => {
                let d = C64::new(p.u_max, 0.0) - c;
                let zeta = state0.eta * ctx.gk() - (I / k) * d * state0.b;
                let integrand: Vec<C64> =
                    grid.iter().zip(&ny.y).zip(&state0.omega).map(|((&x, y), w)| y * w / (C64::new(p.u(x, 0), 0.0) - c)).collect();
                let integral = integrate_grid(&integrand, dx);
                -I * k / m.df_dc * (zeta - d * d * integral)
            }
            BcKind::Channel => {
                let psi: Vec<C64> = state0.omega.iter().map(|w| -w).collect();
                let (top, ln_p) = particular_top(ctx, c, &psi)?;
                let tv = top_values(ctx, c, TraceSide::Upper, true)?;
                // b = i k p(0) y_-(x) / d_c y_-(0), with y_- = scale * normalized y
                I * k * top[2] * (ln_p - tv.ln).exp() * ny.scale * (-tv.ln).exp() / tv.yc
            }
        };
        if coef == zero() {
            continue;
        }
        let prof: Vec<C64> = ny.y.iter().map(|y| y * coef).collect();
        let state = state_from_v2(ctx, c, &prof, *ny.dy.last().unwrap() * coef);
        split.continuous = split.continuous.axpy(C64::new(-1.0, 0.0), &state);
        split.point_modes.push(PointMode { c, profile: prof, state });
    }
    Ok(split)
}

/// Diagnostics of the continuous part at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub norm_v2c: f64,
    pub norm_v1c: f64,
    pub abs_etac: f64,
    pub scatter_err: f64,
    pub split_crosscheck: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// default min(1e-3, CFL bound)
    pub dt: Option<f64>,
    /// also evolve the full state and compare with the split evolution
    pub crosscheck: bool,
    /// rerun at dt/2 and report the largest relative change of the diagnostics
    pub richardson: bool,
    /// scattering profile for the scatter_err column
    pub omega_c: Option<Vec<C64>>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { dt: None, crosscheck: true, richardson: false, omega_c: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRun {
    pub dt: f64,
    pub split: SpectralSplit,
    pub checkpoints: Vec<Checkpoint>,
    /// continuous state at the last checkpoint
    pub final_continuous: ModeState,
    pub richardson_change: Option<f64>,
}

fn run_continuous(
    ev: &Evolver,
    s0: &ModeState,
    checkpoints: &[f64],
    dt: f64,
    omega_c: Option<&[C64]>,
) -> Result<(Vec<Checkpoint>, Vec<ModeState>)> {
    let ctx = ev.context();
    let dx = ctx.grid_dx();
    let k = ctx.k;
    let mut t = 0.0;
    let mut cur = s0.clone();
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut states = Vec::with_capacity(checkpoints.len());
    for &tc in checkpoints {
        cur = ev.advance(&cur, tc - t, dt)?;
        t = tc;
        let (v2, v1) = ev.velocity(&cur);
        let scatter_err = match omega_c {
            Some(oc) => {
                let diff: Vec<C64> =
                    cur.omega.iter().zip(&ev.u).zip(oc).map(|((w, u), o)| w * (I * k * u * t).exp() - o).collect();
                l2_norm(&diff, dx)
            }
            None => f64::NAN,
        };
        rows.push(Checkpoint {
            t,
            norm_v2c: l2_norm(&v2, dx),
            norm_v1c: l2_norm(&v1, dx),
            abs_etac: cur.eta.norm(),
            scatter_err,
            split_crosscheck: f64::NAN,
        });
        states.push(cur.clone());
    }
    Ok((rows, states))
}

/// Split `state0` with `catalog`, evolve the continuous part and record
/// diagnostics at increasing `checkpoints`.
pub fn evolve(
    ctx: &WaveContext,
    state0: &ModeState,
    catalog: &[FoundMode],
    checkpoints: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionRun> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| !(w[1] > w[0])) || checkpoints[0] < 0.0 {
        return Err(Error::InvalidSpec("checkpoints must be nonnegative and increasing".into()));
    }
    let ev = Evolver::new(ctx)?;
    let bound = cfl_bound(ctx);
    let dt = opts.dt.unwrap_or(1e-3f64.min(bound));
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec("dt must be positive".into()));
    }
    if dt > bound {
        return Err(Error::CflViolation { dt, bound });
    }
    let split = project_point_modes(ctx, state0, catalog)?;
    let n = ctx.numerics.grid_n;
    let dx = ctx.grid_dx();
    let oc = opts.omega_c.as_deref();
    let (main, full, half) = {
        let (a, (b, c)) = rayon::join(
            || run_continuous(&ev, &split.continuous, checkpoints, dt, oc),
            || {
                rayon::join(
                    || if opts.crosscheck { Some(run_continuous(&ev, state0, checkpoints, dt, None)) } else { None },
                    || if opts.richardson { Some(run_continuous(&ev, &split.continuous, checkpoints, dt / 2.0, oc)) } else { None },
                )
            },
        );
        (a?, b.transpose()?, c.transpose()?)
    };
    let (mut rows, states) = main;
    if let Some((_, full_states)) = full {
        let ref_norm = state0.norm(dx).max(1e-300);
        for (i, row) in rows.iter_mut().enumerate() {
            let pt = split.point_state_at(n, ctx.k, row.t);
            let diff = full_states[i].axpy(C64::new(-1.0, 0.0), &pt).axpy(C64::new(-1.0, 0.0), &states[i]);
            row.split_crosscheck = diff.norm(dx) / ref_norm;
        }
    }
    let richardson_change = half.map(|(hrows, _)| {
        let rel = |a: f64, b: f64| if a.max(b) > 0.0 { (a - b).abs() / a.abs().max(b.abs()) } else { 0.0 };
        rows.iter()
            .zip(&hrows)
            .map(|(a, b)| rel(a.norm_v2c, b.norm_v2c).max(rel(a.norm_v1c, b.norm_v1c)).max(rel(a.abs_etac, b.abs_etac)))
            .fold(0.0, f64::max)
    });
    Ok(EvolutionRun { dt, split, checkpoints: rows, final_continuous: states.last().unwrap().clone(), richardson_change })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticProfiles {
    pub grid: Vec<f64>,
    pub omega_c: Vec<C64>,
    /// same profile built from the c_I -> 0- limit
    pub omega_c_lower: Vec<C64>,
    pub lambda_t: Vec<C64>,
    pub lambda_b: Vec<C64>,
}

impl AsymptoticProfiles {
    /// Relative L2 distance between the two one-sided scattering profiles.
    pub fn side_difference(&self) -> f64 {
        let dx = self.grid[1] - self.grid[0];
        let d: Vec<C64> = self.omega_c.iter().zip(&self.omega_c_lower).map(|(a, b)| a - b).collect();
        l2_norm(&d, dx) / l2_norm(&self.omega_c, dx).max(1e-300)
    }
}

/// Scan the range of U for roots of the boundary form (singular modes).
pub fn singular_mode_scan(ctx: &WaveContext) -> Result<Option<f64>> {
    let p = &ctx.profile;
    let n = 256;
    let cs: Vec<f64> = (0..=n).map(|i| p.u_min + (p.u_max - p.u_min) * i as f64 / n as f64).collect();
    let gk = ctx.gk();
    let val = |c: f64| -> Result<f64> {
        let f = f_real_limit(ctx, c)?;
        Ok(match ctx.bc {
            BcKind::FreeSurface => f.norm() / gk,
            BcKind::Channel => f.norm(),
        })
    };
    let vals: Vec<f64> = cs.par_iter().map(|&c| val(c)).collect::<Result<_>>()?;
    for i in 0..=n {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i == n { f64::INFINITY } else { vals[i + 1] };
        if vals[i] > left || vals[i] > right {
            continue;
        }
        let (mut a, mut b) = (cs[i.saturating_sub(1)], cs[(i + 1).min(n)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut best = (cs[i], vals[i]);
        for _ in 0..60 {
            if b - a < 1e-13 * (1.0 + b.abs()) {
                break;
            }
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            let (f1, f2) = (val(x1)?, val(x2)?);
            if f1 < f2 {
                b = x2;
                if f1 < best.1 {
                    best = (x1, f1);
                }
            } else {
                a = x1;
                if f2 < best.1 {
                    best = (x2, f2);
                }
            }
        }
        if best.1 < 1e-7 {
            return Ok(Some(best.0));
        }
    }
    Ok(None)
}

/// Scattering profile and boundary profiles of the continuous spectrum.
pub fn asymptotic_profiles(ctx: &WaveContext, state0: &ModeState) -> Result<AsymptoticProfiles> {
    if ctx.k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    if state0.omega.len() != ctx.numerics.grid_n {
        return Err(Error::InvalidSpec("state does not match the grid".into()));
    }
    if let Some(c_r) = singular_mode_scan(ctx)? {
        return Err(Error::SingularModePresent { c_r });
    }
    let p = &ctx.profile;
    let grid = ctx.grid();
    let k = ctx.k;
    let n = grid.len();
    let curved = grid.iter().any(|&x| p.u(x, 2) != 0.0);
    let (omega_c, omega_c_lower) = if curved {
        let up = v2_on_diagonal(ctx, &state0.omega, state0.eta, state0.b, TraceSide::LimitPlus)?;
        let lo = v2_on_diagonal(ctx, &state0.omega, state0.eta, state0.b, TraceSide::LimitMinus)?;
        let mk = |v: &[C64]| -> Vec<C64> { grid.iter().enumerate().map(|(i, &x)| state0.omega[i] + v[i] * p.u(x, 2)).collect() };
        (mk(&up), mk(&lo))
    } else {
        (state0.omega.clone(), state0.omega.clone())
    };
    let w_top = *state0.omega.last().unwrap();
    let w_bot = state0.omega[0];
    let s_top = match ctx.bc {
        BcKind::FreeSurface => -(I / k) * (state0.eta * p.u(0.0, 2) - w_top),
        BcKind::Channel => (I / k) * w_top,
    };
    let lambda_t = if s_top == zero() {
        vec![zero(); n]
    } else {
        let t = limit_real_branch(ctx, p.u_max, &grid, Which::Minus, TraceSide::LimitPlus)?;
        let y0 = *t.y.last().unwrap();
        let up0 = p.u(0.0, 1);
        t.y.iter().map(|y| s_top * y / (up0 * up0 * y0)).collect()
    };
    let lambda_b = if w_bot == zero() {
        vec![zero(); n]
    } else {
        let c = C64::new(p.u_min, 0.0);
        let tp = trace_plus(ctx, c, &grid, TraceSide::LimitPlus)?;
        // y_+(-h) from the surface Wronskian with y_-
        let tv = top_values(ctx, c, TraceSide::LimitPlus, false)?;
        let yp0 = *tp.y.last().unwrap();
        let dyp0 = *tp.dy.last().unwrap();
        let w = (yp0 * tv.dy - dyp0 * tv.y) * tv.ln.exp();
        let upb = p.u(-p.h, 1);
        let s = (I / k) * w_bot / (upb * upb * w);
        tp.y.iter().map(|y| s * y).collect()
    };
    Ok(AsymptoticProfiles { grid, omega_c, omega_c_lower, lambda_t, lambda_b })
}

/// Interior residuals of (U - U(xs))(L'' - k^2 L) - U'' L = 0 relative to
/// ||L||, excluding points within `exclude` of the critical end xs.
pub fn lambda_residual(ctx: &WaveContext, lambda: &[C64], at_top: bool, exclude: f64) -> f64 {
    let p = &ctx.profile;
    let grid = ctx.grid();
    let dx = ctx.grid_dx();
    let nrm = l2_norm(lambda, dx);
    if nrm == 0.0 {
        return 0.0;
    }
    let d2 = second_derivative(lambda, dx);
    let (xs, us) = if at_top { (0.0, p.u_max) } else { (-p.h, p.u_min) };
    let k2 = ctx.k * ctx.k;
    let mut worst: f64 = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        if (x - xs).abs() <= exclude || i < 2 || i + 2 >= grid.len() {
            continue;
        }
        let du = p.u(x, 0) - us;
        let r = (d2[i] - lambda[i] * k2) * du - lambda[i] * p.u(x, 2);
        worst = worst.max(r.norm());
    }
    worst / nrm
}

/// ||t^2 v2 - profile sum|| / ||t^2 v2|| for the three-term long-time form.
pub fn reconstruction_error(ctx: &WaveContext, prof: &AsymptoticProfiles, v2: &[C64], t: f64) -> f64 {
    let p = &ctx.profile;
    let k = ctx.k;
    let dx = ctx.grid_dx();
    let t2 = t * t;
    let et = (-I * k * p.u_max * t).exp();
    let eb = (-I * k * p.u_min * t).exp();
    let mut lhs = Vec::with_capacity(v2.len());
    let mut diff = Vec::with_capacity(v2.len());
    for (i, &x) in prof.grid.iter().enumerate() {
        let up = p.u(x, 1);
        let a = v2[i] * t2;
        let model = -(I / (k * up * up)) * (-I * k * p.u(x, 0) * t).exp() * prof.omega_c[i] + et * prof.lambda_t[i] + eb * prof.lambda_b[i];
        lhs.push(a);
        diff.push(a - model);
    }
    l2_norm(&diff, dx) / l2_norm(&lhs, dx).max(1e-300)
}

/// Power-law fit of a positive series over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub band: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of ln(value) against ln(t) over `window`, with a
/// +-2 standard error band.
pub fn fit_decay(ts: &[f64], vals: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (t1, t2) = window;
    if !(t1 > 0.0 && t2 >= 4.0 * t1) {
        return Err(Error::EmptyWindow);
    }
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(vals)
        .filter(|(t, v)| **t >= t1 && **t <= t2 && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return Err(Error::EmptyWindow);
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::EmptyWindow);
    }
    let slope = sxy / sxx;
    let se = if n > 2 {
        let ssr: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(DecayFit { exponent: slope, band: (slope - 2.0 * se, slope + 2.0 * se), points: n })
}

/// Gaussian vorticity exp(-((x2 - center)/width)^2) * amplitude on the grid.
pub fn gaussian_vorticity(ctx: &WaveContext, center: f64, width: f64, amplitude: C64) -> Vec<C64> {
    ctx.grid().iter().map(|&x| amplitude * (-((x - center) / width).powi(2)).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, ProfileSpec};
    use crate::rayleigh::Numerics;
    use std::sync::Arc;

    fn ctx(spec: ProfileSpec, k: f64, n: usize) -> WaveContext {
        let p = Arc::new(build_profile(&spec).unwrap());
        let num = Numerics { grid_n: n, ..Numerics::default() };
        WaveContext::new(p, k, 1.0, 1.0, BcKind::FreeSurface, num).unwrap()
    }

    #[test]
    fn harmonic_recovery() {
        let c = ctx(ProfileSpec::couette(1.0), 1.5, 257);
        let (v2, _) = recover_velocity(&c, &vec![zero(); 257], C64::new(1.5 * (1.5f64).cosh(), 0.0)).unwrap();
        for (i, &x) in c.grid().iter().enumerate() {
            assert!((v2[i].re - (1.5 * (x + 1.0)).sinh()).abs() < 1e-9);
        }
    }

    #[test]
    fn manufactured_recovery_is_fourth_order() {
        let mut errs = Vec::new();
        for n in [129usize, 257] {
            let c = ctx(ProfileSpec::couette(1.0), 2.0, n);
            let pi = std::f64::consts::PI;
            let v = |x: f64| (pi * (x + 1.0)).sin() * (x + 1.0);
            let vpp = |x: f64| 2.0 * pi * (pi * (x + 1.0)).cos() - pi * pi * (pi * (x + 1.0)).sin() * (x + 1.0);
            let om: Vec<C64> = c.grid().iter().map(|&x| C64::new(vpp(x) - 4.0 * v(x), 0.0) / C64::new(0.0, 2.0)).collect();
            let b = C64::new(pi * (pi).cos() + pi.sin(), 0.0);
            let (v2, _) = recover_velocity(&c, &om, b).unwrap();
            let e = c.grid().iter().enumerate().map(|(i, &x)| (v2[i] - v(x)).norm()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < errs[0] / 10.0, "{errs:?}");
    }

    #[test]
    fn fit_exact_power() {
        let ts: Vec<f64> = (1..=50).map(|i| i as f64 * 4.0).collect();
        let vs: Vec<f64> = ts.iter().map(|t| t.powf(-1.5)).collect();
        let f = fit_decay(&ts, &vs, (20.0, 200.0)).unwrap();
        assert!((f.exponent + 1.5).abs() < 1e-10);
        assert_eq!(fit_decay(&ts, &vs, (20.0, 60.0)), Err(Error::EmptyWindow));
    }
}
