//! Shooting solver for the Rayleigh equation -y'' + (k^2 + U''/(U - c)) y = f
//! on [-h, 0], including the real-c limit across a critical layer.

use crate::error::{Error, Result};
use crate::local::{Branch, Frobenius};
use crate::ode::{integrate, OdeOptions};
use crate::profile::ShearProfile;
use crate::quad::GridInterp;
use num_complex::Complex64 as C64;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    FreeSurface,
    Channel,
}

impl std::str::FromStr for BcKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free_surface" => Ok(Self::FreeSurface),
            "channel" => Ok(Self::Channel),
            other => Err(Error::InvalidSpec(format!("unknown bc kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub grid_n: usize,
    pub ode_tol: f64,
    pub delta_cl: f64,
    pub eps_seq: Vec<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { grid_n: 1024, ode_tol: 1e-10, delta_cl: 1e-4, eps_seq: vec![1e-3, 5e-4, 2.5e-4] }
    }
}

/// Parameters of one Fourier mode.
#[derive(Debug, Clone)]
pub struct WaveContext {
    pub profile: Arc<ShearProfile>,
    pub k: f64,
    pub g: f64,
    pub sigma: f64,
    pub bc: BcKind,
    pub numerics: Numerics,
}

impl WaveContext {
    pub fn new(profile: Arc<ShearProfile>, k: f64, g: f64, sigma: f64, bc: BcKind, numerics: Numerics) -> Result<Self> {
        let ctx = Self { profile, k, g, sigma, bc, numerics };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        if !self.k.is_finite() {
            return Err(Error::InvalidSpec("k must be finite".into()));
        }
        if self.bc == BcKind::FreeSurface && !(self.g > 0.0 && self.sigma > 0.0) {
            return Err(Error::InvalidSpec("g and sigma must be positive".into()));
        }
        if n.grid_n < 64 {
            return Err(Error::InvalidSpec("grid_n must be at least 64".into()));
        }
        if !(n.delta_cl > 0.0 && n.ode_tol > 0.0) {
            return Err(Error::InvalidSpec("delta_cl and ode_tol must be positive".into()));
        }
        if n.eps_seq.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidSpec("eps_seq entries must be positive".into()));
        }
        Ok(())
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..self.clone() }
    }

    /// mu = (1 + k^2)^(-1/2)
    pub fn mu(&self) -> f64 {
        1.0 / (1.0 + self.k * self.k).sqrt()
    }

    /// g + sigma k^2
    pub fn gk(&self) -> f64 {
        self.g + self.sigma * self.k * self.k
    }

    pub fn h(&self) -> f64 {
        self.profile.h
    }

    pub fn delta(&self) -> f64 {
        self.numerics.delta_cl * self.mu()
    }

    /// Uniform grid of `grid_n` points on [-h, 0].
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.h(), self.numerics.grid_n)
    }

    pub fn grid_dx(&self) -> f64 {
        self.h() / (self.numerics.grid_n - 1) as f64
    }

    pub(crate) fn in_range(&self, c: C64) -> bool {
        c.im == 0.0 && c.re >= self.profile.u_min && c.re <= self.profile.u_max
    }
}

pub fn uniform_grid(h: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { 0.0 } else { -h + h * i as f64 / (n - 1) as f64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSide {
    Upper,
    Lower,
    LimitPlus,
    LimitMinus,
    RealRegular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalInfo {
    pub x2c: f64,
    pub jump_applied: bool,
}

/// Sampled solution; true values are `y * exp(log_scale)`.
#[derive(Debug, Clone)]
pub struct RayleighTrace {
    pub c: C64,
    pub grid: Vec<f64>,
    pub y: Vec<C64>,
    pub dy: Vec<C64>,
    pub log_scale: f64,
    pub side: TraceSide,
    pub critical: Option<CriticalInfo>,
}

impl RayleighTrace {
    /// Values rescaled to true magnitude.
    pub fn true_y(&self) -> Vec<C64> {
        let s = self.log_scale.exp();
        self.y.iter().map(|v| v * s).collect()
    }

    pub fn true_dy(&self) -> Vec<C64> {
        let s = self.log_scale.exp();
        self.dy.iter().map(|v| v * s).collect()
    }

    pub fn last(&self) -> (C64, C64) {
        (*self.y.last().unwrap(), *self.dy.last().unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pairing {
    Homogeneous,
    Sensitivity,
    Source,
}

/// One march of the Rayleigh system at fixed (k, c).
pub(crate) struct Shooter<'a> {
    ctx: &'a WaveContext,
    c: C64,
    mode: Pairing,
    src: Option<&'a GridInterp>,
    layer: Option<Frobenius>,
    opts: OdeOptions,
    kappa: f64,
    zmode: bool,
}

type Stop<const N: usize> = ([C64; N], f64);

impl<'a> Shooter<'a> {
    pub fn new(ctx: &'a WaveContext, c: C64, branch: Branch, mode: Pairing, src: Option<&'a GridInterp>) -> Result<Self> {
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::InvalidSpec("non-finite c".into()));
        }
        let p = &ctx.profile;
        let thr = 1e-3 * ctx.mu() * ctx.numerics.delta_cl;
        if c.im != 0.0 && c.im.abs() < thr && c.re >= p.u_min - thr && c.re <= p.u_max + thr {
            return Err(Error::NearSingular { c_re: c.re, c_im: c.im });
        }
        let mut layer = None;
        if ctx.in_range(c) {
            if mode == Pairing::Sensitivity {
                return Err(Error::NotApplicable("c-derivative march through a critical layer".into()));
            }
            let xc = p.inverse_u(c.re)?.clamp(-p.h, 0.0);
            if p.u(xc, 1) < 1e-8 {
                return Err(Error::DegenerateLayer { x2: xc });
            }
            let taylor = src.map(|s| {
                let d = s.eval(xc);
                vec![d[0], d[1], d[2] * 0.5, d[3] / 6.0]
            });
            layer = Some(Frobenius::new(p, ctx.k, xc, branch, taylor.as_deref()));
        }
        let tol = ctx.numerics.ode_tol;
        let kappa = ctx.k.abs();
        Ok(Self {
            ctx,
            c,
            mode,
            src,
            layer,
            opts: OdeOptions { rtol: tol, atol: tol * 1e-2, h_max: p.h / 8.0 },
            kappa,
            zmode: kappa > 8.0,
        })
    }

    pub fn layer(&self) -> Option<&Frobenius> {
        self.layer.as_ref()
    }

    #[inline]
    fn rhs<const N: usize>(&self, x: f64, s: &[C64; N], xa: f64, dir: f64, src_scale: f64) -> [C64; N] {
        let (u, upp) = self.ctx.profile.u_and_upp(x);
        let du = C64::new(u, 0.0) - self.c;
        let q = upp / du;
        let k2 = self.kappa * self.kappa;
        let sl: &[C64] = &s[..];
        let mut out = [C64::new(0.0, 0.0); N];
        let o: &mut [C64] = &mut out[..];
        if !self.zmode {
            o[0] = sl[1];
            o[1] = sl[0] * (k2 + q);
            if N == 4 {
                let extra = match self.mode {
                    Pairing::Sensitivity => sl[0] * (q / du),
                    Pairing::Source => -self.src.unwrap().value(x) / du * src_scale,
                    Pairing::Homogeneous => C64::new(0.0, 0.0),
                };
                o[2] = sl[3];
                o[3] = sl[2] * (k2 + q) + extra;
            }
        } else {
            let kap = self.kappa;
            let y0 = (sl[0] - sl[1]) / (2.0 * kap);
            let q0 = y0 * q;
            o[0] = q0 + sl[0] * ((1.0 - dir) * kap);
            o[1] = q0 - sl[1] * ((1.0 + dir) * kap);
            if N == 4 {
                let y1 = (sl[2] - sl[3]) / (2.0 * kap);
                let extra = match self.mode {
                    Pairing::Sensitivity => y0 * (q / du),
                    Pairing::Source => {
                        -self.src.unwrap().value(x) / du * (src_scale * (-kap * (x - xa).abs()).exp())
                    }
                    Pairing::Homogeneous => C64::new(0.0, 0.0),
                };
                let q1 = y1 * q + extra;
                o[2] = q1 + sl[2] * ((1.0 - dir) * kap);
                o[3] = q1 - sl[3] * ((1.0 + dir) * kap);
            }
        }
        out
    }

    fn to_w<const N: usize>(&self, s: &[C64; N]) -> [C64; N] {
        let mut w = *s;
        for p in 0..N / 2 {
            let (y, dy) = (s[2 * p], s[2 * p + 1]);
            w[2 * p] = dy + y * self.kappa;
            w[2 * p + 1] = dy - y * self.kappa;
        }
        w
    }

    fn from_w<const N: usize>(&self, w: &[C64; N]) -> [C64; N] {
        let mut s = *w;
        for p in 0..N / 2 {
            let (a, b) = (w[2 * p], w[2 * p + 1]);
            s[2 * p] = (a - b) / (2.0 * self.kappa);
            s[2 * p + 1] = (a + b) * 0.5;
        }
        s
    }

    /// Regular march from xa to xb with chunked exponential rescaling.
    fn advance<const N: usize>(&self, xa: f64, xb: f64, st: &mut [C64; N], ln: &mut f64, h: &mut f64) -> Result<()> {
        if xa == xb {
            return Ok(());
        }
        let chunk = 30.0 / self.kappa.max(1.0);
        let n = ((xb - xa).abs() / chunk).ceil().max(1.0) as usize;
        let dir = (xb - xa).signum();
        for i in 0..n {
            let x0 = xa + (xb - xa) * i as f64 / n as f64;
            let x1 = if i + 1 == n { xb } else { xa + (xb - xa) * (i + 1) as f64 / n as f64 };
            let src_scale = (-*ln).exp();
            if self.zmode {
                let w0 = self.to_w(st);
                let mut f = |x: f64, s: &[C64; N]| self.rhs(x, s, x0, dir, src_scale);
                let w1 = integrate(&mut f, x0, w0, x1, &self.opts, h)?;
                *st = self.from_w(&w1);
                *ln += self.kappa * (x1 - x0).abs();
            } else {
                let mut f = |x: f64, s: &[C64; N]| self.rhs(x, s, x0, dir, src_scale);
                *st = integrate(&mut f, x0, *st, x1, &self.opts, h)?;
            }
            renormalize(st, ln);
        }
        Ok(())
    }

    /// Series coefficients matching the state at s.
    fn cross_coeffs<const N: usize>(&self, fr: &Frobenius, s: f64, st: &[C64; N], ln: f64) -> [(C64, C64); 2] {
        let sl: &[C64] = &st[..];
        let c0 = fr.match_homogeneous(s, sl[0], sl[1]);
        let mut c1 = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        if N == 4 {
            let sc = (-ln).exp();
            let pp = fr.particular(s);
            c1 = fr.match_homogeneous(s, sl[2] - pp.phi * sc, sl[3] - pp.dphi * sc);
        }
        [c0, c1]
    }

    fn series_state<const N: usize>(&self, fr: &Frobenius, co: &[(C64, C64); 2], s: f64, ln: f64) -> [C64; N] {
        let r = fr.regular(s);
        let q = fr.singular(s);
        let mut out = [C64::new(0.0, 0.0); N];
        let o: &mut [C64] = &mut out[..];
        o[0] = co[0].0 * r.phi + co[0].1 * q.phi;
        o[1] = co[0].0 * r.dphi + co[0].1 * q.dphi;
        if N == 4 {
            let sc = (-ln).exp();
            let pp = fr.particular(s);
            o[2] = co[1].0 * r.phi + co[1].1 * q.phi + pp.phi * sc;
            o[3] = co[1].0 * r.dphi + co[1].1 * q.dphi + pp.dphi * sc;
        }
        out
    }

    /// March from x0 to x_end recording the scaled state at each stop
    /// (stops ordered in the direction of travel).
    pub fn shoot<const N: usize>(&self, x0: f64, init: [C64; N], x_end: f64, stops: &[f64]) -> Result<(Vec<Stop<N>>, Stop<N>)> {
        if N == 4 && self.mode == Pairing::Source && self.src.is_none() {
            return Err(Error::InvalidSpec("source march without forcing".into()));
        }
        let dir = if x_end >= x0 { 1.0 } else { -1.0 };
        let mut st = init;
        let mut ln = 0.0;
        let mut h = 0.0;
        let mut x = x0;
        let mut out = Vec::with_capacity(stops.len());
        let mut idx = 0;
        let before = |a: f64, b: f64| dir * (a - b) < 0.0;
        if let Some(fr) = &self.layer {
            let d = self.ctx.delta();
            let (mut x_in, mut x_out) = if dir > 0.0 { (fr.xc - d, fr.xc + d) } else { (fr.xc + d, fr.xc - d) };
            if before(x_in, x0) {
                x_in = x0;
            }
            if before(x_end, x_out) {
                x_out = x_end;
            }
            if before(x_in, x_end) || x_in == x_end {
                while idx < stops.len() && before(stops[idx], x_in) {
                    self.advance(x, stops[idx], &mut st, &mut ln, &mut h)?;
                    x = stops[idx];
                    out.push((st, ln));
                    idx += 1;
                }
                self.advance(x, x_in, &mut st, &mut ln, &mut h)?;
                let co = self.cross_coeffs(fr, x_in - fr.xc, &st, ln);
                while idx < stops.len() && !before(x_out, stops[idx]) {
                    out.push((self.series_state(fr, &co, stops[idx] - fr.xc, ln), ln));
                    idx += 1;
                }
                st = self.series_state(fr, &co, x_out - fr.xc, ln);
                renormalize(&mut st, &mut ln);
                x = x_out;
                h = 0.0;
            }
        }
        while idx < stops.len() {
            self.advance(x, stops[idx], &mut st, &mut ln, &mut h)?;
            x = stops[idx];
            out.push((st, ln));
            idx += 1;
        }
        self.advance(x, x_end, &mut st, &mut ln, &mut h)?;
        Ok((out, (st, ln)))
    }
}

fn renormalize<const N: usize>(st: &mut [C64; N], ln: &mut f64) {
    let m = st.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    if m > 1e50 || (m < 1e-50 && m > 0.0) {
        for v in st.iter_mut() {
            *v /= m;
        }
        *ln += m.ln();
    }
}

fn branch_of(side: TraceSide) -> Branch {
    if side == TraceSide::LimitMinus {
        Branch::Minus
    } else {
        Branch::Plus
    }
}

fn side_for(ctx: &WaveContext, c: C64, limit: TraceSide) -> TraceSide {
    if ctx.in_range(c) {
        limit
    } else if c.im > 0.0 {
        TraceSide::Upper
    } else if c.im < 0.0 {
        TraceSide::Lower
    } else {
        TraceSide::RealRegular
    }
}

fn check_grid(ctx: &WaveContext, grid: &[f64]) -> Result<()> {
    let h = ctx.h();
    if grid.is_empty() {
        return Err(Error::InvalidSpec("empty grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidSpec("grid must be strictly increasing".into()));
        }
    }
    if grid[0] < -h - 1e-12 || *grid.last().unwrap() > 1e-12 {
        return Err(Error::OutOfDomain { x2: grid[0].min(*grid.last().unwrap()), lo: -h, hi: 0.0 });
    }
    Ok(())
}

/// Convert recorded stops into a trace normalized by the largest log scale.
fn build_trace<const N: usize>(
    c: C64,
    grid: &[f64],
    stops: &[Stop<N>],
    pair: usize,
    side: TraceSide,
    critical: Option<CriticalInfo>,
) -> RayleighTrace {
    let lmax = stops.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut y = Vec::with_capacity(stops.len());
    let mut dy = Vec::with_capacity(stops.len());
    for (st, ln) in stops {
        let f = (ln - lmax).exp();
        y.push(st[2 * pair] * f);
        dy.push(st[2 * pair + 1] * f);
    }
    RayleighTrace { c, grid: grid.to_vec(), y, dy, log_scale: lmax, side, critical }
}

fn y_minus_init<const N: usize>() -> [C64; N] {
    let mut s = [C64::new(0.0, 0.0); N];
    s[1] = C64::new(1.0, 0.0);
    s
}

/// Initial data of y_+ at the surface.
pub(crate) fn y_plus_top(ctx: &WaveContext, c: C64) -> (C64, C64) {
    match ctx.bc {
        BcKind::Channel => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        BcKind::FreeSurface => {
            let p = &ctx.profile;
            let d = C64::new(p.u_max, 0.0) - c;
            let gk = ctx.gk();
            (d * d / gk, 1.0 + d * (p.u(0.0, 1) / gk))
        }
    }
}

fn critical_of(sh: &Shooter) -> Option<CriticalInfo> {
    sh.layer().map(|f| CriticalInfo { x2c: f.xc, jump_applied: f.coef_c != 0.0 })
}

pub(crate) fn trace_minus(ctx: &WaveContext, c: C64, grid: &[f64], side: TraceSide) -> Result<RayleighTrace> {
    check_grid(ctx, grid)?;
    let side = side_for(ctx, c, side);
    let sh = Shooter::new(ctx, c, branch_of(side), Pairing::Homogeneous, None)?;
    let (stops, _) = sh.shoot::<2>(-ctx.h(), y_minus_init(), *grid.last().unwrap(), grid)?;
    Ok(build_trace(c, grid, &stops, 0, side, critical_of(&sh)))
}

pub(crate) fn trace_plus(ctx: &WaveContext, c: C64, grid: &[f64], side: TraceSide) -> Result<RayleighTrace> {
    check_grid(ctx, grid)?;
    let side = side_for(ctx, c, side);
    let sh = Shooter::new(ctx, c, branch_of(side), Pairing::Homogeneous, None)?;
    let (y0, dy0) = y_plus_top(ctx, c);
    let rev: Vec<f64> = grid.iter().rev().copied().collect();
    let (mut stops, _) = sh.shoot::<2>(0.0, [y0, dy0], rev[rev.len() - 1], &rev)?;
    stops.reverse();
    Ok(build_trace(c, grid, &stops, 0, side, critical_of(&sh)))
}

/// y_- with y(-h) = 0, y'(-h) = 1.
pub fn solve_y_minus(ctx: &WaveContext, c: C64, grid: &[f64]) -> Result<RayleighTrace> {
    trace_minus(ctx, c, grid, TraceSide::LimitPlus)
}

/// y_+ with the surface data (or y(0) = 0, y'(0) = 1 for a channel).
pub fn solve_y_plus(ctx: &WaveContext, c: C64, grid: &[f64]) -> Result<RayleighTrace> {
    trace_plus(ctx, c, grid, TraceSide::LimitPlus)
}

/// The c_I -> 0+ limit at real c_R in the range of U.
pub fn limit_real(ctx: &WaveContext, c_r: f64, grid: &[f64], which: Which) -> Result<RayleighTrace> {
    limit_real_branch(ctx, c_r, grid, which, TraceSide::LimitPlus)
}

/// As `limit_real`, with the side of approach given explicitly.
pub fn limit_real_branch(ctx: &WaveContext, c_r: f64, grid: &[f64], which: Which, side: TraceSide) -> Result<RayleighTrace> {
    let p = &ctx.profile;
    if !(c_r >= p.u_min && c_r <= p.u_max) {
        return Err(Error::OutOfRange { c: c_r, lo: p.u_min, hi: p.u_max });
    }
    let c = C64::new(c_r, 0.0);
    match which {
        Which::Minus => trace_minus(ctx, c, grid, side),
        Which::Plus => trace_plus(ctx, c, grid, side),
    }
}

/// Values at the surface of y_- and optionally dy_-/dc, sharing one scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TopValues {
    pub y: C64,
    pub dy: C64,
    pub yc: C64,
    pub dyc: C64,
    pub ln: f64,
}

pub(crate) fn top_values(ctx: &WaveContext, c: C64, side: TraceSide, sens: bool) -> Result<TopValues> {
    let side = side_for(ctx, c, side);
    let br = branch_of(side);
    let h = ctx.h();
    if sens && !ctx.in_range(c) {
        let sh = Shooter::new(ctx, c, br, Pairing::Sensitivity, None)?;
        let (_, (s, ln)) = sh.shoot::<4>(-h, y_minus_init(), 0.0, &[])?;
        Ok(TopValues { y: s[0], dy: s[1], yc: s[2], dyc: s[3], ln })
    } else {
        let sh = Shooter::new(ctx, c, br, Pairing::Homogeneous, None)?;
        let (_, (s, ln)) = sh.shoot::<2>(-h, y_minus_init(), 0.0, &[])?;
        let z = C64::new(0.0, 0.0);
        Ok(TopValues { y: s[0], dy: s[1], yc: z, dyc: z, ln })
    }
}

fn particular_trace(
    ctx: &WaveContext,
    c: C64,
    psi: &GridInterp,
    grid: &[f64],
    side: TraceSide,
) -> Result<(Vec<Stop<4>>, Option<CriticalInfo>)> {
    let sh = Shooter::new(ctx, c, branch_of(side), Pairing::Source, Some(psi))?;
    let (stops, _) = sh.shoot::<4>(-ctx.h(), y_minus_init(), 0.0, grid)?;
    Ok((stops, critical_of(&sh)))
}

/// Surface values of (y_-, y_-', p, p') for the forced problem, with the
/// common log scale.
pub(crate) fn particular_top(ctx: &WaveContext, c: C64, psi: &[C64]) -> Result<([C64; 4], f64)> {
    let interp = psi_interp(ctx, psi)?;
    let side = side_for(ctx, c, TraceSide::LimitPlus);
    let sh = Shooter::new(ctx, c, branch_of(side), Pairing::Source, Some(&interp))?;
    let (_, top) = sh.shoot::<4>(-ctx.h(), y_minus_init(), 0.0, &[])?;
    Ok(top)
}

fn boundary_form(ctx: &WaveContext, c: C64, y: C64, dy: C64) -> C64 {
    let p = &ctx.profile;
    let d = C64::new(p.u_max, 0.0) - c;
    if d == C64::new(0.0, 0.0) {
        return -y * ctx.gk();
    }
    d * d * dy - (d * p.u(0.0, 1) + ctx.gk()) * y
}

/// Combine a particular solution p with y_- so that the surface condition
/// holds with right-hand side `zeta` (free surface) or v(0) = 0 (channel).
/// Returns coefficient alpha in p + alpha y_- (all values unscaled by the
/// common log factor `ln`).
fn surface_coefficient(ctx: &WaveContext, c: C64, top: &[C64; 4], ln: f64, zeta: C64) -> Result<C64> {
    let tol = 1e-13;
    match ctx.bc {
        BcKind::FreeSurface => {
            let by = boundary_form(ctx, c, top[0], top[1]);
            let bp = boundary_form(ctx, c, top[2], top[3]);
            let scale = ctx.gk() * top[0].norm().max(top[1].norm());
            if by.norm() <= tol * scale {
                return Err(Error::ResonantC { c_re: c.re, c_im: c.im });
            }
            Ok((zeta * (-ln).exp() - bp) / by)
        }
        BcKind::Channel => {
            if top[0].norm() <= tol * top[1].norm() {
                return Err(Error::ResonantC { c_re: c.re, c_im: c.im });
            }
            Ok(-top[2] / top[0])
        }
    }
}

fn psi_interp(ctx: &WaveContext, psi: &[C64]) -> Result<GridInterp> {
    if psi.len() != ctx.numerics.grid_n {
        return Err(Error::InvalidSpec(format!("forcing has {} samples, grid has {}", psi.len(), ctx.numerics.grid_n)));
    }
    Ok(GridInterp::new(-ctx.h(), ctx.grid_dx(), psi))
}

fn combine(c: C64, grid: &[f64], stops: &[Stop<4>], alpha: C64, side: TraceSide, crit: Option<CriticalInfo>) -> RayleighTrace {
    let ln_top = stops.last().map(|s| s.1).unwrap_or(0.0);
    let mut y = Vec::with_capacity(stops.len());
    let mut dy = Vec::with_capacity(stops.len());
    for (st, ln) in stops {
        let f = (ln - ln_top).exp();
        y.push((st[2] + alpha * st[0]) * f);
        dy.push((st[3] + alpha * st[1]) * f);
    }
    RayleighTrace { c, grid: grid.to_vec(), y, dy, log_scale: ln_top, side, critical: crit }
}

/// Solution of -y'' + (k^2 + U''/(U - c)) y = psi/(U - c) with y(-h) = 0 and
/// the homogeneous surface condition; `psi` is sampled on the context grid.
pub fn solve_nonhomogeneous(ctx: &WaveContext, c: C64, psi: &[C64]) -> Result<RayleighTrace> {
    solve_forced(ctx, c, psi, C64::new(0.0, 0.0), TraceSide::LimitPlus)
}

fn solve_forced(ctx: &WaveContext, c: C64, psi: &[C64], zeta: C64, side: TraceSide) -> Result<RayleighTrace> {
    let interp = psi_interp(ctx, psi)?;
    let grid = ctx.grid();
    let side = side_for(ctx, c, side);
    let (stops, crit) = particular_trace(ctx, c, &interp, &grid, side)?;
    let (top, ln) = *stops.last().unwrap();
    let alpha = surface_coefficient(ctx, c, &top, ln, zeta)?;
    Ok(combine(c, &grid, &stops, alpha, side, crit))
}

/// Boundary-value solution V2 with forcing -omega0 and surface data; also
/// returns the transformed surface elevation.
pub fn solve_bvp_v2(ctx: &WaveContext, c: C64, omega0: &[C64], eta0: C64, dv20_top: C64) -> Result<(RayleighTrace, C64)> {
    solve_bvp_v2_side(ctx, c, omega0, eta0, dv20_top, TraceSide::LimitPlus)
}

pub fn solve_bvp_v2_side(
    ctx: &WaveContext,
    c: C64,
    omega0: &[C64],
    eta0: C64,
    dv20_top: C64,
    side: TraceSide,
) -> Result<(RayleighTrace, C64)> {
    if ctx.k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let psi: Vec<C64> = omega0.iter().map(|w| -w).collect();
    let zeta = surface_data(ctx, c, eta0, dv20_top);
    let tr = solve_forced(ctx, c, &psi, zeta, side)?;
    let v0 = *tr.y.last().unwrap() * tr.log_scale.exp();
    let d = C64::new(ctx.profile.u_max, 0.0) - c;
    let eta = (v0 + eta0) / (C64::new(0.0, ctx.k) * d);
    Ok((tr, eta))
}

/// zeta = (g + sigma k^2) eta0 - (i/k)(U(0) - c) b0
pub(crate) fn surface_data(ctx: &WaveContext, c: C64, eta0: C64, b0: C64) -> C64 {
    if ctx.bc == BcKind::Channel {
        return C64::new(0.0, 0.0);
    }
    let d = C64::new(ctx.profile.u_max, 0.0) - c;
    eta0 * ctx.gk() - C64::new(0.0, 1.0 / ctx.k) * d * b0
}

/// V2(k, U(xc) +- i0, xc) for every grid point, from the series coefficient
/// at the critical point; `omega0` on the context grid.
pub fn v2_on_diagonal(ctx: &WaveContext, omega0: &[C64], eta0: C64, b0: C64, side: TraceSide) -> Result<Vec<C64>> {
    use rayon::prelude::*;
    if ctx.k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let psi: Vec<C64> = omega0.iter().map(|w| -w).collect();
    let interp = psi_interp(ctx, &psi)?;
    let grid = ctx.grid();
    let p = &ctx.profile;
    grid.par_iter()
        .map(|&x| {
            if x <= -ctx.h() {
                return Ok(C64::new(0.0, 0.0));
            }
            let c = C64::new(p.u(x, 0).clamp(p.u_min, p.u_max), 0.0);
            let sh = Shooter::new(ctx, c, branch_of(side), Pairing::Source, Some(&interp))?;
            let xc = sh.layer().map(|f| f.xc).unwrap_or(x);
            let (stops, (top, ln_top)) = sh.shoot::<4>(-ctx.h(), y_minus_init(), 0.0, &[xc])?;
            let zeta = surface_data(ctx, c, eta0, b0);
            let alpha = surface_coefficient(ctx, c, &top, ln_top, zeta)?;
            let (s, ln) = stops[0];
            Ok((s[2] + alpha * s[0]) * ln.exp())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WronskianReport {
    pub value_at_0: C64,
    pub max_rel_drift: f64,
}

/// W = y_+ y_-' - y_+' y_- along the grid.
pub fn wronskian_drift(tm: &RayleighTrace, tp: &RayleighTrace) -> WronskianReport {
    if tm.c != tp.c || tm.grid != tp.grid {
        return WronskianReport { value_at_0: C64::new(f64::NAN, f64::NAN), max_rel_drift: f64::INFINITY };
    }
    let w: Vec<C64> = (0..tm.grid.len()).map(|i| tp.y[i] * tm.dy[i] - tp.dy[i] * tm.y[i]).collect();
    let w0 = *w.last().unwrap();
    let drift = w.iter().map(|v| (v - w0).norm() / w0.norm()).fold(0.0, f64::max);
    WronskianReport { value_at_0: w0 * (tm.log_scale + tp.log_scale).exp(), max_rel_drift: drift }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, ProfileSpec};

    fn ctx(spec: ProfileSpec, k: f64) -> WaveContext {
        let p = Arc::new(build_profile(&spec).unwrap());
        WaveContext::new(p, k, 1.0, 1.0, BcKind::FreeSurface, Numerics::default()).unwrap()
    }

    #[test]
    fn couette_sinh() {
        for &k in &[0.5, 3.0, 20.0] {
            let cx = ctx(ProfileSpec::couette(1.0), k);
            let grid = uniform_grid(1.0, 65);
            let t = solve_y_minus(&cx, C64::new(0.3, 0.4), &grid).unwrap();
            let y = t.true_y();
            for (i, &x) in grid.iter().enumerate().skip(1) {
                let ex = (k * (x + 1.0)).sinh() / k;
                assert!((y[i].re - ex).abs() < 1e-8 * ex.abs() && y[i].im.abs() < 1e-8 * ex.abs(), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn limit_real_below_layer_is_real() {
        let cx = ctx(ProfileSpec::polynomial(1.0, &[0.0, 1.0, 0.5, 0.1]), 1.3);
        let grid = uniform_grid(1.0, 101);
        let c = cx.profile.u(-0.37, 0);
        let t = limit_real(&cx, c, &grid, Which::Minus).unwrap();
        for (i, &x) in grid.iter().enumerate() {
            if x < -0.37 {
                assert_eq!(t.y[i].im, 0.0);
            }
        }
        assert!(t.y.last().unwrap().im > 0.0);
    }
}
