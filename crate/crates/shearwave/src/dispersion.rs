//! Dispersion function, root counting and location, branch continuation
//! and stability thresholds.

use crate::error::{Error, Result};
use crate::profile::ShearProfile;
use crate::quad::{gl16, gl_panels, graded_breaks};
use crate::rayleigh::{limit_real, top_values, BcKind, Numerics, TopValues, TraceSide, WaveContext, Which};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleFlags {
    pub y_minus_zero_at_top: bool,
}

/// F, its boundary-form numerator and Y at one (k, c).
///
/// The boundary form is stored as `big_f * exp(big_f_ln)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub k: f64,
    pub c: C64,
    pub big_f: C64,
    pub big_f_ln: f64,
    pub f: C64,
    pub y: C64,
    pub df_dc: C64,
    pub valid: SampleFlags,
}

impl DispersionSample {
    pub fn big_f_value(&self) -> C64 {
        self.big_f * self.big_f_ln.exp()
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn surface_gap(ctx: &WaveContext, c: C64) -> C64 {
    C64::new(ctx.profile.u_max, 0.0) - c
}

/// Boundary form (U(0)-c)^2 y' - (U'(0)(U(0)-c) + g + sigma k^2) y at the surface.
fn big_f_of(ctx: &WaveContext, c: C64, y: C64, dy: C64) -> C64 {
    match ctx.bc {
        BcKind::Channel => y,
        BcKind::FreeSurface => {
            let d = surface_gap(ctx, c);
            if d == zero() {
                return -y * ctx.gk();
            }
            d * d * dy - (d * ctx.profile.u(0.0, 1) + ctx.gk()) * y
        }
    }
}

fn tiny_y(tv: &TopValues) -> bool {
    tv.y.norm() <= 1e-14 * tv.dy.norm()
}

fn sample_from_top(ctx: &WaveContext, c: C64, tv: &TopValues, df_dc: Option<C64>) -> DispersionSample {
    let big = big_f_of(ctx, c, tv.y, tv.dy);
    let zero_top = tiny_y(tv);
    let y = tv.dy / tv.y;
    let f = match ctx.bc {
        BcKind::Channel => tv.y / tv.dy,
        BcKind::FreeSurface => big / tv.y,
    };
    let df = df_dc.unwrap_or_else(|| match ctx.bc {
        BcKind::Channel => (tv.yc * tv.dy - tv.y * tv.dyc) / (tv.dy * tv.dy),
        BcKind::FreeSurface => {
            let d = surface_gap(ctx, c);
            let up = ctx.profile.u(0.0, 1);
            let dbig = -d * tv.dy * 2.0 + d * d * tv.dyc + tv.y * up - (d * up + ctx.gk()) * tv.yc;
            (dbig - f * tv.yc) / tv.y
        }
    });
    DispersionSample {
        k: ctx.k,
        c,
        big_f: big,
        big_f_ln: tv.ln,
        f,
        y,
        df_dc: df,
        valid: SampleFlags { y_minus_zero_at_top: zero_top },
    }
}

/// F at real c on the limit side (c_I -> 0+ for c inside the range of U).
pub(crate) fn f_real_limit(ctx: &WaveContext, c: f64) -> Result<C64> {
    let p = &ctx.profile;
    if c == p.u_max && ctx.bc == BcKind::FreeSurface {
        return Ok(C64::new(-ctx.gk(), 0.0));
    }
    let tv = top_values(ctx, C64::new(c, 0.0), TraceSide::LimitPlus, false)?;
    Ok(sample_from_top(ctx, C64::new(c, 0.0), &tv, Some(zero())).f)
}

/// dF/dc along the real segment by fourth-order differences that stay inside
/// [U(-h), U(0)].
pub fn df_dc_limit(ctx: &WaveContext, c: f64) -> Result<C64> {
    let p = &ctx.profile;
    if c == p.u_max && ctx.bc == BcKind::FreeSurface {
        return Ok(C64::new(p.u(0.0, 1), 0.0));
    }
    let hc = 1e-5 * (p.u_max - p.u_min);
    let f = |x: f64| f_real_limit(ctx, x);
    if c - 2.0 * hc >= p.u_min && c + 2.0 * hc <= p.u_max {
        return Ok((f(c - 2.0 * hc)? - f(c + 2.0 * hc)? + (f(c + hc)? - f(c - hc)?) * 8.0) / (12.0 * hc));
    }
    let s = if c + 4.0 * hc <= p.u_max { 1.0 } else { -1.0 };
    let w = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let mut acc = zero();
    for (j, wj) in w.iter().enumerate() {
        acc += f(c + s * j as f64 * hc)? * *wj;
    }
    Ok(acc * s / (12.0 * hc))
}

/// Evaluate the dispersion quantities at (ctx.k, c).
pub fn eval_dispersion(ctx: &WaveContext, c: C64) -> Result<DispersionSample> {
    let p = &ctx.profile;
    if ctx.in_range(c) {
        if c.re == p.u_max && ctx.bc == BcKind::FreeSurface {
            let tv = top_values(ctx, c, TraceSide::LimitPlus, false)?;
            return Ok(DispersionSample {
                k: ctx.k,
                c,
                big_f: -tv.y * ctx.gk(),
                big_f_ln: tv.ln,
                f: C64::new(-ctx.gk(), 0.0),
                y: C64::new(f64::INFINITY, 0.0),
                df_dc: C64::new(p.u(0.0, 1), 0.0),
                valid: SampleFlags { y_minus_zero_at_top: tiny_y(&tv) },
            });
        }
        let tv = top_values(ctx, c, TraceSide::LimitPlus, false)?;
        let d = df_dc_limit(ctx, c.re)?;
        return Ok(sample_from_top(ctx, c, &tv, Some(d)));
    }
    let tv = top_values(ctx, c, TraceSide::Upper, true)?;
    Ok(sample_from_top(ctx, c, &tv, None))
}

/// Boundary form only (phase and scaled magnitude); cheaper than a full sample.
pub fn big_f(ctx: &WaveContext, c: C64) -> Result<(C64, f64)> {
    let tv = top_values(ctx, c, TraceSide::LimitPlus, false)?;
    Ok((big_f_of(ctx, c, tv.y, tv.dy), tv.ln))
}

/// Wronskian form (g + sigma k^2) y_+(-h), as (mantissa, log scale).
pub fn big_f_wronskian(ctx: &WaveContext, c: C64) -> Result<(C64, f64)> {
    let grid = [-ctx.h(), 0.0];
    let t = crate::rayleigh::trace_plus(ctx, c, &grid, TraceSide::LimitPlus)?;
    let scale = match ctx.bc {
        BcKind::FreeSurface => ctx.gk(),
        BcKind::Channel => -1.0,
    };
    Ok((t.y[0] * scale, t.log_scale))
}

/// Y at real c = U(x2c) from the closed formula pi U'' y_-(x2c)^2 / (U' |y_-(0)|^2).
pub fn y_imag(ctx: &WaveContext, c_r: f64) -> Result<f64> {
    let p = &ctx.profile;
    if !(c_r >= p.u_min && c_r <= p.u_max) {
        return Err(Error::OutOfRange { c: c_r, lo: p.u_min, hi: p.u_max });
    }
    let xc = p.inverse_u(c_r)?.clamp(-p.h, 0.0);
    let upp = p.u(xc, 2);
    if upp == 0.0 {
        return Ok(0.0);
    }
    let grid: Vec<f64> = if xc < 0.0 { vec![xc, 0.0] } else { vec![0.0] };
    let t = limit_real(ctx, c_r, &grid, Which::Minus)?;
    let yc = t.y[0];
    let y0 = *t.y.last().unwrap();
    if y0.norm() <= 1e-14 * t.dy.last().unwrap().norm() {
        return Err(Error::ChannelEigenvalue { c: c_r });
    }
    Ok(PI * upp * yc.re * yc.re / (p.u(xc, 1) * y0.norm_sqr()))
}

fn k_coth(k: f64, h: f64) -> f64 {
    if k == 0.0 {
        1.0 / h
    } else {
        k.abs() / (k.abs() * h).tanh()
    }
}

/// Tabulated Y_I on graded Gauss nodes over [U(-h), U(0)] for one k.
#[derive(Debug, Clone)]
pub struct HilbertTable {
    pub k: f64,
    nodes: Vec<(f64, f64, f64)>,
    a: f64,
    b: f64,
    shift: f64,
}

impl HilbertTable {
    pub fn new(ctx: &WaveContext) -> Result<Self> {
        if ctx.bc == BcKind::Channel {
            return Err(Error::NotApplicable("Cauchy representation of Y is for the free-surface problem".into()));
        }
        let p = &ctx.profile;
        let (a, b) = (p.u_min, p.u_max);
        let breaks = graded_breaks(a, b, 16, 1e-10, true, true);
        let pts: Vec<(f64, f64)> = breaks.windows(2).flat_map(|w| gl16(w[0], w[1]).collect::<Vec<_>>()).collect();
        let vals: Vec<Result<f64>> = pts.par_iter().map(|&(x, _)| y_imag(ctx, x)).collect();
        let mut nodes = Vec::with_capacity(pts.len());
        for ((x, w), v) in pts.into_iter().zip(vals) {
            let v = v.map_err(|e| match e {
                Error::ChannelEigenvalue { c } => Error::NotApplicable(format!("channel eigenvalue at c = {c}")),
                other => other,
            })?;
            nodes.push((x, w, v));
        }
        Ok(Self { k: ctx.k, nodes, a, b, shift: k_coth(ctx.k, p.h) })
    }

    /// Y(c) for c off the segment, or the c_I -> 0+ value on it.
    pub fn eval(&self, ctx: &WaveContext, c: C64) -> Result<C64> {
        if c.im == 0.0 && c.re >= self.a && c.re <= self.b {
            let yi = y_imag(ctx, c.re)?;
            let mut pv = 0.0;
            for &(x, w, v) in &self.nodes {
                pv += w * (v - yi) / (x - c.re);
            }
            if c.re > self.a && c.re < self.b {
                pv += yi * ((self.b - c.re) / (c.re - self.a)).ln();
            }
            return Ok(C64::new(pv / PI + self.shift, yi));
        }
        let mut acc = zero();
        for &(x, w, v) in &self.nodes {
            acc += w * v / (C64::new(x, 0.0) - c);
        }
        Ok(acc / PI + self.shift)
    }
}

/// Y reconstructed from Y_I by the Cauchy integral.
pub fn y_hilbert(ctx: &WaveContext, c: C64) -> Result<C64> {
    HilbertTable::new(ctx)?.eval(ctx, c)
}

/// Axis-aligned rectangle in the c-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn diameter(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, c: C64) -> bool {
        c.re >= self.re_min && c.re <= self.re_max && c.im >= self.im_min && c.im <= self.im_max
    }

    /// Distance from the closed rectangle to the real segment [a, b].
    pub fn distance_to_segment(&self, a: f64, b: f64) -> f64 {
        let dx = if self.re_max < a {
            a - self.re_max
        } else if self.re_min > b {
            self.re_min - b
        } else {
            0.0
        };
        let dy = if self.im_min > 0.0 {
            self.im_min
        } else if self.im_max < 0.0 {
            -self.im_max
        } else {
            0.0
        };
        dx.hypot(dy)
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re_min, self.re_max, -self.im_max, -self.im_min)
    }
}

const SEGMENT_CLEARANCE: f64 = 1e-3;

fn check_rect(ctx: &WaveContext, r: &Rect) -> Result<()> {
    if !(r.re_max > r.re_min && r.im_max > r.im_min) {
        return Err(Error::InvalidSpec("empty rectangle".into()));
    }
    let p = &ctx.profile;
    // with U'' = 0 the boundary form is a polynomial in c and the range is no obstacle
    if p.curv_max > 0.0 && r.distance_to_segment(p.u_min, p.u_max) < SEGMENT_CLEARANCE * 0.999 {
        return Err(Error::InvalidSpec("rectangle must keep 1e-3 clearance from U([-h, 0])".into()));
    }
    Ok(())
}

fn phase_at(ctx: &WaveContext, c: C64) -> Result<C64> {
    let (v, _) = big_f(ctx, c)?;
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::BoundaryRoot { c_re: c.re, c_im: c.im });
    }
    Ok(v / n)
}

/// Winding number of the boundary form along the rectangle boundary.
pub fn count_roots_rect(ctx: &WaveContext, rect: &Rect) -> Result<usize> {
    check_rect(ctx, rect)?;
    let diam = rect.diameter();
    let corners = rect.corners();
    let per_edge = 32;
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let ts: Vec<f64> = (0..=per_edge).map(|i| i as f64 / per_edge as f64).collect();
        let ph: Vec<C64> = ts.par_iter().map(|&t| phase_at(ctx, a + (b - a) * t)).collect::<Result<_>>()?;
        let len = (b - a).norm();
        for i in 0..per_edge {
            let mut stack = vec![(ts[i], ph[i], ts[i + 1], ph[i + 1])];
            while let Some((t0, p0, t1, p1)) = stack.pop() {
                let d = (p1 / p0).arg();
                if d.abs() <= PI / 2.0 {
                    total += d;
                    continue;
                }
                if (t1 - t0) * len < 1e-9 * diam {
                    let c = a + (b - a) * (0.5 * (t0 + t1));
                    return Err(Error::BoundaryRoot { c_re: c.re, c_im: c.im });
                }
                let tm = 0.5 * (t0 + t1);
                let pm = phase_at(ctx, a + (b - a) * tm)?;
                stack.push((tm, pm, t1, p1));
                stack.push((t0, p0, tm, pm));
            }
        }
    }
    let raw = total / (2.0 * PI);
    let n = raw.round();
    if (raw - n).abs() > 1e-4 || n < 0.0 {
        return Err(Error::Numerical(format!("winding number {raw} is not a nonnegative integer")));
    }
    Ok(n as usize)
}

/// A located root of the dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoundMode {
    pub c: C64,
    pub multiplicity: usize,
    pub df_dc: C64,
}

/// Newton iteration on F (or on the boundary form where y_-(0) vanishes).
pub fn newton_root(ctx: &WaveContext, c0: C64) -> Result<(C64, C64)> {
    let mut c = c0;
    let tol = 1e-12 * ctx.gk().max(1e-300);
    for _ in 0..60 {
        let s = eval_dispersion(ctx, c)?;
        let (val, der) = if s.valid.y_minus_zero_at_top && ctx.bc == BcKind::FreeSurface {
            let tv = top_values(ctx, c, TraceSide::Upper, true)?;
            let d = surface_gap(ctx, c);
            let up = ctx.profile.u(0.0, 1);
            let dbig = -d * tv.dy * 2.0 + d * d * tv.dyc + tv.y * up - (d * up + ctx.gk()) * tv.yc;
            (s.big_f, dbig)
        } else {
            (s.f, s.df_dc)
        };
        if !(val.re.is_finite() && val.im.is_finite() && der.norm() > 0.0) {
            break;
        }
        let step = val / der;
        let converged = s.f.norm() <= tol || (ctx.bc == BcKind::Channel && s.f.norm() <= 1e-13);
        if converged && step.norm() <= 1e-8 * (1.0 + c.norm()) {
            return Ok((c, s.df_dc));
        }
        c -= step;
        if ctx.in_range(c) {
            c.im = 1e-300;
        }
        if step.norm() <= 1e-15 * (1.0 + c.norm()) {
            let s = eval_dispersion(ctx, c)?;
            return Ok((c, s.df_dc));
        }
    }
    Err(Error::Numerical(format!("Newton failed to converge from c = {c0}")))
}

/// Semicircle check for unstable roots; returns the excess over the radius.
pub fn semicircle_excess(profile: &ShearProfile, c: C64) -> f64 {
    let mid = 0.5 * (profile.u_max + profile.u_min);
    let rad = 0.5 * (profile.u_max - profile.u_min);
    (c - mid).norm() - rad
}

fn split_rect(r: &Rect, frac: f64) -> (Rect, Rect) {
    if r.re_max - r.re_min >= r.im_max - r.im_min {
        let m = r.re_min + frac * (r.re_max - r.re_min);
        (Rect::new(r.re_min, m, r.im_min, r.im_max), Rect::new(m, r.re_max, r.im_min, r.im_max))
    } else {
        let m = r.im_min + frac * (r.im_max - r.im_min);
        (Rect::new(r.re_min, r.re_max, r.im_min, m), Rect::new(r.re_min, r.re_max, m, r.im_max))
    }
}

/// Roots outside the semicircle are real; drop a round-off imaginary part.
fn snap_real(ctx: &WaveContext, rect: &Rect, c: C64) -> C64 {
    let real = C64::new(c.re, 0.0);
    if c.im != 0.0 && c.im.abs() <= 1e-8 * (1.0 + c.norm()) && semicircle_excess(&ctx.profile, c) > 0.0 && rect.contains(real) {
        real
    } else {
        c
    }
}

fn locate(ctx: &WaveContext, rect: &Rect, n: usize, out: &mut Vec<FoundMode>) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    if rect.diameter() < 1e-6 {
        let c = rect.center();
        let df = if n == 1 { eval_dispersion(ctx, c)?.df_dc } else { zero() };
        out.push(FoundMode { c, multiplicity: n, df_dc: df });
        return Ok(());
    }
    if n == 1 {
        if let Ok((c, df)) = newton_root(ctx, rect.center()) {
            let c = snap_real(ctx, rect, c);
            if rect.contains(c) {
                out.push(FoundMode { c, multiplicity: 1, df_dc: df });
                return Ok(());
            }
        }
    }
    let fracs = [0.5, 0.4711, 0.5289, 0.4133, 0.5867, 0.3571];
    let mut last_err = None;
    for f in fracs {
        let (r1, r2) = split_rect(rect, f);
        let counts = count_roots_rect(ctx, &r1).and_then(|a| count_roots_rect(ctx, &r2).map(|b| (a, b)));
        match counts {
            Ok((a, b)) if a + b == n => {
                locate(ctx, &r1, a, out)?;
                return locate(ctx, &r2, b, out);
            }
            Ok((a, b)) => last_err = Some(Error::Numerical(format!("subdivision count {a} + {b} != {n}"))),
            Err(e @ Error::BoundaryRoot { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// All roots inside `region`, located by recursive subdivision and Newton.
pub fn find_modes(ctx: &WaveContext, region: &Rect, max_roots: usize) -> Result<Vec<FoundMode>> {
    let n = count_roots_rect(ctx, region)?;
    if n > max_roots {
        return Err(Error::MaxRootsExceeded(max_roots));
    }
    let mut out = Vec::new();
    locate(ctx, region, n, &mut out)?;
    for m in &out {
        if m.c.im > 0.0 {
            let ex = semicircle_excess(&ctx.profile, m.c);
            if ex > 1e-6 {
                return Err(Error::SemicircleViolation { c_re: m.c.re, c_im: m.c.im, excess: ex });
            }
        }
    }
    out.sort_by(|a, b| a.c.re.total_cmp(&b.c.re).then(a.c.im.total_cmp(&b.c.im)));
    Ok(out)
}

/// Search regions covering the spectrum: right, left, upper; the lower half
/// follows by conjugation.
pub fn default_regions(ctx: &WaveContext) -> [Rect; 3] {
    let p = &ctx.profile;
    let umax_abs = p.u_max.abs().max(p.u_min.abs());
    let kk = ctx.k.abs().max(1e-12);
    let r = umax_abs + 2.0 * (ctx.gk() * (p.h + 1.0 / kk)).sqrt() + 1.0;
    let hh = 0.5 * (p.u_max - p.u_min) + 0.1;
    let d = SEGMENT_CLEARANCE;
    [
        Rect::new(p.u_max + d, r, -hh, hh),
        Rect::new(-r, p.u_min - d, -hh, hh),
        Rect::new(p.u_min - d, p.u_max + d, d, hh),
    ]
}

/// Every root in the default regions, conjugate roots included.
pub fn find_all_modes(ctx: &WaveContext, max_roots: usize) -> Result<Vec<FoundMode>> {
    let regs = default_regions(ctx);
    let mut out = Vec::new();
    for (i, r) in regs.iter().enumerate() {
        let ms = find_modes(ctx, r, max_roots)?;
        for m in ms {
            out.push(m);
            if i == 2 {
                out.push(FoundMode { c: m.c.conj(), multiplicity: m.multiplicity, df_dc: m.df_dc.conj() });
            }
        }
    }
    if out.len() > max_roots {
        return Err(Error::MaxRootsExceeded(max_roots));
    }
    out.sort_by(|a, b| a.c.re.total_cmp(&b.c.re).then(a.c.im.total_cmp(&b.c.im)));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Branch continuation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchLabel {
    CPlus,
    CMinus,
    Bifurcated,
    InflectionFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ReachedUMinusH,
    TurnedComplex,
    Merged,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ReachedUMinusH => "reached_U_minus_h",
            EventKind::TurnedComplex => "turned_complex",
            EventKind::Merged => "merged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEvent {
    pub kind: EventKind,
    pub k_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSample {
    pub k: f64,
    pub c: C64,
    pub df_dc: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBranch {
    pub label: BranchLabel,
    pub samples: Vec<BranchSample>,
    pub events: Vec<BranchEvent>,
}

/// F(k, U(-h)).
pub fn f_bottom(ctx: &WaveContext, k: f64) -> Result<f64> {
    Ok(f_real_limit(&ctx.with_k(k), ctx.profile.u_min)?.re)
}

/// dF/dc at c = U(-h) by backward differences from below the range.
fn df_dc_bottom(ctx: &WaveContext) -> Result<f64> {
    let p = &ctx.profile;
    let hc = 1e-5 * (p.u_max - p.u_min);
    let w = [25.0, -48.0, 36.0, -16.0, 3.0];
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        acc += wj * f_real_limit(ctx, p.u_min - j as f64 * hc)?.re;
    }
    Ok(acc / (12.0 * hc))
}

/// F in the closed upper half plane: analytic values for c_I above a small
/// threshold, first-order extension from the c_I -> 0+ limit below it.
fn f_upper(ctx: &WaveContext, c: C64) -> Result<(C64, C64)> {
    let p = &ctx.profile;
    let thr = 1e-6 * (p.u_max - p.u_min);
    if c.im > thr || c.re < p.u_min || c.re > p.u_max {
        let s = eval_dispersion(ctx, c)?;
        return Ok((s.f, s.df_dc));
    }
    let f0 = f_real_limit(ctx, c.re)?;
    let d = df_dc_limit(ctx, c.re)?;
    Ok((f0 + d * C64::new(0.0, c.im.max(0.0)), d))
}

fn newton_upper(ctx: &WaveContext, c0: C64) -> Result<(C64, C64)> {
    let mut c = c0;
    let tol = 1e-12 * ctx.gk();
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let (f, d) = f_upper(ctx, c)?;
        let step = f / d;
        if f.norm() <= tol && step.norm() < 1e-8 {
            return Ok((c, d));
        }
        let mut next = c - step;
        if next.im <= 0.0 {
            next.im = 0.5 * c.im.max(1e-14);
        }
        c = next;
        if step.norm() <= 1e-14 * (1.0 + c.norm()) || (f.norm() <= tol && f.norm() >= last) {
            return Ok((c, d));
        }
        last = f.norm();
    }
    Err(Error::Numerical(format!("upper-half-plane Newton failed from {c0}")))
}

fn newton_real(ctx: &WaveContext, c0: f64) -> Result<(C64, C64)> {
    let (c, d) = newton_root(ctx, C64::new(c0, 0.0))?;
    Ok((C64::new(c.re, 0.0), d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Real,
    Complex,
    Absent,
}

fn brent<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F, tol: f64) -> Result<f64> {
    let mut conv = roots::SimpleConvergency { eps: tol, max_iter: 200 };
    roots::find_root_brent(a, b, f, &mut conv).map_err(|e| Error::Numerical(format!("root bracketing failed: {e:?}")))
}

/// Locate a sign change of F(k, U(-h)) between k0 and k1.
fn bottom_crossing(ctx: &WaveContext, k0: f64, k1: f64) -> Result<f64> {
    let mut err = None;
    let r = brent(
        k0.min(k1),
        k0.max(k1),
        |k| match f_bottom(ctx, k) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        1e-12,
    );
    if let Some(e) = err {
        return Err(e);
    }
    r
}

/// Complex initial guess near U(-h) from the local bifurcation expansion.
fn bifurcation_guess(ctx: &WaveContext, fb: f64) -> Result<C64> {
    let p = &ctx.profile;
    let dfb = df_dc_bottom(ctx)?;
    let cr = (p.u_min + fb / dfb.abs()).min(p.u_max);
    let yi = y_imag(ctx, cr)?;
    let ci = -yi * (p.u_max - p.u_min).powi(2) / dfb;
    Ok(C64::new(cr, ci.abs().max(1e-12)))
}

struct Tracker<'a> {
    base: &'a WaveContext,
    watch_bottom: bool,
    convex: bool,
    events: Vec<BranchEvent>,
}

impl Tracker<'_> {
    /// Advance one grid step k0 -> k1 from the state (c, phase).
    fn step(&mut self, k0: f64, k1: f64, pred: C64, c: C64, phase: Phase, df_prev: C64) -> Result<(C64, C64, Phase)> {
        let ctx1 = self.base.with_k(k1);
        let p = &self.base.profile;
        if self.watch_bottom {
            let fb0 = f_bottom(self.base, k0)?;
            let fb1 = f_bottom(self.base, k1)?;
            if (fb0 < 0.0) != (fb1 < 0.0) {
                let ks = bottom_crossing(self.base, k0, k1)?;
                self.events.push(BranchEvent { kind: EventKind::ReachedUMinusH, k_at: ks });
                if fb1 >= 0.0 {
                    if self.convex {
                        self.events.push(BranchEvent { kind: EventKind::TurnedComplex, k_at: ks });
                        let guess = bifurcation_guess(&ctx1, fb1)?;
                        let (c1, d1) = newton_upper(&ctx1, guess)?;
                        return Ok((c1, d1, Phase::Complex));
                    }
                    self.events.push(BranchEvent { kind: EventKind::Merged, k_at: ks });
                    return Ok((C64::new(p.u_min, 0.0), zero(), Phase::Absent));
                }
                let dfb = df_dc_bottom(&ctx1)?;
                let guess = p.u_min - (fb1 / dfb).abs();
                let (c1, d1) = newton_real(&ctx1, guess)?;
                return Ok((c1, d1, Phase::Real));
            }
            if phase == Phase::Absent {
                return Ok((c, zero(), Phase::Absent));
            }
        }
        let (c1, d1) = match phase {
            Phase::Complex => newton_upper(&ctx1, if pred.im > 0.0 { pred } else { c })?,
            _ => {
                let (c1, d1) = newton_root(&ctx1, C64::new(pred.re, 0.0))?;
                if c1.im.abs() > 1e-10 * (1.0 + c1.norm()) {
                    return Err(Error::LostBranch { k: k1 });
                }
                (C64::new(c1.re, 0.0), d1)
            }
        };
        if df_prev.norm() > 0.0 && d1.norm() < 0.1 * df_prev.norm() {
            return Err(Error::LostBranch { k: k1 });
        }
        if (c1 - c).norm() > 0.25 * (1.0 + c.norm()) {
            return Err(Error::LostBranch { k: k1 });
        }
        Ok((c1, d1, phase))
    }
}

fn classify(p: &ShearProfile, c: C64) -> Phase {
    if c.im > 0.0 {
        Phase::Complex
    } else {
        let _ = p;
        Phase::Real
    }
}

/// Continue a root from `seed = (k0, c0)` across the increasing grid `ks`
/// (k0 must be a grid value).
pub fn continue_branch(ctx: &WaveContext, ks: &[f64], seed: (f64, C64), label: BranchLabel) -> Result<EigenBranch> {
    if ks.is_empty() || ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSpec("k grid must be nonempty and increasing".into()));
    }
    let i0 = ks
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - seed.0).abs().total_cmp(&(b.1 - seed.0).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let p = &ctx.profile;
    let c0 = seed.1;
    let ctx0 = ctx.with_k(ks[i0]);
    let (c_seed, d_seed) = if c0.im > 0.0 { newton_upper(&ctx0, c0)? } else { newton_real(&ctx0, c0.re)? };
    let watch = c_seed.re <= p.u_min + 1e-12 && ctx.bc == BcKind::FreeSurface && p.curv_max > 0.0
        || (c_seed.im > 0.0 && label == BranchLabel::CMinus);
    let convex = p.u(-p.h, 2) > 0.0;
    let mut tracker = Tracker { base: ctx, watch_bottom: watch, convex, events: Vec::new() };
    let mut up = vec![BranchSample { k: ks[i0], c: c_seed, df_dc: d_seed }];
    let mut down: Vec<BranchSample> = Vec::new();
    for dir in [1isize, -1] {
        let mut hist: Vec<(f64, C64)> = vec![(ks[i0], c_seed)];
        let mut c = c_seed;
        let mut d = d_seed;
        let mut phase = classify(p, c_seed);
        let mut i = i0 as isize;
        loop {
            let j = i + dir;
            if j < 0 || j as usize >= ks.len() {
                break;
            }
            let (ka, kb) = (ks[i as usize], ks[j as usize]);
            let mut sub = 1usize;
            let mut result = None;
            for _ in 0..=5 {
                let mut ok = true;
                let (mut cc, mut dd, mut ph) = (c, d, phase);
                let mut h2 = hist.clone();
                for s in 0..sub {
                    let k0 = ka + (kb - ka) * s as f64 / sub as f64;
                    let k1 = ka + (kb - ka) * (s + 1) as f64 / sub as f64;
                    let pred = if h2.len() >= 2 && ph != Phase::Absent {
                        let (kp, cp) = h2[h2.len() - 2];
                        let (kq, cq) = h2[h2.len() - 1];
                        cq + (cq - cp) * ((k1 - kq) / (kq - kp))
                    } else {
                        cc
                    };
                    let ev_len = tracker.events.len();
                    match tracker.step(k0, k1, pred, cc, ph, dd) {
                        Ok((c1, d1, p1)) => {
                            if p1 != ph {
                                h2.clear();
                            }
                            cc = c1;
                            dd = d1;
                            ph = p1;
                            h2.push((k1, cc));
                        }
                        Err(_) => {
                            tracker.events.truncate(ev_len);
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    result = Some((cc, dd, ph, h2));
                    break;
                }
                sub *= 2;
            }
            let Some((c1, d1, p1, h2)) = result else {
                return Err(Error::LostBranch { k: kb });
            };
            c = c1;
            d = d1;
            phase = p1;
            hist = h2;
            if phase != Phase::Absent {
                let smp = BranchSample { k: kb, c, df_dc: d };
                if dir > 0 {
                    up.push(smp);
                } else {
                    down.push(smp);
                }
            }
            i = j;
        }
    }
    down.reverse();
    down.extend(up);
    let mut events = tracker.events;
    events.sort_by(|a, b| a.k_at.total_cmp(&b.k_at));
    events.dedup_by(|a, b| a.kind == b.kind && (a.k_at - b.k_at).abs() < 1e-9);
    Ok(EigenBranch { label, samples: down, events })
}

/// Geometric grid with `per_decade` points per decade on [a, b].
pub fn geometric_grid(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    if !(a > 0.0 && b > a) {
        return vec![a];
    }
    let n = ((b / a).log10() * per_decade as f64).ceil().max(1.0) as usize;
    (0..=n).map(|i| a * (b / a).powf(i as f64 / n as f64)).collect()
}

// ---------------------------------------------------------------------------
// Thresholds

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub sigma_threshold: f64,
    pub g_sharp: f64,
    /// k at which F(k, U(-h)) + g is maximal
    pub k_star: f64,
    pub k_sharp: Option<f64>,
    pub k_sharp_band: Option<(f64, f64)>,
    pub c0_plus: f64,
    pub c0_minus: f64,
    pub mono_condition_plus: f64,
    pub mono_condition_minus: f64,
}

/// F(k, U(-h)) + g, which does not depend on g.
pub fn f_bottom_plus_g(ctx: &WaveContext, k: f64) -> Result<f64> {
    let c = ctx.with_k(k);
    Ok(f_bottom(&c, k)? + c.g)
}

/// F(0, c) = 1 / int (U - c)^-2 - g for real c outside the range.
pub fn f_k0(profile: &ShearProfile, g: f64, c: f64) -> f64 {
    1.0 / inv_sq_integral(profile, c, -profile.h, 0.0) - g
}

fn inv_sq_integral(p: &ShearProfile, c: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = (c < p.u_min, c > p.u_max);
    let br = graded_breaks(a, b, 8, 1e-12, lo, hi);
    gl_panels(&br, |x| {
        let d = p.u(x, 0) - c;
        1.0 / (d * d)
    })
}

fn mono_integral(p: &ShearProfile, g: f64, c0: f64) -> f64 {
    let h = p.h;
    let br = graded_breaks(-h, 0.0, 16, 1e-12, c0 < p.u_min, c0 > p.u_max);
    let mut nodes: Vec<(f64, f64)> = br.windows(2).flat_map(|w| gl16(w[0], w[1]).collect::<Vec<_>>()).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut inner = 0.0;
    let mut prev = -h;
    let mut acc = 0.0;
    for (x, w) in nodes {
        for (t, wt) in gl16(prev, x) {
            let d = p.u(t, 0) - c0;
            inner += wt / (d * d);
        }
        prev = x;
        let d = p.u(x, 0) - c0;
        acc += w * d * d * inner * inner;
    }
    acc / (g * g)
}

fn k0_speed(p: &ShearProfile, g: f64, upper: bool) -> Result<f64> {
    let span = p.u_max - p.u_min;
    let (edge, s) = if upper { (p.u_max, 1.0) } else { (p.u_min, -1.0) };
    let lo = edge + s * 1e-9 * (1.0 + span);
    let mut far = 1.0 + span + 2.0 * (g * p.h).sqrt();
    let f = |c: f64| f_k0(p, g, c);
    while f(edge + s * far) <= 0.0 {
        far *= 2.0;
        if far > 1e12 {
            return Err(Error::Numerical("k = 0 speed not bracketed".into()));
        }
    }
    if f(lo) >= 0.0 {
        return Err(Error::Numerical("k = 0 speed not bracketed near the range".into()));
    }
    brent(lo.min(edge + s * far), lo.max(edge + s * far), f, 1e-14)
}

/// Stability thresholds for gravity and surface tension. The scan starts at
/// `k_max` and widens while the maximizer sits on its edge.
pub fn thresholds(profile: Arc<ShearProfile>, g: f64, sigma: f64, k_max: f64, numerics: Numerics) -> Result<ThresholdReport> {
    if !(k_max > 0.01) {
        return Err(Error::InvalidSpec("thresholds need k_max > 0.01".into()));
    }
    let ctx = WaveContext::new(profile.clone(), 1.0, g, sigma, BcKind::FreeSurface, numerics)?;
    let p = &profile;
    let umin = p.u_min;
    let sigma_threshold = gl_panels(&graded_breaks(-p.h, 0.0, 16, 1e-3, false, false), |x| {
        let d = p.u(x, 0) - umin;
        d * d
    });
    // widen the scan until the maximum is interior (the function is concave in k^2)
    let mut k_top = k_max;
    let (ks, vals, imax) = loop {
        let ks = geometric_grid(1e-2, k_top, 48);
        let vals: Vec<f64> = ks.par_iter().map(|&k| f_bottom_plus_g(&ctx, k)).collect::<Result<_>>()?;
        let (imax, _) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        if imax + 1 < ks.len() || k_top >= 1e6 {
            break (ks, vals, imax);
        }
        k_top *= 4.0;
    };
    let (mut a, mut b) = (ks[imax.saturating_sub(1)], ks[(imax + 1).min(ks.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |k: f64| f_bottom_plus_g(&ctx, k);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..80 {
        if (b - a) < 1e-10 * b {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let (k_star, fmax) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let (k_star, fmax) = if vals[imax] > fmax { (ks[imax], vals[imax]) } else { (k_star, fmax) };
    let g_sharp = fmax.max(0.0);
    let mut k_sharp = None;
    let mut band = None;
    if g_sharp > 0.0 {
        if (g - g_sharp).abs() <= 1e-12 * g_sharp.max(1.0) {
            k_sharp = Some(k_star);
        } else if g < g_sharp {
            let fk = |k: f64| f_bottom_plus_g(&ctx, k).map(|v| v - g);
            let lo_i = (0..imax).rev().find(|&i| vals[i] - g < 0.0);
            let hi_i = (imax + 1..ks.len()).find(|&i| vals[i] - g < 0.0);
            if let (Some(li), Some(hi)) = (lo_i, hi_i) {
                let root = |a: f64, b: f64| -> Result<f64> {
                    let mut err = None;
                    let r = brent(a, b, |k| fk(k).unwrap_or_else(|e| { err = Some(e); f64::NAN }), 1e-12)?;
                    err.map_or(Ok(r), Err)
                };
                band = Some((root(ks[li], k_star)?, root(k_star, ks[hi])?));
            }
        }
    }
    let c0_plus = k0_speed(p, g, true)?;
    let c0_minus = k0_speed(p, g, false)?;
    Ok(ThresholdReport {
        sigma_threshold,
        g_sharp,
        k_star,
        k_sharp,
        k_sharp_band: band,
        c0_plus,
        c0_minus,
        mono_condition_plus: mono_integral(p, g, c0_plus),
        mono_condition_minus: mono_integral(p, g, c0_minus),
    })
}

// ---------------------------------------------------------------------------
// Inflection-value modes

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflectionMode {
    pub x20: f64,
    pub c0: f64,
    pub k0: f64,
    pub dk_f: f64,
    /// +1 if unstable modes sit at k > k0, -1 if at k < k0, 0 if undetermined
    pub unstable_side: i32,
}

/// Real wavenumbers k0 with F(k0, U(x20)) = 0 at each inflection point x20.
pub fn inflection_scan(
    profile: Arc<ShearProfile>,
    g: f64,
    sigma: f64,
    k_range: (f64, f64),
    numerics: Numerics,
) -> Result<Vec<InflectionMode>> {
    let infl = profile.inflection_points();
    if infl.points.is_empty() {
        return Ok(Vec::new());
    }
    let ctx = WaveContext::new(profile.clone(), k_range.0, g, sigma, BcKind::FreeSurface, numerics)?;
    let ks = geometric_grid(k_range.0, k_range.1, 48);
    let mut out = Vec::new();
    for &(x20, c0) in &infl.points {
        let f = |k: f64| f_real_limit(&ctx.with_k(k), c0).map(|v| v.re);
        let vals: Vec<f64> = ks.par_iter().map(|&k| f(k)).collect::<Result<_>>()?;
        let u3 = profile.u(x20, 3);
        for i in 0..ks.len() - 1 {
            if (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
                let k0 = brent(ks[i], ks[i + 1], |k| f(k).unwrap_or(f64::NAN), 1e-13)?;
                let dk = 1e-5 * k0;
                let dk_f = (f(k0 + dk)? - f(k0 - dk)?) / (2.0 * dk);
                let side = if u3 == 0.0 || dk_f == 0.0 { 0 } else if u3 * dk_f > 0.0 { 1 } else { -1 };
                out.push(InflectionMode { x20, c0, k0, dk_f, unstable_side: side });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoRoot { k_lo: k_range.0, k_hi: k_range.1 });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Conjugating wavenumber map

/// phi(k) solving phi c(phi) = k c_ir(k) along a real branch.
pub fn conjugate_wavenumber(branch: &EigenBranch, ctx: &WaveContext, ks: &[f64]) -> Result<Vec<(f64, f64)>> {
    let s = &branch.samples;
    if s.len() < 2 || s.iter().any(|x| x.c.im != 0.0) {
        return Err(Error::NotApplicable("conjugacy needs a real branch with at least two samples".into()));
    }
    let omega: Vec<f64> = s.iter().map(|x| x.k * x.c.re).collect();
    let inc = omega[1] > omega[0];
    for (i, w) in omega.windows(2).enumerate() {
        if (w[1] > w[0]) != inc || w[1] == w[0] {
            return Err(Error::NotMonotone { k: s[i + 1].k });
        }
    }
    let plus = branch.label == BranchLabel::CPlus || s[0].c.re > ctx.profile.u_max;
    let c_of = |phi: f64| -> Result<f64> {
        let j = s.partition_point(|x| x.k < phi).clamp(1, s.len() - 1);
        let (a, b) = (&s[j - 1], &s[j]);
        let guess = a.c.re + (b.c.re - a.c.re) * (phi - a.k) / (b.k - a.k);
        Ok(newton_real(&ctx.with_k(phi), guess)?.0.re)
    };
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        if k == 0.0 {
            out.push((0.0, 0.0));
            continue;
        }
        let (cp, cm) = crate::oracles::irrotational_speed(k, ctx.profile.h, ctx.g, ctx.sigma);
        let target = k.abs() * if plus { cp } else { cm };
        let j = omega.iter().position(|&w| if inc { w >= target } else { w <= target });
        let Some(j) = j.filter(|&j| j > 0) else {
            return Err(Error::NotApplicable(format!("k c_ir(k) at k = {k} lies outside the branch")));
        };
        let mut err = None;
        let phi = brent(s[j - 1].k, s[j].k, |phi| match c_of(phi) {
            Ok(c) => phi * c - target,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        }, 1e-13)?;
        if let Some(e) = err {
            return Err(e);
        }
        out.push((k, phi * k.signum()));
    }
    Ok(out)
}
