//! Closed-form and brute-force references.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::profile::ShearProfile;
use crate::quad::gl16;
use crate::rayleigh::WaveContext;
use num_complex::Complex64 as C64;

/// Modes of U(x2) = x2: c^2 k coth(kh) + c - (g + sigma k^2) = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouetteModes {
    pub k: f64,
    pub h: f64,
    pub g: f64,
    pub sigma: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

/// Eigenfunction fields of one Couette mode sampled on a grid.
#[derive(Debug, Clone)]
pub struct CouetteFields {
    pub v1: Vec<C64>,
    pub v2: Vec<C64>,
    pub p: Vec<C64>,
    pub eta: C64,
}

fn k_coth(k: f64, h: f64) -> f64 {
    if k == 0.0 {
        1.0 / h
    } else {
        k.abs() / (k.abs() * h).tanh()
    }
}

pub fn couette_modes(k: f64, h: f64, g: f64, sigma: f64) -> Result<CouetteModes> {
    if k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let a = k_coth(k, h);
    let gk = g + sigma * k * k;
    let root = (1.0 + 4.0 * a * gk).sqrt();
    let c_plus = 2.0 * gk / (1.0 + root);
    let c_minus = -(1.0 + root) / (2.0 * a);
    Ok(CouetteModes { k, h, g, sigma, c_plus, c_minus })
}

impl CouetteModes {
    /// Velocity, pressure and elevation of the mode with speed `c`, with
    /// v2 = sinh(k (x2 + h)).
    pub fn fields(&self, c: f64, grid: &[f64]) -> CouetteFields {
        let k = self.k;
        let i_k = C64::new(0.0, 1.0 / k);
        let mut v1 = Vec::with_capacity(grid.len());
        let mut v2 = Vec::with_capacity(grid.len());
        let mut p = Vec::with_capacity(grid.len());
        for &x in grid {
            let s = (k * (x + self.h)).sinh();
            let ds = k * (k * (x + self.h)).cosh();
            let a = i_k * ds;
            v1.push(a);
            v2.push(C64::new(s, 0.0));
            p.push(-(x - c) * a + i_k * s);
        }
        let s0 = (k * self.h).sinh();
        let eta = C64::new(s0, 0.0) / (C64::new(0.0, k) * (0.0 - c));
        CouetteFields { v1, v2, p, eta }
    }
}

/// Speeds of irrotational waves, (+c_ir, -c_ir).
pub fn irrotational_speed(k: f64, h: f64, g: f64, sigma: f64) -> (f64, f64) {
    let c = if k == 0.0 { (g * h).sqrt() } else { ((g + sigma * k * k) * (k.abs() * h).tanh() / k.abs()).sqrt() };
    (c, -c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormCase {
    /// k = 0, c outside U([-h, 0])
    K0(f64),
    /// k = 0, c = U(-h)
    AtBottomValue,
}

/// Closed-form y_- at k = 0 on the grid.
pub fn closed_form_yminus(profile: &ShearProfile, case: ClosedFormCase, grid: &[f64]) -> Result<Vec<f64>> {
    let h = profile.h;
    match case {
        ClosedFormCase::AtBottomValue => {
            let s = profile.u(-h, 1);
            Ok(grid.iter().map(|&x| (profile.u(x, 0) - profile.u_min) / s).collect())
        }
        ClosedFormCase::K0(c) => {
            if c >= profile.u_min && c <= profile.u_max {
                return Err(Error::OutOfRange { c, lo: profile.u_min, hi: profile.u_max });
            }
            let a = profile.u_min - c;
            let mut out = Vec::with_capacity(grid.len());
            let mut acc = 0.0;
            let mut prev = -h;
            for &x in grid {
                let n = (((x - prev) / (0.02 * h)).ceil() as usize).max(1);
                for j in 0..n {
                    let lo = prev + (x - prev) * j as f64 / n as f64;
                    let hi = prev + (x - prev) * (j + 1) as f64 / n as f64;
                    for (t, w) in gl16(lo, hi) {
                        let d = profile.u(t, 0) - c;
                        acc += w * a / (d * d);
                    }
                }
                prev = x;
                out.push((profile.u(x, 0) - c) * acc);
            }
            Ok(out)
        }
    }
}

/// Determinant of the finite-difference Rayleigh boundary-value operator,
/// as (unit phase, ln |det|).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdDeterminant {
    pub phase: C64,
    pub ln_abs: f64,
}

impl FdDeterminant {
    pub fn value(&self) -> C64 {
        self.phase * self.ln_abs.exp()
    }
}

/// Second-order central differences of (U - c)(-D^2 + k^2) + U'' on n
/// interior points, Dirichlet at -h, surface row at 0.
pub fn fd_determinant(ctx: &WaveContext, c: C64, n: usize) -> Result<FdDeterminant> {
    if !(4..=2000).contains(&n) {
        return Err(Error::InvalidSpec(format!("fd_determinant needs 4 <= n <= 2000, got {n}")));
    }
    let p = &ctx.profile;
    let h = p.h;
    let m = n + 2;
    let dx = h / (n + 1) as f64;
    let k2 = ctx.k * ctx.k;
    let mut a = BandMatrix::zeros(m, 3, 1);
    a.set(0, 0, C64::new(1.0, 0.0));
    let inv = 1.0 / (dx * dx);
    for i in 1..=n {
        let x = -h + i as f64 * dx;
        let d = C64::new(p.u(x, 0), 0.0) - c;
        a.set(i, i - 1, -d * inv);
        a.set(i, i, d * (2.0 * inv + k2) + p.u(x, 2));
        a.set(i, i + 1, -d * inv);
    }
    let d0 = C64::new(p.u_max, 0.0) - c;
    let top = m - 1;
    let w = d0 * d0 / (6.0 * dx);
    a.set(top, top, w * 11.0 - (d0 * p.u(0.0, 1) + ctx.gk()));
    a.set(top, top - 1, w * -18.0);
    a.set(top, top - 2, w * 9.0);
    a.set(top, top - 3, w * -2.0);
    let (phase, ln_abs) = a.factor().log_det();
    Ok(FdDeterminant { phase, ln_abs })
}

/// Newton iteration on the finite-difference determinant.
pub fn fd_newton(ctx: &WaveContext, c0: C64, n: usize) -> Result<C64> {
    let mut c = c0;
    for _ in 0..60 {
        let e = 1e-6 * (1.0 + c.norm());
        let d0 = fd_determinant(ctx, c, n)?;
        if d0.ln_abs == f64::NEG_INFINITY {
            return Ok(c);
        }
        let rescale = |d: FdDeterminant| d.phase * (d.ln_abs - d0.ln_abs).exp();
        let a = rescale(fd_determinant(ctx, c + e, n)?);
        let b = rescale(fd_determinant(ctx, c - e, n)?);
        let step = d0.phase * 2.0 * e / (a - b);
        if !step.is_finite() {
            break;
        }
        c -= step;
        if step.norm() < 1e-12 * (1.0 + c.norm()) {
            return Ok(c);
        }
    }
    Err(Error::Numerical(format!("fd Newton did not converge from {c0}")))
}

/// Extrapolate samples f(eps) = f0 + a eps ln(eps) + b eps to eps = 0.
/// Each entry of `vals` is the sampled vector at the matching eps.
pub fn richardson_eps(eps: &[f64], vals: &[Vec<C64>]) -> Result<Vec<C64>> {
    if eps.len() != 3 || vals.len() != 3 {
        return Err(Error::InvalidSpec("extrapolation uses exactly three eps values".into()));
    }
    let row = |e: f64| [1.0, e * e.ln(), e];
    let m = [row(eps[0]), row(eps[1]), row(eps[2])];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    if d == 0.0 {
        return Err(Error::InvalidSpec("eps values must be distinct".into()));
    }
    // Cramer's rule for the first unknown: weights w_i with f0 = sum w_i f_i
    let mut w = [0.0; 3];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut mm = m;
        for (r, row) in mm.iter_mut().enumerate() {
            row[0] = if r == i { 1.0 } else { 0.0 };
        }
        *wi = det3(&mm) / d;
    }
    let n = vals[0].len();
    Ok((0..n).map(|j| vals[0][j] * w[0] + vals[1][j] * w[1] + vals[2][j] * w[2]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn couette_vieta() {
        let m = couette_modes(1.0, 1.0, 1.0, 1.0).unwrap();
        let a = 1.0 / 1f64.tanh();
        assert!((m.c_plus + m.c_minus + 1.0 / a).abs() < 1e-12);
        assert!((m.c_plus * m.c_minus + 2.0 / a).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_log_terms() {
        let eps = [1e-3, 5e-4, 2.5e-4];
        let f = |e: f64| vec![C64::new(2.0 + 3.0 * e * e.ln() - e, 1.0 + e)];
        let v = richardson_eps(&eps, &eps.map(f)).unwrap();
        assert!((v[0] - C64::new(2.0, 1.0)).norm() < 1e-12);
    }
}
