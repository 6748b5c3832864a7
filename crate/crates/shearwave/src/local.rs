//! Local Frobenius expansion of the Rayleigh equation about a critical point.
//!
//! With s = x2 - xc the regular solution is phi1 = s + ..., the second one is
//! psi + C phi1 L(s) with C = U''/U' at xc and L = ln|s| + i theta(s).

use crate::profile::ShearProfile;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const M: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// limit c_I -> 0+
    Plus,
    /// limit c_I -> 0-
    Minus,
}

#[derive(Debug, Clone)]
pub struct Frobenius {
    pub xc: f64,
    pub coef_c: f64,
    pub slope: f64,
    a: [f64; M],
    b: [f64; M],
    theta_below: f64,
    source: Option<(Vec<C64>, C64)>,
}

/// Values of a local basis function and its derivative at s.
#[derive(Debug, Clone, Copy)]
pub struct Local {
    pub phi: C64,
    pub dphi: C64,
}

fn poly(c: &[f64], s: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for (n, &a) in c.iter().enumerate().rev() {
        v = v * s + a;
        if n > 0 {
            d = d * s + n as f64 * a;
        }
    }
    (v, d)
}

fn cpoly(c: &[C64], s: f64) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for (n, &a) in c.iter().enumerate().rev() {
        v = v * s + a;
        if n > 0 {
            d = d * s + a * n as f64;
        }
    }
    (v, d)
}

impl Frobenius {
    /// Series at xc for wavenumber k; `src` carries Taylor coefficients of the
    /// forcing of (U - c) y'' - (k^2 (U - c) + U'') y = -src.
    pub fn new(profile: &ShearProfile, k: f64, xc: f64, branch: Branch, src: Option<&[C64]>) -> Self {
        let mut fact = 1.0;
        let mut p = [0.0; M + 2];
        let mut r = [0.0; M + 2];
        for n in 0..=6 {
            if n > 0 {
                fact *= n as f64;
            }
            if n >= 1 {
                p[n] = profile.u(xc, n) / fact;
            }
            if n + 2 <= 6 {
                r[n] = profile.u(xc, n + 2) / fact;
            }
        }
        let k2 = k * k;
        let coef = |j: usize| k2 * p[j] + r[j];
        let p1 = p[1];
        let cc = r[0] / p1;
        // phi1
        let mut a = [0.0; M];
        a[1] = 1.0;
        for m in 1..M - 1 {
            let mut rhs = 0.0;
            for n in 0..=m {
                rhs += coef(m - n) * a[n];
            }
            for j in 2..=m + 1 {
                let n = m + 2 - j;
                rhs -= p[j] * (n * (n - 1)) as f64 * a[n];
            }
            a[m + 1] = rhs / (p1 * ((m + 1) * m) as f64);
        }
        // g_m = sum_{j + n = m + 2} p_j (2n - 1) a_n
        let g = |m: usize| -> f64 {
            let mut s = 0.0;
            for n in 1..=m + 1 {
                let j = m + 2 - n;
                if j < p.len() && n < M {
                    s += p[j] * (2 * n - 1) as f64 * a[n];
                }
            }
            s
        };
        let mut b = [0.0; M];
        b[0] = 1.0;
        for m in 1..M - 1 {
            let mut rhs = 0.0;
            for n in 0..=m {
                rhs += coef(m - n) * b[n];
            }
            for j in 2..=m + 1 {
                let n = m + 2 - j;
                rhs -= p[j] * (n * (n - 1)) as f64 * b[n];
            }
            rhs -= cc * g(m);
            b[m + 1] = rhs / (p1 * ((m + 1) * m) as f64);
        }
        let source = src.map(|psi| {
            let d = -psi[0] / p1;
            let mut chi = vec![C64::new(0.0, 0.0); M];
            for m in 1..M - 1 {
                let mut rhs = C64::new(0.0, 0.0);
                for n in 0..=m {
                    rhs += chi[n] * coef(m - n);
                }
                for j in 2..=m + 1 {
                    let n = m + 2 - j;
                    rhs -= chi[n] * (p[j] * (n * (n - 1)) as f64);
                }
                let pm = psi.get(m).copied().unwrap_or_default();
                rhs -= pm + d * g(m);
                chi[m + 1] = rhs / (p1 * ((m + 1) * m) as f64);
            }
            (chi, d)
        });
        let theta_below = match branch {
            Branch::Plus => -PI,
            Branch::Minus => PI,
        };
        Self { xc, coef_c: cc, slope: p1, a, b, theta_below, source }
    }

    fn log(&self, s: f64) -> C64 {
        let th = if s < 0.0 { self.theta_below } else { 0.0 };
        C64::new(s.abs().ln(), th)
    }

    /// phi1 and phi1 / s with its derivative at s.
    fn phi1(&self, s: f64) -> (f64, f64, f64) {
        let (v, d) = poly(&self.a, s);
        let (q, _) = poly(&self.a[1..], s);
        (v, d, q)
    }

    pub fn regular(&self, s: f64) -> Local {
        let (v, d, _) = self.phi1(s);
        Local { phi: C64::new(v, 0.0), dphi: C64::new(d, 0.0) }
    }

    /// Logarithmic solution; at s = 0 the derivative is returned without
    /// its divergent ln|s| part.
    pub fn singular(&self, s: f64) -> Local {
        let (v, d, q) = self.phi1(s);
        let (bv, bd) = poly(&self.b, s);
        let l = if s == 0.0 { C64::new(0.0, 0.0) } else { self.log(s) };
        Local {
            phi: C64::new(bv, 0.0) + l * (self.coef_c * v),
            dphi: C64::new(bd, 0.0) + (l * d + q) * self.coef_c,
        }
    }

    /// Particular solution for the forcing given at construction.
    pub fn particular(&self, s: f64) -> Local {
        let (chi, dd) = self.source.as_ref().expect("series built without forcing");
        let (v, d, q) = self.phi1(s);
        let (cv, cd) = cpoly(chi, s);
        let l = if s == 0.0 { C64::new(0.0, 0.0) } else { self.log(s) };
        Local { phi: cv + dd * l * v, dphi: cd + dd * (l * d + q) }
    }

    /// Coefficients (A, B) with y = A phi1 + B (psi + C phi1 L) matching (y, y') at s.
    pub fn match_homogeneous(&self, s: f64, y: C64, dy: C64) -> (C64, C64) {
        let r = self.regular(s);
        let q = self.singular(s);
        let det = r.phi * q.dphi - r.dphi * q.phi;
        ((y * q.dphi - dy * q.phi) / det, (r.phi * dy - r.dphi * y) / det)
    }
}
