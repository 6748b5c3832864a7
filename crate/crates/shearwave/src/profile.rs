//! Monotone shear profiles U(x2) on [-h, 0], their derivatives to order six,
//! the inverse map and the extension beyond the physical interval.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Couette,
    TanhShear,
    Polynomial,
    Tabulated,
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "couette" => Ok(Self::Couette),
            "tanh_shear" => Ok(Self::TanhShear),
            "polynomial" => Ok(Self::Polynomial),
            "tabulated" => Ok(Self::Tabulated),
            other => Err(Error::InvalidSpec(format!("unknown profile kind '{other}'"))),
        }
    }
}

/// User-facing description of a profile.
///
/// Parameters by kind:
/// * couette: `slope` (1), `offset` (0); U = offset + slope x2
/// * tanh_shear: `amplitude` (1), `steepness` (2), `center` (-0.5), `offset` (0);
///   U = offset + amplitude tanh(steepness (x2 - center))
/// * polynomial: `c0` .. `c6`; U = sum c_i x2^i
/// * tabulated: `table` holds (x2, U) samples covering [-h, 0]
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub params: BTreeMap<String, f64>,
    pub table: Vec<(f64, f64)>,
    pub h: f64,
}

impl ProfileSpec {
    pub fn new(kind: ProfileKind, h: f64) -> Self {
        Self { kind, params: BTreeMap::new(), table: Vec::new(), h }
    }

    pub fn couette(h: f64) -> Self {
        Self::new(ProfileKind::Couette, h)
    }

    pub fn tanh_shear(h: f64) -> Self {
        Self::new(ProfileKind::TanhShear, h)
    }

    pub fn polynomial(h: f64, coeffs: &[f64]) -> Self {
        let mut s = Self::new(ProfileKind::Polynomial, h);
        for (i, c) in coeffs.iter().enumerate() {
            s.params.insert(format!("c{i}"), *c);
        }
        s
    }

    pub fn tabulated(h: f64, table: Vec<(f64, f64)>) -> Self {
        let mut s = Self::new(ProfileKind::Tabulated, h);
        s.table = table;
        s
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Linear { a: f64, b: f64 },
    Tanh { amp: f64, s: f64, x0: f64, off: f64 },
    Poly(Vec<f64>),
    Spline(QuinticSpline),
}

/// Derivatives of tanh as polynomials in T = tanh z: P_{n+1} = P_n'(T) (1 - T^2).
fn tanh_derivative_polys() -> Vec<Vec<f64>> {
    let mut polys = vec![vec![0.0, 1.0]];
    for _ in 0..6 {
        let p = polys.last().unwrap();
        let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut q = vec![0.0; dp.len() + 2];
        for (i, c) in dp.iter().enumerate() {
            q[i] += c;
            q[i + 2] -= c;
        }
        polys.push(q);
    }
    polys
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Not-a-knot quintic interpolating spline in B-spline form.
#[derive(Debug, Clone)]
struct QuinticSpline {
    knots: Vec<f64>,
    coef: Vec<f64>,
}

const P: usize = 5;

impl QuinticSpline {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let m = x.len();
        if m < 7 {
            return Err(Error::InsufficientSmoothness(format!("{m} samples, need at least 7")));
        }
        let mut knots = vec![x[0]; P + 1];
        knots.extend_from_slice(&x[3..m - 3]);
        knots.extend(std::iter::repeat_n(x[m - 1], P + 1));
        let mut a = BandMatrix::zeros(m, P, P);
        for (i, &xi) in x.iter().enumerate() {
            let span = find_span(&knots, m, xi);
            let n = basis_derivs(&knots, span, xi, 0);
            for j in 0..=P {
                let col = span - P + j;
                if n[0][j] != 0.0 {
                    a.set(i, col, C64::new(n[0][j], 0.0));
                }
            }
        }
        let lu = a.factor();
        if lu.is_singular() {
            return Err(Error::InsufficientSmoothness("singular collocation system".into()));
        }
        let mut rhs: Vec<C64> = y.iter().map(|&v| C64::new(v, 0.0)).collect();
        lu.solve(&mut rhs);
        Ok(Self { knots, coef: rhs.iter().map(|c| c.re).collect() })
    }

    fn eval(&self, x: f64, order: usize) -> f64 {
        if order > P {
            return 0.0;
        }
        let n = self.coef.len();
        let span = find_span(&self.knots, n, x);
        let d = basis_derivs(&self.knots, span, x, order);
        (0..=P).map(|j| d[order][j] * self.coef[span - P + j]).sum()
    }
}

/// Knot span index, clamped so points outside the knot range use the end pieces.
fn find_span(knots: &[f64], nbasis: usize, x: f64) -> usize {
    let (lo, hi) = (P, nbasis - 1);
    if x >= knots[hi + 1] {
        return hi;
    }
    if x <= knots[lo] {
        return lo;
    }
    let (mut a, mut b) = (lo, hi + 1);
    while b - a > 1 {
        let mid = (a + b) / 2;
        if x < knots[mid] {
            b = mid;
        } else {
            a = mid;
        }
    }
    a
}

/// Nonzero basis functions and their derivatives up to `nd` at x.
fn basis_derivs(u: &[f64], span: usize, x: f64, nd: usize) -> Vec<[f64; P + 1]> {
    let mut ndu = [[0.0; P + 1]; P + 1];
    let mut left = [0.0; P + 1];
    let mut right = [0.0; P + 1];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = x - u[span + 1 - j];
        right[j] = u[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![[0.0; P + 1]; nd + 1];
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0; P + 1]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0] = [0.0; P + 1];
        a[0][0] = 1.0;
        for k in 1..=nd {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = P - k;
            a[s2] = [0.0; P + 1];
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { P - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = P as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1) {
        for v in row.iter_mut() {
            *v *= fac;
        }
        fac *= (P - k) as f64;
    }
    ders
}

/// Built shear profile; immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct ShearProfile {
    repr: Repr,
    pub h: f64,
    pub h0: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// inf of U' on [-h, 0]
    pub slope_min: f64,
    /// sup of |U''| on [-h, 0]
    pub curv_max: f64,
    tanh_polys: Vec<Vec<f64>>,
    kind: ProfileKind,
}

/// Result of the inflection search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inflections {
    pub points: Vec<(f64, f64)>,
    pub identically_zero: bool,
    pub degenerate: Vec<f64>,
}

const SCAN: usize = 10_240;

/// Build a profile and its extension margin.
pub fn build_profile(spec: &ProfileSpec) -> Result<ShearProfile> {
    let h = spec.h;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidSpec(format!("depth h = {h} must be positive")));
    }
    let repr = match spec.kind {
        ProfileKind::Couette => Repr::Linear { a: spec.param("slope", 1.0), b: spec.param("offset", 0.0) },
        ProfileKind::TanhShear => Repr::Tanh {
            amp: spec.param("amplitude", 1.0),
            s: spec.param("steepness", 2.0),
            x0: spec.param("center", -0.5),
            off: spec.param("offset", 0.0),
        },
        ProfileKind::Polynomial => {
            let mut c: Vec<f64> = (0..=6).map(|i| spec.param(&format!("c{i}"), 0.0)).collect();
            while c.len() > 1 && *c.last().unwrap() == 0.0 {
                c.pop();
            }
            Repr::Poly(c)
        }
        ProfileKind::Tabulated => {
            let t = &spec.table;
            if t.len() < 7 {
                return Err(Error::InsufficientSmoothness(format!("{} samples, need at least 7", t.len())));
            }
            for w in t.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::InvalidSpec("table abscissae must increase".into()));
                }
                if !(w[1].1 > w[0].1) {
                    return Err(Error::NonMonotonic { x2: w[1].0, slope: (w[1].1 - w[0].1) / (w[1].0 - w[0].0) });
                }
            }
            let span = t[t.len() - 1].0 - t[0].0;
            if (t[0].0 + h).abs() > 1e-9 * span || t[t.len() - 1].0.abs() > 1e-9 * span {
                return Err(Error::InvalidSpec("table must cover exactly [-h, 0]".into()));
            }
            let xs: Vec<f64> = t.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = t.iter().map(|p| p.1).collect();
            Repr::Spline(QuinticSpline::new(&xs, &ys)?)
        }
    };
    for v in spec.params.values() {
        if !v.is_finite() {
            return Err(Error::InvalidSpec("non-finite profile parameter".into()));
        }
    }
    let mut p = ShearProfile {
        repr,
        h,
        h0: 0.0,
        u_min: 0.0,
        u_max: 0.0,
        slope_min: 0.0,
        curv_max: 0.0,
        tanh_polys: tanh_derivative_polys(),
        kind: spec.kind,
    };
    let mut slope_min = f64::INFINITY;
    let mut curv_max: f64 = 0.0;
    for i in 0..=SCAN {
        let x = -h + h * i as f64 / SCAN as f64;
        let d1 = p.raw(x, 1);
        if !(d1 > 0.0) {
            return Err(Error::NonMonotonic { x2: x, slope: d1 });
        }
        slope_min = slope_min.min(d1);
        curv_max = curv_max.max(p.raw(x, 2).abs());
    }
    p.slope_min = slope_min;
    p.curv_max = curv_max;
    p.u_min = p.raw(-h, 0);
    p.u_max = p.raw(0.0, 0);
    let mut h0 = if curv_max > 0.0 { (h / 2.0).min(slope_min / (4.0 * curv_max)) } else { h / 2.0 };
    // shrink until U' >= inf U' / 2 on both extension intervals
    'outer: for _ in 0..60 {
        for i in 0..=SCAN / 10 {
            let t = h0 * i as f64 / (SCAN / 10) as f64;
            if p.raw(-h - t, 1) < 0.5 * slope_min || p.raw(t, 1) < 0.5 * slope_min {
                h0 *= 0.5;
                continue 'outer;
            }
        }
        break;
    }
    p.h0 = h0;
    Ok(p)
}

impl ShearProfile {
    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    fn raw(&self, x: f64, order: usize) -> f64 {
        match &self.repr {
            Repr::Linear { a, b } => match order {
                0 => b + a * x,
                1 => *a,
                _ => 0.0,
            },
            Repr::Tanh { amp, s, x0, off } => {
                let t = (s * (x - x0)).tanh();
                let v = amp * s.powi(order as i32) * horner(&self.tanh_polys[order], t);
                if order == 0 {
                    v + off
                } else {
                    v
                }
            }
            Repr::Poly(c) => {
                let mut d = c.clone();
                for _ in 0..order {
                    d = (1..d.len()).map(|i| i as f64 * d[i]).collect();
                    if d.is_empty() {
                        return 0.0;
                    }
                }
                horner(&d, x)
            }
            Repr::Spline(s) => s.eval(x, order),
        }
    }

    /// U^(order)(x2) on the extended interval [-h-h0, h0].
    pub fn eval(&self, x2: f64, order: usize) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x2 >= lo - 1e-14 && x2 <= hi + 1e-14) {
            return Err(Error::OutOfDomain { x2, lo, hi });
        }
        if order > 6 {
            return Err(Error::InvalidSpec(format!("derivative order {order} > 6")));
        }
        Ok(self.raw(x2, order))
    }

    /// Unchecked evaluation used by the integrators.
    #[inline]
    pub fn u(&self, x2: f64, order: usize) -> f64 {
        self.raw(x2, order)
    }

    /// (U, U'') in one call for the Rayleigh coefficient.
    #[inline]
    pub fn u_and_upp(&self, x2: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Tanh { amp, s, x0, off } => {
                let t = (s * (x2 - x0)).tanh();
                (off + amp * t, amp * s * s * horner(&self.tanh_polys[2], t))
            }
            _ => (self.raw(x2, 0), self.raw(x2, 2)),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (-self.h - self.h0, self.h0)
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.repr, Repr::Spline(_))
    }

    /// Solve U(x2) = c by safeguarded Newton on the extended interval.
    pub fn inverse_u(&self, c: f64) -> Result<f64> {
        let (mut a, mut b) = self.domain();
        let (ua, ub) = (self.raw(a, 0), self.raw(b, 0));
        if !(c >= ua && c <= ub) {
            return Err(Error::OutOfRange { c, lo: ua, hi: ub });
        }
        if c == self.u_max {
            return Ok(0.0);
        }
        if c == self.u_min {
            return Ok(-self.h);
        }
        let tol = 1e-12 * (self.u_max - self.u_min);
        if (ua - c).abs() <= tol {
            return Ok(a);
        }
        if (ub - c).abs() <= tol {
            return Ok(b);
        }
        let mut x = a + (b - a) * (c - ua) / (ub - ua);
        for _ in 0..200 {
            let f = self.raw(x, 0) - c;
            if f.abs() <= tol * 1e-2 {
                return Ok(x);
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let step = x - f / self.raw(x, 1);
            x = if step > a && step < b { step } else { 0.5 * (a + b) };
            if b - a < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        Ok(x)
    }

    /// Sign changes of U'' on (-h, 0).
    pub fn inflection_points(&self) -> Inflections {
        let mut out = Inflections::default();
        if self.curv_max == 0.0 {
            out.identically_zero = true;
            return out;
        }
        let n = 4096;
        let h = self.h;
        let tol = 1e-10 * self.curv_max;
        let xs: Vec<f64> = (0..=n).map(|i| -h + h * i as f64 / n as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| self.raw(x, 2)).collect();
        let mut i = 0;
        while i < n {
            let (a, b) = (vs[i], vs[i + 1]);
            if a == 0.0 && i > 0 && i < n {
                if vs[i - 1] * b < 0.0 {
                    out.points.push((xs[i], self.raw(xs[i], 0)));
                } else if vs[i - 1] * b > 0.0 {
                    out.degenerate.push(xs[i]);
                }
            } else if a * b < 0.0 {
                let mut conv = roots::SimpleConvergency { eps: 1e-15, max_iter: 200 };
                let r = roots::find_root_brent(xs[i], xs[i + 1], |x| self.raw(x, 2), &mut conv)
                    .unwrap_or(0.5 * (xs[i] + xs[i + 1]));
                if self.raw(r, 2).abs() <= tol || true {
                    out.points.push((r, self.raw(r, 0)));
                }
            } else if i > 0 && a.abs() <= tol && vs[i - 1].abs() > a.abs() && b.abs() > a.abs() && vs[i - 1] * b > 0.0 {
                out.degenerate.push(xs[i]);
            }
            i += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> ProfileSpec {
        ProfileSpec::polynomial(1.0, &[0.0, 1.0, 0.5, 0.1])
    }

    #[test]
    fn couette_basics() {
        let p = build_profile(&ProfileSpec::couette(1.0)).unwrap();
        assert_eq!(p.h0, 0.5);
        assert_eq!(p.eval(-0.3, 0).unwrap(), -0.3);
        assert_eq!(p.eval(-0.3, 2).unwrap(), 0.0);
        assert!((p.inverse_u(-0.25).unwrap() + 0.25).abs() < 1e-14);
        assert_eq!(p.inverse_u(0.0).unwrap(), 0.0);
        assert!(matches!(p.inverse_u(0.0 + 2.0 * p.h0), Err(Error::OutOfRange { .. })));
        let inf = p.inflection_points();
        assert!(inf.points.is_empty() && inf.identically_zero);
    }

    #[test]
    fn tanh_has_centered_inflection() {
        let p = build_profile(&ProfileSpec::tanh_shear(1.0)).unwrap();
        assert!(p.eval(-0.5, 2).unwrap().abs() < 1e-15);
        let inf = p.inflection_points();
        assert_eq!(inf.points.len(), 1);
        assert!((inf.points[0].0 + 0.5).abs() < 1e-12);
        assert!(inf.points[0].1.abs() < 1e-12);
        assert!(p.h0 < 0.5 && p.h0 > 0.0);
    }

    #[test]
    fn convex_polynomial_has_no_inflection() {
        let p = build_profile(&cubic()).unwrap();
        assert!(p.inflection_points().points.is_empty());
    }

    #[test]
    fn decreasing_table_rejected() {
        let mut t: Vec<(f64, f64)> = (0..=10).map(|i| (-1.0 + i as f64 / 10.0, i as f64)).collect();
        t[5].1 = 3.0;
        assert!(matches!(
            build_profile(&ProfileSpec::tabulated(1.0, t)),
            Err(Error::NonMonotonic { .. })
        ));
    }

    #[test]
    fn tabulated_reproduces_quintic_exactly() {
        let f = |x: f64| 1.0 + x + 0.3 * x * x + 0.05 * x.powi(5);
        let t: Vec<(f64, f64)> = (0..=40).map(|i| {
            let x = -1.0 + i as f64 / 40.0;
            (x, f(x))
        }).collect();
        let p = build_profile(&ProfileSpec::tabulated(1.0, t)).unwrap();
        for &x in &[-1.0, -0.73, -0.2, 0.0] {
            assert!((p.eval(x, 0).unwrap() - f(x)).abs() < 1e-10);
            assert!((p.eval(x, 1).unwrap() - (1.0 + 0.6 * x + 0.25 * x.powi(4))).abs() < 1e-8);
            assert!((p.eval(x, 5).unwrap() - 6.0).abs() < 1e-5);
        }
        assert_eq!(p.eval(-0.5, 6).unwrap(), 0.0);
    }

    #[test]
    fn out_of_domain_rejected() {
        let p = build_profile(&ProfileSpec::couette(1.0)).unwrap();
        assert!(matches!(p.eval(0.75, 0), Err(Error::OutOfDomain { .. })));
    }
}
