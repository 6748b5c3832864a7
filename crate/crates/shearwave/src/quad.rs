//! Quadrature, grid calculus and interpolation helpers.

use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

fn rule16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(16.try_into().unwrap()).as_node_weight_pairs().to_vec()
    })
}

/// Nodes and weights of the 16-point Gauss–Legendre rule mapped to [a, b].
pub fn gl16(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule16().iter().map(move |&(x, w)| (m + r * x, r * w))
}

/// Composite 16-point Gauss–Legendre over the panels defined by `breaks`.
pub fn gl_panels<T, F>(breaks: &[f64], mut f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: FnMut(f64) -> T,
{
    let mut acc = T::default();
    for w in breaks.windows(2) {
        for (x, wt) in gl16(w[0], w[1]) {
            acc = acc + f(x) * wt;
        }
    }
    acc
}

/// Panel breaks on [a, b], uniform in the middle and geometrically graded
/// toward either end down to `finest` times the interval length.
pub fn graded_breaks(a: f64, b: f64, interior: usize, finest: f64, grade_lo: bool, grade_hi: bool) -> Vec<f64> {
    let len = b - a;
    let mut t: Vec<f64> = Vec::new();
    let edge = 0.1;
    let mut lo = vec![0.0];
    if grade_lo {
        let mut s = finest;
        while s < edge {
            lo.push(s);
            s *= 10.0;
        }
    }
    t.extend(lo);
    for i in 0..=interior {
        t.push(edge + (1.0 - 2.0 * edge) * i as f64 / interior as f64);
    }
    if grade_hi {
        let mut s = edge / 10.0;
        while s >= finest {
            t.push(1.0 - s);
            s /= 10.0;
        }
    }
    t.push(1.0);
    t.dedup_by(|x, y| (*x - *y).abs() < 1e-300);
    t.into_iter().map(|s| a + len * s).collect()
}

/// Fourth-order weights (alternative extended Simpson) for a uniform grid
/// with spacing `dx`; needs at least 8 points.
pub fn grid_weights(n: usize, dx: f64) -> Vec<f64> {
    assert!(n >= 8, "grid too small for fourth-order weights");
    let mut w = vec![dx; n];
    let ends = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
    for (i, e) in ends.iter().enumerate() {
        w[i] = e * dx;
        w[n - 1 - i] = e * dx;
    }
    w
}

pub fn integrate_grid(f: &[C64], dx: f64) -> C64 {
    grid_weights(f.len(), dx).iter().zip(f).map(|(w, v)| v * *w).sum()
}

/// Discrete L2 norm with fourth-order weights.
pub fn l2_norm(f: &[C64], dx: f64) -> f64 {
    grid_weights(f.len(), dx).iter().zip(f).map(|(w, v)| w * v.norm_sqr()).sum::<f64>().sqrt()
}

/// First derivative on a uniform grid: five-point central stencil inside,
/// one-sided fourth-order stencils at the two ends.
pub fn derivative(f: &[C64], dx: f64) -> Vec<C64> {
    let n = f.len();
    assert!(n >= 5);
    let mut d = vec![C64::new(0.0, 0.0); n];
    let fwd = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let cen1 = [-3.0, -10.0, 18.0, -6.0, 1.0];
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) / (12.0 * dx);
    }
    d[0] = (0..5).map(|m| f[m] * fwd[m]).sum::<C64>() / (12.0 * dx);
    d[1] = (0..5).map(|m| f[m] * cen1[m]).sum::<C64>() / (12.0 * dx);
    d[n - 1] = -(0..5).map(|m| f[n - 1 - m] * fwd[m]).sum::<C64>() / (12.0 * dx);
    d[n - 2] = -(0..5).map(|m| f[n - 1 - m] * cen1[m]).sum::<C64>() / (12.0 * dx);
    d
}

/// Second derivative on a uniform grid, fourth order everywhere.
pub fn second_derivative(f: &[C64], dx: f64) -> Vec<C64> {
    let n = f.len();
    assert!(n >= 6);
    let mut d = vec![C64::new(0.0, 0.0); n];
    for i in 2..n - 2 {
        d[i] = (-f[i - 2] + f[i - 1] * 16.0 - f[i] * 30.0 + f[i + 1] * 16.0 - f[i + 2]) / (12.0 * dx * dx);
    }
    let e0 = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    let e1 = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
    let s = 12.0 * dx * dx;
    d[0] = (0..6).map(|m| f[m] * e0[m]).sum::<C64>() / s;
    d[1] = (0..6).map(|m| f[m] * e1[m]).sum::<C64>() / s;
    d[n - 1] = (0..6).map(|m| f[n - 1 - m] * e0[m]).sum::<C64>() / s;
    d[n - 2] = (0..6).map(|m| f[n - 1 - m] * e1[m]).sum::<C64>() / s;
    d
}

/// Piecewise cubic Hermite interpolant of uniform grid data, with nodal
/// slopes from fourth-order differences.
#[derive(Debug, Clone)]
pub struct GridInterp {
    x0: f64,
    dx: f64,
    v: Vec<C64>,
    d: Vec<C64>,
}

impl GridInterp {
    pub fn new(x0: f64, dx: f64, v: &[C64]) -> Self {
        let d = derivative(v, dx);
        Self { x0, dx, v: v.to_vec(), d }
    }

    /// Value and first three derivatives at x (clamped to the grid).
    pub fn eval(&self, x: f64) -> [C64; 4] {
        let n = self.v.len();
        let s = ((x - self.x0) / self.dx).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let h = self.dx;
        let (p0, p1, m0, m1) = (self.v[i], self.v[i + 1], self.d[i] * h, self.d[i + 1] * h);
        // cubic in t: a + b t + c t^2 + d t^3
        let a = p0;
        let b = m0;
        let c = (p1 - p0) * 3.0 - m0 * 2.0 - m1;
        let d = (p0 - p1) * 2.0 + m0 + m1;
        let val = a + t * (b + t * (c + t * d));
        let d1 = (b + t * (c * 2.0 + t * d * 3.0)) / h;
        let d2 = (c * 2.0 + d * (6.0 * t)) / (h * h);
        let d3 = d * 6.0 / (h * h * h);
        [val, d1, d2, d3]
    }

    pub fn value(&self, x: f64) -> C64 {
        self.eval(x)[0]
    }
}
