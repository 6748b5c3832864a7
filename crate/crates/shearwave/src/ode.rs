//! Dormand–Prince 5(4) integrator for complex first-order systems.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn comb<const N: usize>(y: &[C64; N], h: f64, terms: &[(f64, &[C64; N])]) -> [C64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let s = h * c;
        for i in 0..N {
            out[i] += k[i] * s;
        }
    }
    out
}

/// Integrate `y' = f(x, y)` from `x0` to `x1` (either direction).
///
/// `h` carries the step magnitude between calls; pass 0 to let the
/// integrator choose one.
pub fn integrate<const N: usize, F>(
    f: &mut F,
    x0: f64,
    y0: [C64; N],
    x1: f64,
    opt: &OdeOptions,
    h: &mut f64,
) -> Result<[C64; N]>
where
    F: FnMut(f64, &[C64; N]) -> [C64; N],
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut step = if *h > 0.0 { *h } else { (span.abs() / 64.0).min(opt.h_max) };
    step = step.min(opt.h_max).min(span.abs());
    let mut k1 = f(x, &y);
    loop {
        let remaining = (x1 - x).abs();
        if remaining <= 1e-15 * (1.0 + x1.abs()) {
            break;
        }
        let last = step >= remaining;
        let hs = if last { remaining * dir } else { step * dir };
        let k2 = f(x + 0.2 * hs, &comb(&y, hs, &[(A21, &k1)]));
        let k3 = f(x + 0.3 * hs, &comb(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + 0.8 * hs, &comb(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(x + 8.0 / 9.0 * hs, &comb(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(x + hs, &comb(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let yn = comb(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let xn = if last { x1 } else { x + hs };
        let k7 = f(xn, &yn);
        let mut err: f64 = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
            let sc = opt.atol + opt.rtol * y[i].norm().max(yn[i].norm());
            let r = e.norm() / sc;
            if !r.is_finite() || !yn[i].re.is_finite() || !yn[i].im.is_finite() {
                finite = false;
            }
            err = err.max(r);
        }
        if finite && err <= 1.0 {
            x = xn;
            y = yn;
            k1 = k7;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last {
                step = (step * fac).min(opt.h_max);
            }
            if last {
                break;
            }
        } else {
            let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
            step *= fac;
            if step < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::StepFailure { x2: x });
            }
        }
    }
    *h = step;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let opt = OdeOptions { rtol: 1e-12, atol: 1e-14, h_max: 1.0 };
        let mut h = 0.0;
        let mut f = |_x: f64, y: &[C64; 2]| [y[1], -y[0]];
        let y = integrate(&mut f, 0.0, [C64::new(0.0, 0.0), C64::new(1.0, 0.0)], 3.0, &opt, &mut h).unwrap();
        assert!((y[0].re - 3f64.sin()).abs() < 1e-10);
        let mut g = |_x: f64, y: &[C64; 1]| [y[0] * C64::new(0.0, 2.0)];
        let mut h = 0.0;
        let y = integrate(&mut g, 1.0, [C64::new(1.0, 0.0)], -1.0, &opt, &mut h).unwrap();
        assert!((y[0] - C64::new(0.0, -4.0).exp()).norm() < 1e-10);
    }
}
