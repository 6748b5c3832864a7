//! Banded LU with partial pivoting and a tridiagonal solver.

use num_complex::Complex64 as C64;

/// Square band matrix with `kl` sub- and `ku` super-diagonals, plus `kl` extra
/// super-diagonals of fill room for pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![C64::new(0.0, 0.0); n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.idx(i, j).map_or(C64::new(0.0, 0.0), |p| self.data[p])
    }

    /// Panics if (i, j) lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let lo = i.saturating_sub(self.kl);
        assert!(j >= lo && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let p = self.idx(i, j).expect("index in band");
        self.data[p] = v;
    }

    /// In-place LU factorization with row pivoting.
    pub fn factor(mut self) -> BandLu {
        let n = self.n;
        let mut piv = vec![0usize; n];
        let mut singular = false;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=last {
                let v = self.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            let jmax = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j).unwrap();
                    let b = self.idx(p, j).unwrap();
                    self.data.swap(a, b);
                }
            }
            let d = self.get(k, k);
            if d.norm() == 0.0 {
                singular = true;
                continue;
            }
            for i in k + 1..=last {
                let li = self.idx(i, k).unwrap();
                let m = self.data[li] / d;
                self.data[li] = m;
                if m.norm() == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let kj = self.get(k, j);
                    let ij = self.idx(i, j).unwrap();
                    self.data[ij] -= m * kj;
                }
            }
        }
        BandLu { m: self, piv, singular }
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    singular: bool,
}

impl BandLu {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Determinant as (unit phase, natural log of modulus).
    pub fn log_det(&self) -> (C64, f64) {
        let mut phase = C64::new(1.0, 0.0);
        let mut ln = 0.0;
        for k in 0..self.m.n {
            let d = self.m.get(k, k);
            let r = d.norm();
            if r == 0.0 {
                return (C64::new(0.0, 0.0), f64::NEG_INFINITY);
            }
            ln += r.ln();
            phase *= d / r;
            if self.piv[k] != k {
                phase = -phase;
            }
        }
        (phase, ln)
    }

    pub fn solve(&self, rhs: &mut [C64]) {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                rhs.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                let m = self.m.get(i, k);
                let v = rhs[k];
                rhs[i] -= m * v;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            let mut s = rhs[k];
            for j in k + 1..=jmax {
                s -= self.m.get(k, j) * rhs[j];
            }
            rhs[k] = s / self.m.get(k, k);
        }
    }
}

/// Thomas algorithm for `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]`.
/// Overwrites `d` with the solution; `c` is used as scratch.
pub fn solve_tridiagonal(a: &[C64], b: &[C64], c: &mut [C64], d: &mut [C64]) -> bool {
    let n = d.len();
    if n == 0 {
        return true;
    }
    let mut beta = b[0];
    if beta.norm() == 0.0 {
        return false;
    }
    d[0] /= beta;
    for i in 1..n {
        let gamma = c[i - 1] / beta;
        c[i - 1] = gamma;
        beta = b[i] - a[i] * gamma;
        if beta.norm() == 0.0 {
            return false;
        }
        let prev = d[i - 1];
        d[i] = (d[i] - a[i] * prev) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    true
}
