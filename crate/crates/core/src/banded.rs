//! Banded storage and solvers.
//!
//! `SymBand` holds the radial stiffness matrix (half-bandwidth 3), `BandLu` is a
//! real banded LU with partial pivoting used for shifted solves, and
//! `ComplexBandLu` factors `D + iβK` without pivoting for the Cayley step.

use crate::ddouble::Dd;
use num_complex::Complex64;

/// Real symmetric banded matrix: `bands[k][i] = A[i][i + k]`.
#[derive(Clone, Debug)]
pub struct SymBand {
    pub n: usize,
    pub bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, p: usize) -> Self {
        SymBand {
            n,
            bands: (0..=p).map(|k| vec![0.0; n.saturating_sub(k)]).collect(),
        }
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    /// Adds `v` to both `A[i][j]` and `A[j][i]` (once on the diagonal).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.bands[b - a][a] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let k = b - a;
        if k < self.bands.len() {
            self.bands[k][a]
        } else {
            0.0
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(d, x)| d * x).collect();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] += a * x[i + k];
                y[i + k] += a * x[i];
            }
        }
        y
    }

    pub fn apply_dd(&self, x: &[Dd]) -> Vec<Dd> {
        let mut y: Vec<Dd> = self.bands[0].iter().zip(x).map(|(d, x)| x.mul_f64(*d)).collect();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] = y[i] + x[i + k].mul_f64(a);
                y[i + k] = y[i + k] + x[i].mul_f64(a);
            }
        }
        y
    }

    pub fn apply_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y: Vec<Complex64> = self.bands[0].iter().zip(x).map(|(d, x)| x * d).collect();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] += x[i + k] * a;
                y[i + k] += x[i] * a;
            }
        }
        y
    }

    /// Real bilinear form `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.apply(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// General real banded matrix with LU (partial pivoting) in LINPACK layout.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    // row-major: row i holds columns i-kl ..= i+ku+kl (extra kl for pivot fill)
    data: Vec<f64>,
    width: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, data: vec![0.0; n * width], width }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc += self.data[i * self.width + j + self.kl - i] * xj;
            }
            *yi = acc;
        }
        y
    }

    /// Factors in place; returns the LU object or the first zero pivot index.
    pub fn factor(mut self) -> Result<BandLu, usize> {
        let n = self.n;
        let kl = self.kl;
        let mut piv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in (k + 1)..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 {
                return Err(k);
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            let jmax = (k + self.ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j).unwrap();
                    let b = self.slot(p, j).unwrap();
                    self.data.swap(a, b);
                }
            }
            let d = self.get(k, k);
            for i in (k + 1)..=last {
                let si = self.slot(i, k).unwrap();
                let l = self.data[si] / d;
                self.data[si] = l;
                if l != 0.0 {
                    for j in (k + 1)..=jmax {
                        let u = self.data[self.slot(k, j).unwrap()];
                        let s = self.slot(i, j).unwrap();
                        self.data[s] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv, pivot_ratio: min_pivot / max_pivot })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    /// min |pivot| / max |pivot|, a cheap conditioning indicator.
    pub pivot_ratio: f64,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.m.n;
        let kl = self.m.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            let xk = x[k];
            for (i, xi) in x.iter_mut().enumerate().take(last + 1).skip(k + 1) {
                *xi -= self.m.get(i, k) * xk;
            }
        }
        let w = self.m.ku + kl;
        for k in (0..n).rev() {
            let jmax = (k + w).min(n - 1);
            let mut acc = x[k];
            for (j, xj) in x.iter().enumerate().take(jmax + 1).skip(k + 1) {
                acc -= self.m.get(k, j) * xj;
            }
            x[k] = acc / self.m.get(k, k);
        }
        x
    }
}

/// LU of the complex symmetric banded matrix `diag(d) + iβ·K` without pivoting.
///
/// The real part is positive definite, so the factorization exists and is stable.
#[derive(Clone, Debug)]
pub struct ComplexBandLu {
    n: usize,
    p: usize,
    // lower[k][i] = L[i + k][i], upper[k][i] = U[i][i + k]
    lower: Vec<Vec<Complex64>>,
    upper: Vec<Vec<Complex64>>,
}

impl ComplexBandLu {
    pub fn new(d: &[f64], beta: f64, k: &SymBand) -> Self {
        let n = k.n;
        let p = k.half_bandwidth();
        let i = Complex64::i();
        let mut a: Vec<Vec<Complex64>> = Vec::with_capacity(2 * p + 1);
        // a[p + off][row] = A[row][row + off]
        for off in -(p as isize)..=(p as isize) {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            for (row, slot) in v.iter_mut().enumerate() {
                let col = row as isize + off;
                if col < 0 || col >= n as isize {
                    continue;
                }
                let kv = k.get(row, col as usize);
                *slot = i * (beta * kv);
                if off == 0 {
                    *slot += d[row];
                }
            }
            a.push(v);
        }
        let at = |a: &Vec<Vec<Complex64>>, r: usize, c: usize| a[(c as isize - r as isize + p as isize) as usize][r];
        let mut lower = vec![vec![Complex64::new(0.0, 0.0); n]; p + 1];
        let mut upper = vec![vec![Complex64::new(0.0, 0.0); n]; p + 1];
        for r in 0..n {
            // U row r
            for c in r..(r + p + 1).min(n) {
                let mut s = at(&a, r, c);
                let lo = c.saturating_sub(p).max(r.saturating_sub(p));
                for m in lo..r {
                    s -= lower[r - m][m] * upper[c - m][m];
                }
                upper[c - r][r] = s;
            }
            // L column r
            lower[0][r] = Complex64::new(1.0, 0.0);
            for rr in (r + 1)..(r + p + 1).min(n) {
                let mut s = at(&a, rr, r);
                let lo = rr.saturating_sub(p).max(r.saturating_sub(p));
                for m in lo..r {
                    s -= lower[rr - m][m] * upper[r - m][m];
                }
                lower[rr - r][r] = s / upper[0][r];
            }
        }
        ComplexBandLu { n, p, lower, upper }
    }

    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, p) = (self.n, self.p);
        for r in 0..n {
            let mut s = x[r];
            for m in r.saturating_sub(p)..r {
                s -= self.lower[r - m][m] * x[m];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in (r + 1)..(r + p + 1).min(n) {
                s -= self.upper[c - r][r] * x[c];
            }
            x[r] = s / self.upper[0][r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_sym(n: usize) -> SymBand {
        let mut a = SymBand::zeros(n, 3);
        for i in 0..n {
            a.add_sym(i, i, 4.0 + i as f64 * 0.1);
            if i + 1 < n {
                a.add_sym(i, i + 1, -1.0);
            }
            if i + 3 < n {
                a.add_sym(i, i + 3, 0.25);
            }
        }
        a
    }

    #[test]
    fn sym_apply_matches_dense() {
        let a = sample_sym(9);
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let y = a.apply(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_vec(x);
        for i in 0..9 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn band_lu_solves_with_pivoting() {
        let n = 12;
        let mut m = BandMatrix::zeros(n, 2, 3);
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 4).min(n) {
                let v = ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 0.01 } else { 0.0 };
                m.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b = m.apply(&x);
        let lu = m.factor().unwrap();
        let y = lu.solve(&b);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-9, "{i}: {} vs {}", x[i], y[i]);
        }
    }

    #[test]
    fn complex_lu_inverts() {
        let n = 15;
        let k = sample_sym(n);
        let d: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64).collect();
        let beta = 0.7;
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64 * 0.3)).collect();
        let kx = k.apply_c(&x);
        let mut b: Vec<Complex64> = (0..n).map(|i| x[i] * d[i] + Complex64::i() * beta * kx[i]).collect();
        ComplexBandLu::new(&d, beta, &k).solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).norm() < 1e-10);
        }
    }
}
