//! Double-double arithmetic for residual evaluation in iterative refinement.

use crate::grid::{FieldPair, C64};
use std::ops::{Add, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self - Dd::new(b).mul_f64(q1);
        let q2 = r.hi / b;
        let r = r - Dd::new(b).mul_f64(q2);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

/// Complex double-double.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub fn from_c64(z: C64) -> Self {
        Cdd { re: Dd::new(z.re), im: Dd::new(z.im) }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> Self {
        Cdd { re: self.re, im: -self.im }
    }

    pub fn times_i(self) -> Self {
        Cdd { re: -self.im, im: self.re }
    }

    pub fn scale(self, a: Dd) -> Self {
        Cdd { re: self.re * a, im: self.im * a }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, b: Cdd) -> Cdd {
        Cdd { re: self.re + b.re, im: self.im + b.im }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, b: Cdd) -> Cdd {
        Cdd { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, b: Cdd) -> Cdd {
        Cdd { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}

/// A `FieldPair` in double-double precision.
#[derive(Clone, Debug, PartialEq)]
pub struct DdPair {
    pub u: Vec<Cdd>,
    pub v: Vec<Cdd>,
    pub kappa: f64,
}

impl DdPair {
    pub fn zeros(n: usize, kappa: f64) -> Self {
        DdPair { u: vec![Cdd::default(); n], v: vec![Cdd::default(); n], kappa }
    }

    pub fn from_pair(f: &FieldPair) -> Self {
        DdPair { u: f.u.iter().map(|z| Cdd::from_c64(*z)).collect(), v: f.v.iter().map(|z| Cdd::from_c64(*z)).collect(), kappa: f.kappa }
    }

    pub fn to_pair(&self) -> FieldPair {
        FieldPair { u: self.u.iter().map(|z| z.to_c64()).collect(), v: self.v.iter().map(|z| z.to_c64()).collect(), kappa: self.kappa }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn zip(&self, o: &DdPair, f: impl Fn(Cdd, Cdd) -> Cdd) -> DdPair {
        DdPair {
            u: self.u.iter().zip(&o.u).map(|(a, b)| f(*a, *b)).collect(),
            v: self.v.iter().zip(&o.v).map(|(a, b)| f(*a, *b)).collect(),
            kappa: self.kappa,
        }
    }

    pub fn add(&self, o: &DdPair) -> DdPair {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &DdPair) -> DdPair {
        self.zip(o, |a, b| a - b)
    }

    /// Adds a double-precision correction.
    pub fn add_pair(&self, o: &FieldPair) -> DdPair {
        self.add(&DdPair::from_pair(o))
    }

    pub fn scale(&self, a: Dd) -> DdPair {
        DdPair { u: self.u.iter().map(|z| z.scale(a)).collect(), v: self.v.iter().map(|z| z.scale(a)).collect(), kappa: self.kappa }
    }

    pub fn times_i(&self) -> DdPair {
        DdPair { u: self.u.iter().map(|z| z.times_i()).collect(), v: self.v.iter().map(|z| z.times_i()).collect(), kappa: self.kappa }
    }
}

/// `B(a, b) = (ā₁b₂ + b̄₁a₂, a₁b₁)`.
pub fn n_bilinear_dd(a: &DdPair, b: &DdPair) -> DdPair {
    let n = a.len();
    DdPair {
        u: (0..n).map(|i| a.u[i].conj() * b.v[i] + b.u[i].conj() * a.v[i]).collect(),
        v: (0..n).map(|i| a.u[i] * b.u[i]).collect(),
        kappa: a.kappa,
    }
}
