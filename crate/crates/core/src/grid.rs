//! Radial discretization of ℝ⁶.
//!
//! Nodes sit at cell centres `s_i = (i - 1/2)/n` of a mapped coordinate
//! `s ∈ (0, 1)`, `r = r(s)`. The Laplacian is the fourth-order self-adjoint
//! staggered scheme `Δ_h = -W⁻¹K` where `W = diag(w)` holds the quadrature
//! weights `π³ r⁵ r'(s) h` and `K = Gᵀ diag(c) G` is the discrete Dirichlet
//! form. Ghost values: even reflection at the origin; at `r_max` either the
//! harmonic `r⁻⁴` tail (with its exterior energy) or odd reflection.

use crate::banded::SymBand;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type C64 = Complex64;

/// Complex samples of one radial component at the grid nodes.
pub type RadialField = Vec<C64>;

pub const PI3: f64 = PI * PI * PI;

const D1: [f64; 4] = [1.0, -27.0, 27.0, -1.0];
const D1_NODE: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Mapping {
    Uniform,
    /// `r = core·sinh(b s)`; `core` is the radius of the fine region.
    Sinh { core: f64 },
}

impl Default for Mapping {
    fn default() -> Self {
        Mapping::Sinh { core: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterBoundary {
    /// Ghosts follow `r⁻⁴`; the exterior Dirichlet energy of that tail is included.
    #[default]
    HarmonicTail,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    pub mapping: Mapping,
    pub boundary: OuterBoundary,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 2048, r_max: 200.0, mapping: Mapping::default(), boundary: OuterBoundary::default() }
    }
}

impl GridSpec {
    pub fn new(n: usize, r_max: f64) -> Self {
        GridSpec { n, r_max, ..Default::default() }
    }

    pub fn build(&self) -> Result<RadialGrid> {
        RadialGrid::new(*self)
    }
}

#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub spec: GridSpec,
    pub n: usize,
    pub r_max: f64,
    /// Mapped-coordinate spacing `1/n`.
    pub h: f64,
    pub nodes: Vec<f64>,
    pub dr_ds: Vec<f64>,
    pub weights: Vec<f64>,
    /// Discrete Dirichlet form, `∫∇f·∇g ≈ fᵀKg`.
    pub stiffness: SymBand,
    /// Face radii `r(j h)`, `j = 1..n`.
    pub face_r: Vec<f64>,
    /// Face coefficients `π³ r_f⁵ h / r'(s_f)`.
    pub face_c: Vec<f64>,
    /// Exterior tail energy coefficient (zero for Dirichlet).
    pub exterior: f64,
    face_stencil: Vec<Vec<(usize, f64)>>,
    scale: f64,
}

/// A ghost node index resolved to real node contributions.
type Ghost = [(usize, f64); 1];

impl RadialGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let n = spec.n;
        if n < 5 {
            return Err(Error::StencilUnderflow(n));
        }
        if !(spec.r_max.is_finite() && spec.r_max > 0.0) {
            return Err(Error::InvalidParameter(format!("r_max must be positive, got {}", spec.r_max)));
        }
        let h = 1.0 / n as f64;
        let s_last = 1.0 - 0.5 * h;
        let scale = match spec.mapping {
            Mapping::Uniform => spec.r_max / s_last,
            Mapping::Sinh { core } => {
                if !(core > 0.0 && core < spec.r_max) {
                    return Err(Error::InvalidParameter(format!("sinh core must lie in (0, r_max), got {core}")));
                }
                (spec.r_max / core).asinh() / s_last
            }
        };
        let mut g = RadialGrid {
            spec,
            n,
            r_max: spec.r_max,
            h,
            nodes: Vec::with_capacity(n),
            dr_ds: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            stiffness: SymBand::zeros(n, 3),
            face_r: Vec::with_capacity(n),
            face_c: Vec::with_capacity(n),
            exterior: 0.0,
            face_stencil: Vec::with_capacity(n),
            scale,
        };
        for i in 0..n {
            let s = (i as f64 + 0.5) * h;
            let (r, rp) = g.map(s);
            g.nodes.push(r);
            g.dr_ds.push(rp);
            g.weights.push(PI3 * r.powi(5) * rp * h);
        }
        g.nodes[n - 1] = spec.r_max;
        g.assemble_stiffness();
        Ok(g)
    }

    /// `(r(s), r'(s))`.
    pub fn map(&self, s: f64) -> (f64, f64) {
        match self.spec.mapping {
            Mapping::Uniform => (self.scale * s, self.scale),
            Mapping::Sinh { core } => {
                let b = self.scale;
                (core * (b * s).sinh(), core * b * (b * s).cosh())
            }
        }
    }

    /// Inverse map `s(r)`.
    pub fn unmap(&self, r: f64) -> f64 {
        match self.spec.mapping {
            Mapping::Uniform => r / self.scale,
            Mapping::Sinh { core } => (r / core).asinh() / self.scale,
        }
    }

    /// Resolves node index `k` (1-based, may be a ghost) to a real node.
    fn resolve(&self, k: isize) -> Ghost {
        let n = self.n as isize;
        if k >= 1 && k <= n {
            [((k - 1) as usize, 1.0)]
        } else if k < 1 {
            [((-k) as usize, 1.0)]
        } else {
            match self.spec.boundary {
                OuterBoundary::HarmonicTail => {
                    let (rk, _) = self.map((k as f64 - 0.5) * self.h);
                    [(self.n - 1, (self.r_max / rk).powi(4))]
                }
                OuterBoundary::Dirichlet => [((2 * n - k) as usize, -1.0)],
            }
        }
    }

    fn assemble_stiffness(&mut self) {
        let n = self.n;
        let h = self.h;
        let mut k = SymBand::zeros(n, 3);
        for j in 1..=n {
            let (rf, rpf) = self.map(j as f64 * h);
            let c = PI3 * rf.powi(5) / rpf * h;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
            for (m, d) in D1.iter().enumerate() {
                let node = j as isize - 1 + m as isize;
                for (idx, f) in self.resolve(node) {
                    let v = d / (24.0 * h) * f;
                    match row.iter_mut().find(|e| e.0 == idx) {
                        Some(e) => e.1 += v,
                        None => row.push((idx, v)),
                    }
                }
            }
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    if a <= b {
                        k.add_sym(a, b, c * va * vb);
                    }
                }
            }
            self.face_r.push(rf);
            self.face_c.push(c);
            self.face_stencil.push(row);
        }
        if self.spec.boundary == OuterBoundary::HarmonicTail {
            let (r_out, _) = self.map(1.0 + 0.5 * h);
            self.exterior = 4.0 * PI3 * self.r_max.powi(8) / r_out.powi(4);
            k.add_sym(n - 1, n - 1, self.exterior);
        }
        self.stiffness = k;
    }

    pub fn zeros(&self) -> RadialField {
        vec![C64::new(0.0, 0.0); self.n]
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    pub fn sample_c<F: Fn(f64) -> C64>(&self, f: F) -> RadialField {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// Discrete `Δf = f'' + 5f'/r`.
    pub fn laplacian6(&self, f: &[C64]) -> RadialField {
        let kf = self.stiffness.apply_c(f);
        kf.iter().zip(&self.weights).map(|(k, w)| -k / *w).collect()
    }

    pub fn laplacian6_real(&self, f: &[f64]) -> Vec<f64> {
        let kf = self.stiffness.apply(f);
        kf.iter().zip(&self.weights).map(|(k, w)| -k / w).collect()
    }

    /// Fourth-order centred `∂_r f` using the same ghost rules.
    pub fn radial_derivative(&self, f: &[C64]) -> RadialField {
        let n = self.n as isize;
        (0..self.n)
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for (m, d) in D1_NODE.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let k = i as isize + 1 + m as isize - 2;
                    let val = if k >= 1 && k <= n {
                        f[(k - 1) as usize]
                    } else {
                        let [(idx, c)] = self.resolve(k);
                        f[idx] * c
                    };
                    acc += val * *d;
                }
                acc / (12.0 * self.h * self.dr_ds[i])
            })
            .collect()
    }

    pub fn radial_derivative_real(&self, f: &[f64]) -> Vec<f64> {
        let fc: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.radial_derivative(&fc).into_iter().map(|z| z.re).collect()
    }

    /// `∂_s f` at the faces `s = jh`, `j = 1..n`.
    pub fn face_derivative(&self, f: &[C64]) -> RadialField {
        self.face_stencil.iter().map(|row| row.iter().map(|&(i, c)| f[i] * c).sum()).collect()
    }

    /// `Re ∫ ∇f·∇ḡ ω(r) dx` with the face quadrature of the Dirichlet form;
    /// `ω = 1` reproduces `dirichlet`.
    pub fn weighted_dirichlet<F: Fn(f64) -> f64>(&self, f: &[C64], g: &[C64], omega: F) -> f64 {
        let df = self.face_derivative(f);
        let dg = self.face_derivative(g);
        let mut acc = 0.0;
        for j in 0..self.n {
            acc += self.face_c[j] * omega(self.face_r[j]) * (df[j] * dg[j].conj()).re;
        }
        acc + self.exterior * omega(self.r_max) * (f[self.n - 1] * g[self.n - 1].conj()).re
    }

    /// `∫_{ℝ⁶} f dx ≈ Σ w_i f_i`.
    pub fn integrate6(&self, f: &[C64]) -> C64 {
        f.iter().zip(&self.weights).map(|(f, w)| f * *w).sum()
    }

    pub fn integrate6_real(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// `Re ∫ f ḡ`.
    pub fn l2_inner(&self, f: &[C64], g: &[C64]) -> f64 {
        f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| (a * b.conj()).re * w).sum()
    }

    /// `Re ∫ ∇f·∇ḡ` for one component.
    pub fn dirichlet(&self, f: &[C64], g: &[C64]) -> f64 {
        let kg = self.stiffness.apply_c(g);
        f.iter().zip(&kg).map(|(a, b)| (a * b.conj()).re).sum()
    }

    /// `Re ∫ ∇f₁·∇ḡ₁ + ∇f₂·∇ḡ₂`.
    pub fn h1dot_inner(&self, f: &FieldPair, g: &FieldPair) -> f64 {
        self.dirichlet(&f.u, &g.u) + self.dirichlet(&f.v, &g.v)
    }

    pub fn h1dot_norm(&self, f: &FieldPair) -> f64 {
        self.h1dot_inner(f, f).max(0.0).sqrt()
    }

    pub fn l2_norm(&self, f: &FieldPair) -> f64 {
        (self.l2_inner(&f.u, &f.u) + self.l2_inner(&f.v, &f.v)).sqrt()
    }
}

/// The system state `(u, v)` on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    pub u: RadialField,
    pub v: RadialField,
    pub kappa: f64,
}

impl FieldPair {
    pub fn new(u: RadialField, v: RadialField, kappa: f64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::LengthMismatch { expected: u.len(), got: v.len() });
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter("κ must be positive".into()));
        }
        if u.iter().chain(&v).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite field sample".into()));
        }
        Ok(FieldPair { u, v, kappa })
    }

    pub fn zeros(n: usize, kappa: f64) -> Self {
        FieldPair { u: vec![C64::new(0.0, 0.0); n], v: vec![C64::new(0.0, 0.0); n], kappa }
    }

    pub fn from_real(u: &[f64], v: &[f64], kappa: f64) -> Self {
        FieldPair {
            u: u.iter().map(|&x| C64::new(x, 0.0)).collect(),
            v: v.iter().map(|&x| C64::new(x, 0.0)).collect(),
            kappa,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map2(|z| z * a, |z| z * a)
    }

    pub fn scale_c(&self, a: C64) -> Self {
        self.map2(|z| z * a, |z| z * a)
    }

    pub fn map2<F: Fn(C64) -> C64, G: Fn(C64) -> C64>(&self, f: F, g: G) -> Self {
        FieldPair { u: self.u.iter().map(|&z| f(z)).collect(), v: self.v.iter().map(|&z| g(z)).collect(), kappa: self.kappa }
    }

    pub fn conj(&self) -> Self {
        self.map2(|z| z.conj(), |z| z.conj())
    }

    pub fn add(&self, o: &FieldPair) -> Self {
        self.lin(1.0, o, 1.0)
    }

    pub fn sub(&self, o: &FieldPair) -> Self {
        self.lin(1.0, o, -1.0)
    }

    /// `a·self + b·o`.
    pub fn lin(&self, a: f64, o: &FieldPair, b: f64) -> Self {
        FieldPair {
            u: self.u.iter().zip(&o.u).map(|(x, y)| x * a + y * b).collect(),
            v: self.v.iter().zip(&o.v).map(|(x, y)| x * a + y * b).collect(),
            kappa: self.kappa,
        }
    }

    pub fn axpy(&mut self, a: C64, o: &FieldPair) {
        for (x, y) in self.u.iter_mut().zip(&o.u) {
            *x += a * y;
        }
        for (x, y) in self.v.iter_mut().zip(&o.v) {
            *x += a * y;
        }
    }

    pub fn re(&self) -> Self {
        self.map2(|z| C64::new(z.re, 0.0), |z| C64::new(z.re, 0.0))
    }

    pub fn im(&self) -> Self {
        self.map2(|z| C64::new(z.im, 0.0), |z| C64::new(z.im, 0.0))
    }

    /// Multiplies by `i`.
    pub fn times_i(&self) -> Self {
        self.scale_c(C64::i())
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Stacked real vector `(Re u, Re v, Im u, Im v)`.
    pub fn to_real4(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(4 * self.len());
        x.extend(self.u.iter().map(|z| z.re));
        x.extend(self.v.iter().map(|z| z.re));
        x.extend(self.u.iter().map(|z| z.im));
        x.extend(self.v.iter().map(|z| z.im));
        x
    }

    pub fn from_real4(x: &[f64], kappa: f64) -> Self {
        let n = x.len() / 4;
        FieldPair {
            u: (0..n).map(|i| C64::new(x[i], x[2 * n + i])).collect(),
            v: (0..n).map(|i| C64::new(x[n + i], x[3 * n + i])).collect(),
            kappa,
        }
    }
}
