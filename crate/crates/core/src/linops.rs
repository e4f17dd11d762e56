//! Linearized operators around the ground state.
//!
//! Every operator has the form `diag(a₁(-Δ), a₂(-Δ)) + V` with a symmetric
//! pointwise 2×2 potential `V`. Vectors are stacked real pairs `(f₁; f₂)` of
//! length `2n`. The discrete `-Δ` is `W⁻¹K`, so each operator is self-adjoint in
//! the weighted inner product and `W·L` is a symmetric banded matrix.
//!
//! Only radial fields are represented, so the translation directions `∂_j𝐐`
//! never appear in kernels or orthogonality sets.

use crate::banded::{BandLu, BandMatrix, SymBand};
use crate::ddouble::{Cdd, Dd, DdPair};
use crate::error::{Error, Result};
use crate::grid::{FieldPair, RadialGrid, C64};
use crate::groundstate::GroundStateBundle;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorLabel {
    LR,
    LI,
    ER,
    EI,
}

#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub label: OperatorLabel,
    /// Coefficients of `-Δ` on each component.
    pub kinetic: [f64; 2],
    /// Potential entries `V₁₁, V₁₂ = V₂₁, V₂₂` per node.
    pub v11: Vec<f64>,
    pub v12: Vec<f64>,
    pub v22: Vec<f64>,
    stiffness: SymBand,
    weights: Vec<f64>,
}

pub fn assemble_l(grid: &RadialGrid, b: &GroundStateBundle, which: OperatorLabel) -> LinearOperator {
    let k = b.kappa;
    let (kinetic, s, c) = match which {
        OperatorLabel::LR => ([1.0, 0.5 * k], -1.0, k.sqrt()),
        OperatorLabel::LI => ([1.0, 0.5 * k], 1.0, k.sqrt()),
        OperatorLabel::ER => ([1.0, k], -1.0, (2.0 * k).sqrt()),
        OperatorLabel::EI => ([1.0, k], 1.0, (2.0 * k).sqrt()),
    };
    LinearOperator {
        label: which,
        kinetic,
        v11: b.q.iter().map(|q| s * q).collect(),
        v12: b.q.iter().map(|q| -c * q).collect(),
        v22: vec![0.0; grid.n],
        stiffness: grid.stiffness.clone(),
        weights: grid.weights.clone(),
    }
}

/// Same as [`assemble_l`]; the transformed-system operators are `E_R`, `E_I`.
pub fn assemble_e(grid: &RadialGrid, b: &GroundStateBundle, which: OperatorLabel) -> LinearOperator {
    assemble_l(grid, b, which)
}

impl LinearOperator {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Nodal action on a stacked real pair.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), 2 * n);
        let (x1, x2) = x.split_at(n);
        let k1 = self.stiffness.apply(x1);
        let k2 = self.stiffness.apply(x2);
        let mut y = vec![0.0; 2 * n];
        for i in 0..n {
            let w = self.weights[i];
            y[i] = self.kinetic[0] * k1[i] / w + self.v11[i] * x1[i] + self.v12[i] * x2[i];
            y[n + i] = self.kinetic[1] * k2[i] / w + self.v12[i] * x1[i] + self.v22[i] * x2[i];
        }
        y
    }

    /// [`apply`](Self::apply) in double-double arithmetic with the same entries.
    pub fn apply_dd(&self, x1: &[Dd], x2: &[Dd]) -> (Vec<Dd>, Vec<Dd>) {
        let n = self.n();
        let k1 = self.stiffness.apply_dd(x1);
        let k2 = self.stiffness.apply_dd(x2);
        let mut y1 = Vec::with_capacity(n);
        let mut y2 = Vec::with_capacity(n);
        for i in 0..n {
            let w = self.weights[i];
            y1.push(k1[i].div_f64(w).mul_f64(self.kinetic[0]) + x1[i].mul_f64(self.v11[i]) + x2[i].mul_f64(self.v12[i]));
            y2.push(k2[i].div_f64(w).mul_f64(self.kinetic[1]) + x1[i].mul_f64(self.v12[i]) + x2[i].mul_f64(self.v22[i]));
        }
        (y1, y2)
    }

    /// Applies to real and imaginary parts separately.
    pub fn apply_pair(&self, f: &FieldPair) -> FieldPair {
        let n = self.n();
        let re = self.apply(&stack(f, false));
        let im = self.apply(&stack(f, true));
        let u = (0..n).map(|i| C64::new(re[i], im[i])).collect();
        let v = (0..n).map(|i| C64::new(re[n + i], im[n + i])).collect();
        FieldPair { u, v, kappa: f.kappa }
    }

    /// `⟨Lx, y⟩` with the Dirichlet form for the kinetic part; exactly symmetric.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        let (x1, x2) = x.split_at(n);
        let (y1, y2) = y.split_at(n);
        let mut acc = self.kinetic[0] * self.stiffness.form(x1, y1) + self.kinetic[1] * self.stiffness.form(x2, y2);
        for i in 0..n {
            let vx1 = self.v11[i] * x1[i] + self.v12[i] * x2[i];
            let vx2 = self.v12[i] * x1[i] + self.v22[i] * x2[i];
            acc += self.weights[i] * (vx1 * y1[i] + vx2 * y2[i]);
        }
        acc
    }

    /// `Re⟨L a, b⟩` for complex pairs.
    pub fn form_pair(&self, a: &FieldPair, b: &FieldPair) -> f64 {
        self.form(&stack(a, false), &stack(b, false)) + self.form(&stack(a, true), &stack(b, true))
    }

    /// Relative residual `‖Lf‖ / ‖diag(a₁,a₂)(-Δ)f‖` in weighted L².
    pub fn kernel_residual(&self, f: &[f64]) -> f64 {
        let n = self.n();
        let lf = self.apply(f);
        let (f1, f2) = f.split_at(n);
        let k1 = self.stiffness.apply(f1);
        let k2 = self.stiffness.apply(f2);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let w = self.weights[i];
            num += w * (lf[i] * lf[i] + lf[n + i] * lf[n + i]);
            let a = self.kinetic[0] * k1[i] / w;
            let b = self.kinetic[1] * k2[i] / w;
            den += w * (a * a + b * b);
        }
        if den == 0.0 {
            return num.sqrt();
        }
        (num / den).sqrt()
    }

    /// `|⟨Lx,y⟩_W - ⟨x,Ly⟩_W| / (‖Lx‖‖y‖)` using the nodal action.
    pub fn symmetry_defect(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        let lx = self.apply(x);
        let ly = self.apply(y);
        let ip = |a: &[f64], b: &[f64]| (0..2 * n).map(|i| self.weights[i % n] * a[i] * b[i]).sum::<f64>();
        let d = (ip(&lx, y) - ip(x, &ly)).abs();
        d / (ip(&lx, &lx).sqrt() * ip(y, y).sqrt()).max(f64::MIN_POSITIVE)
    }

    /// `W^{1/2} L W^{-1/2}`, block ordered; symmetric.
    pub fn symmetric_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        let p = self.stiffness.half_bandwidth();
        for c in 0..2 {
            for i in 0..n {
                for j in i.saturating_sub(p)..(i + p + 1).min(n) {
                    m[(c * n + i, c * n + j)] = self.kinetic[c] * self.stiffness.get(i, j) / (sw[i] * sw[j]);
                }
            }
        }
        for i in 0..n {
            m[(i, i)] += self.v11[i];
            m[(n + i, n + i)] += self.v22[i];
            m[(i, n + i)] += self.v12[i];
            m[(n + i, i)] += self.v12[i];
        }
        m
    }

    /// Writes the nonzeros of the nodal matrix as `row col value` lines.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        let p = self.stiffness.half_bandwidth();
        writeln!(w, "# {:?} {} {}", self.label, 2 * n, 2 * n)?;
        for c in 0..2 {
            for i in 0..n {
                for j in i.saturating_sub(p)..(i + p + 1).min(n) {
                    let mut v = self.kinetic[c] * self.stiffness.get(i, j) / self.weights[i];
                    if i == j {
                        v += if c == 0 { self.v11[i] } else { self.v22[i] };
                    }
                    if v != 0.0 {
                        writeln!(w, "{} {} {}", c * n + i, c * n + j, crate::io::fmt17(v))?;
                    }
                }
                if self.v12[i] != 0.0 {
                    writeln!(w, "{} {} {}", c * n + i, (1 - c) * n + i, crate::io::fmt17(self.v12[i]))?;
                }
            }
        }
        Ok(())
    }

    /// Adds `scale·W^{1/2} L W^{-1/2}` into a banded matrix whose unknown
    /// `(node i, comp c)` sits at `stride·i + col_off[c]`, writing rows at
    /// `stride·i + row_off[c]`.
    fn add_scaled(&self, m: &mut BandMatrix, stride: usize, row_off: [usize; 2], col_off: [usize; 2], scale: f64) {
        let n = self.n();
        let p = self.stiffness.half_bandwidth();
        let d: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        for c in 0..2 {
            for i in 0..n {
                for j in i.saturating_sub(p)..(i + p + 1).min(n) {
                    let v = self.kinetic[c] * self.stiffness.get(i, j) * d[i] * d[j];
                    if v != 0.0 {
                        m.add(stride * i + row_off[c], stride * j + col_off[c], scale * v);
                    }
                }
            }
        }
        for i in 0..n {
            m.add(stride * i + row_off[0], stride * i + col_off[0], scale * self.v11[i]);
            m.add(stride * i + row_off[1], stride * i + col_off[1], scale * self.v22[i]);
            m.add(stride * i + row_off[0], stride * i + col_off[1], scale * self.v12[i]);
            m.add(stride * i + row_off[1], stride * i + col_off[0], scale * self.v12[i]);
        }
    }

    /// Factors the symmetrically scaled `W^{1/2}(L - σ)W^{-1/2}` (node-interleaved).
    pub fn factor_shifted(&self, sigma: f64) -> Result<ShiftedSolver> {
        let n = self.n();
        let bw = 2 * self.stiffness.half_bandwidth() + 1;
        let mut m = BandMatrix::zeros(2 * n, bw, bw);
        self.add_scaled(&mut m, 2, [0, 1], [0, 1], 1.0);
        for i in 0..2 * n {
            m.add(i, i, -sigma);
        }
        let lu = m.factor().map_err(|_| Error::Numerical(format!("singular shifted {:?} at σ = {sigma}", self.label)))?;
        Ok(ShiftedSolver { lu, weights: self.weights.clone() })
    }
}

/// Solver for `(L - σ)x = y` with `y, x` stacked real pairs.
pub struct ShiftedSolver {
    lu: BandLu,
    weights: Vec<f64>,
}

impl ShiftedSolver {
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let n = self.weights.len();
        let mut b = vec![0.0; 2 * n];
        for i in 0..n {
            let s = self.weights[i].sqrt();
            b[2 * i] = s * y[i];
            b[2 * i + 1] = s * y[n + i];
        }
        let z = self.lu.solve(&b);
        let mut x = vec![0.0; 2 * n];
        for i in 0..n {
            let s = self.weights[i].sqrt();
            x[i] = z[2 * i] / s;
            x[n + i] = z[2 * i + 1] / s;
        }
        x
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio
    }
}

/// Real or imaginary parts of `(u, v)` stacked as a `2n` vector.
pub fn stack(f: &FieldPair, imag: bool) -> Vec<f64> {
    let pick = |z: &C64| if imag { z.im } else { z.re };
    f.u.iter().map(pick).chain(f.v.iter().map(pick)).collect()
}

/// Inverse of [`stack`] for a real and an imaginary stack.
pub fn unstack(re: &[f64], im: &[f64], kappa: f64) -> FieldPair {
    let n = re.len() / 2;
    FieldPair {
        u: (0..n).map(|i| C64::new(re[i], im[i])).collect(),
        v: (0..n).map(|i| C64::new(re[n + i], im[n + i])).collect(),
        kappa,
    }
}

/// `𝓔 = [[0, -E_I], [E_R, 0]]` acting on `(Re h, Im h)`.
#[derive(Clone, Debug)]
pub struct BlockOperatorE {
    pub e_r: LinearOperator,
    pub e_i: LinearOperator,
}

impl BlockOperatorE {
    pub fn new(grid: &RadialGrid, b: &GroundStateBundle) -> Self {
        BlockOperatorE { e_r: assemble_e(grid, b, OperatorLabel::ER), e_i: assemble_e(grid, b, OperatorLabel::EI) }
    }

    /// `𝓔h = -E_I Im h + i E_R Re h`.
    pub fn apply(&self, h: &FieldPair) -> FieldPair {
        let re = self.e_i.apply(&stack(h, true));
        let im = self.e_r.apply(&stack(h, false));
        let re: Vec<f64> = re.iter().map(|x| -x).collect();
        unstack(&re, &im, h.kappa)
    }

    /// [`apply`](Self::apply) in double-double arithmetic.
    pub fn apply_dd(&self, h: &DdPair) -> DdPair {
        let part = |z: &[Cdd], imag: bool| -> Vec<Dd> { z.iter().map(|c| if imag { c.im } else { c.re }).collect() };
        let (a1, a2) = self.e_r.apply_dd(&part(&h.u, false), &part(&h.v, false));
        let (b1, b2) = self.e_i.apply_dd(&part(&h.u, true), &part(&h.v, true));
        DdPair {
            u: (0..h.len()).map(|i| Cdd { re: -b1[i], im: a1[i] }).collect(),
            v: (0..h.len()).map(|i| Cdd { re: -b2[i], im: a2[i] }).collect(),
            kappa: h.kappa,
        }
    }

    /// Factors `𝓔 - σ` for real `σ`.
    pub fn factor_shifted(&self, sigma: f64) -> Result<ShiftedE> {
        let n = self.e_r.n();
        // unknowns per node: (a₁, a₂, b₁, b₂) = (Re u, Re v, Im u, Im v)
        let bw = 4 * self.e_r.stiffness.half_bandwidth() + 3;
        let mut m = BandMatrix::zeros(4 * n, bw, bw);
        // real rows: -E_I b - σ a
        self.e_i.add_scaled(&mut m, 4, [0, 1], [2, 3], -1.0);
        // imaginary rows: E_R a - σ b
        self.e_r.add_scaled(&mut m, 4, [2, 3], [0, 1], 1.0);
        for i in 0..4 * n {
            m.add(i, i, -sigma);
        }
        let lu = m.factor().map_err(|_| Error::Numerical(format!("𝓔 - σ singular at σ = {sigma}")))?;
        Ok(ShiftedE { lu, weights: self.e_r.weights.clone() })
    }
}

/// Solver for `(𝓔 - σ)x = y`.
pub struct ShiftedE {
    lu: BandLu,
    weights: Vec<f64>,
}

impl ShiftedE {
    pub fn solve(&self, y: &FieldPair) -> FieldPair {
        let n = self.weights.len();
        let mut b = vec![0.0; 4 * n];
        for i in 0..n {
            let s = self.weights[i].sqrt();
            b[4 * i] = s * y.u[i].re;
            b[4 * i + 1] = s * y.v[i].re;
            b[4 * i + 2] = s * y.u[i].im;
            b[4 * i + 3] = s * y.v[i].im;
        }
        let z = self.lu.solve(&b);
        let d: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        FieldPair {
            u: (0..n).map(|i| C64::new(z[4 * i], z[4 * i + 2]) * d[i]).collect(),
            v: (0..n).map(|i| C64::new(z[4 * i + 1], z[4 * i + 3]) * d[i]).collect(),
            kappa: y.kappa,
        }
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    /// `Φ`, built from `L_R`, `L_I`.
    Phi,
    /// `Φ_E`, built from `E_R`, `E_I`.
    PhiE,
}

/// All four operators around one ground state.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub l_r: LinearOperator,
    pub l_i: LinearOperator,
    pub e: BlockOperatorE,
}

impl Linearization {
    pub fn new(grid: &RadialGrid, b: &GroundStateBundle) -> Self {
        Linearization {
            l_r: assemble_l(grid, b, OperatorLabel::LR),
            l_i: assemble_l(grid, b, OperatorLabel::LI),
            e: BlockOperatorE::new(grid, b),
        }
    }

    /// `½⟨A_R Re a, Re b⟩ + ½⟨A_I Im a, Im b⟩`.
    pub fn quad_form(&self, a: &FieldPair, b: &FieldPair, which: FormKind) -> f64 {
        let (r, i) = match which {
            FormKind::Phi => (&self.l_r, &self.l_i),
            FormKind::PhiE => (&self.e.e_r, &self.e.e_i),
        };
        0.5 * r.form(&stack(a, false), &stack(b, false)) + 0.5 * i.form(&stack(a, true), &stack(b, true))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NonlinearMap {
    /// `(h̄g, h²)`.
    R,
    /// `(2h̄g, h²)`.
    N,
    /// `(h̄Q + √(2κ)Qg, √(2κ)Qh)`.
    B,
    /// `(h̄Q + √κQg, 2√κQh)`.
    K,
}

/// Pointwise evaluation; `q` is the scalar profile (used by `B` and `K`).
pub fn nonlinear_map(q: &[f64], h: &FieldPair, which: NonlinearMap) -> FieldPair {
    let n = h.len();
    let k = h.kappa;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (h.u[i], h.v[i]);
        let (x, y) = match which {
            NonlinearMap::R => (a.conj() * b, a * a),
            NonlinearMap::N => (2.0 * a.conj() * b, a * a),
            NonlinearMap::B => {
                let c = (2.0 * k).sqrt() * q[i];
                (a.conj() * q[i] + b * c, a * c)
            }
            NonlinearMap::K => {
                let c = k.sqrt() * q[i];
                (a.conj() * q[i] + b * c, 2.0 * c * a)
            }
        };
        u.push(x);
        v.push(y);
    }
    FieldPair { u, v, kappa: k }
}

/// Polarization of `N`: `(ā₁b₂ + b̄₁a₂, a₁b₁)`, so `N(h) = n_bilinear(h, h)`.
pub fn n_bilinear(a: &FieldPair, b: &FieldPair) -> FieldPair {
    let n = a.len();
    FieldPair {
        u: (0..n).map(|i| a.u[i].conj() * b.v[i] + b.u[i].conj() * a.v[i]).collect(),
        v: (0..n).map(|i| a.u[i] * b.u[i]).collect(),
        kappa: a.kappa,
    }
}
