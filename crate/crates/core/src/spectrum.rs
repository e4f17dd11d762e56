//! The unstable eigenvalue of `𝓔` and coercivity sampling.
//!
//! `λ₁` comes from the symmetric operator `𝕋 = E_I^{1/2} E_R E_I^{1/2}`, built
//! densely at a reduced resolution. At the working resolution the eigenpair is
//! refined by shift-invert iteration on the banded `𝓔 - σ`, seeded with that
//! `λ₁`, so the cost there stays linear in `n`.

use crate::error::{Error, Result};
use crate::grid::{FieldPair, GridSpec, RadialGrid, C64};
use crate::groundstate::{build_directions, GroundStateBundle};
use crate::linops::{stack, unstack, BlockOperatorE, FormKind, LinearOperator, Linearization};
use crate::random::{random_pair, random_real_pair, rng};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Eigenvalues of `E_I` below `KERNEL_CLIP·‖E_I‖` count as zero.
pub const KERNEL_CLIP: f64 = 1e-10;

/// Symmetric square root of `E_I`, in the scaled coordinates `W^{1/2}x`.
#[derive(Clone, Debug)]
pub struct SqrtEI {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    /// Unit kernel vector (scaled coordinates).
    pub kernel: DVector<f64>,
    pub clip: f64,
    sw: Vec<f64>,
}

impl SqrtEI {
    /// Nodal action `W^{-1/2} S W^{1/2} x` on a stacked real pair.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let xs = DVector::from_iterator(x.len(), x.iter().zip(&self.sw).map(|(a, s)| a * s));
        let y = &self.matrix * xs;
        y.iter().zip(&self.sw).map(|(a, s)| a / s).collect()
    }
}

fn sqrt_weights(grid_weights: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = grid_weights.iter().map(|w| w.sqrt()).collect();
    s.iter().chain(&s).copied().collect()
}

/// Square root of `E_I` on the complement of its kernel.
pub fn sqrt_ei(op: &LinearOperator, weights: &[f64]) -> Result<SqrtEI> {
    let a = op.symmetric_dense();
    let eig = SymmetricEigen::new(a);
    let norm = eig.eigenvalues.amax();
    let clip = KERNEL_CLIP * norm;
    let near: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k].abs() < clip).collect();
    if near.len() > 1 {
        return Err(Error::UnexpectedKernel(near.len()));
    }
    let k0 = (0..eig.eigenvalues.len())
        .min_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()))
        .unwrap();
    if let Some(k) = (0..eig.eigenvalues.len()).find(|&k| k != k0 && eig.eigenvalues[k] < -clip) {
        return Err(Error::Numerical(format!("E_I has a negative eigenvalue {:e}", eig.eigenvalues[k])));
    }
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().enumerate().map(|(k, &l)| if k == k0 || l < clip { 0.0 } else { l.sqrt() }),
    );
    let v = &eig.eigenvectors;
    let matrix = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok(SqrtEI { matrix, kernel: v.column(k0).into_owned(), eigenvalues: eig.eigenvalues, clip, sw: sqrt_weights(weights) })
}

/// Most negative eigenpair of `𝕋`.
#[derive(Clone, Debug)]
pub struct TtPair {
    pub mu: f64,
    /// Unit eigenvector in scaled coordinates.
    pub g: DVector<f64>,
    /// `‖𝕋g - μg‖ / ‖g‖`.
    pub residual: f64,
    /// `‖𝕋‖₂`, for judging the residual.
    pub norm: f64,
    pub sqrt: SqrtEI,
    pub tt: DMatrix<f64>,
}

/// Builds `𝕋` densely and finds `μ = -λ₁²`: a symmetric eigensolve for the
/// estimate, then shift-invert iterations to polish the vector.
pub fn negative_eigenpair_tt(grid: &RadialGrid, lin: &Linearization) -> Result<TtPair> {
    let sqrt = sqrt_ei(&lin.e.e_i, &grid.weights)?;
    let er = lin.e.e_r.symmetric_dense();
    let s = &sqrt.matrix;
    let mut tt = s * er * s;
    tt = (&tt + tt.transpose()) * 0.5;
    let eig = SymmetricEigen::new(tt.clone());
    let k = eig.eigenvalues.imin();
    let mut mu = eig.eigenvalues[k];
    let norm = eig.eigenvalues.amax();
    if mu >= -1e-12 * norm {
        return Err(Error::NoNegativeEigenvalue);
    }
    let mut g = eig.eigenvectors.column(k).into_owned();
    let residual = |g: &DVector<f64>, mu: f64| (&tt * g - g * mu).norm() / g.norm();
    let dim = tt.nrows();
    for _ in 0..3 {
        let before = residual(&g, mu);
        let shift = mu * (1.0 + 1e-9);
        let lu = (&tt - DMatrix::identity(dim, dim) * shift).lu();
        let Some(next) = lu.solve(&g) else { break };
        let next = next.normalize();
        let rq = next.dot(&(&tt * &next));
        if residual(&next, rq) >= before {
            break;
        }
        g = next;
        mu = rq;
    }
    let res = residual(&g, mu);
    Ok(TtPair { mu, g, residual: res, norm, sqrt, tt })
}

/// `e₁ = E_I^{1/2}g`, `e₂ = λ₁⁻¹E_R E_I^{1/2}g` as nodal stacked pairs.
pub fn eigenvectors_from_tt(grid: &RadialGrid, lin: &Linearization, pair: &TtPair) -> (Vec<f64>, Vec<f64>) {
    let lambda = (-pair.mu).sqrt();
    let sw = sqrt_weights(&grid.weights);
    let e1s = &pair.sqrt.matrix * &pair.g;
    let e1: Vec<f64> = e1s.iter().zip(&sw).map(|(a, s)| a / s).collect();
    let e2: Vec<f64> = lin.e.e_r.apply(&e1).iter().map(|x| x / lambda).collect();
    (e1, e2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Resolution of the dense `𝕋` construction.
    pub dense_n: usize,
    /// Required relative eigen-residual at the working resolution.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { dense_n: 256, tol: 1e-6, max_iter: 40 }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub kappa: f64,
    pub lambda1: f64,
    pub e_plus: FieldPair,
    pub e_minus: FieldPair,
    /// `Φ_E(e₊, e₋)` after rescaling; its magnitude is 1.
    pub normalization: f64,
    /// `Φ_E(e₊, e₋)` before rescaling.
    pub raw_normalization: f64,
    /// `‖𝓔e₊ - λ₁e₊‖ / ‖e₊‖` (weighted L²).
    pub residual: f64,
    /// `‖𝓔e₋ + λ₁e₋‖ / ‖e₋‖`.
    pub residual_minus: f64,
    pub phi_e_plus: f64,
    pub phi_e_minus: f64,
    /// `λ₁` from the dense `𝕋` construction at the reduced resolution.
    pub lambda1_dense: f64,
    pub tt_residual: f64,
    pub iterations: usize,
}

#[derive(Serialize)]
struct SpectralSummary {
    kappa: f64,
    n: usize,
    lambda1: f64,
    lambda1_dense: f64,
    residual: f64,
    residual_minus: f64,
    normalization: f64,
    raw_normalization: f64,
    phi_e_plus: f64,
    phi_e_minus: f64,
    tt_residual: f64,
}

impl SpectralResult {
    pub fn to_json(&self) -> String {
        let s = SpectralSummary {
            kappa: self.kappa,
            n: self.e_plus.len(),
            lambda1: self.lambda1,
            lambda1_dense: self.lambda1_dense,
            residual: self.residual,
            residual_minus: self.residual_minus,
            normalization: self.normalization,
            raw_normalization: self.raw_normalization,
            phi_e_plus: self.phi_e_plus,
            phi_e_minus: self.phi_e_minus,
            tt_residual: self.tt_residual,
        };
        serde_json::to_string_pretty(&s).expect("plain struct serializes")
    }

    /// `e₊` profile CSV (`e₋` is its conjugate).
    pub fn write_profiles<W: Write>(&self, w: W, grid: &RadialGrid) -> Result<()> {
        crate::io::write_profile(w, grid, &self.e_plus)
    }
}

fn weighted_norm(grid: &RadialGrid, f: &FieldPair) -> f64 {
    grid.l2_norm(f)
}

/// `‖𝓔x - σx‖ / ‖x‖`.
pub fn eigen_residual(grid: &RadialGrid, e: &BlockOperatorE, x: &FieldPair, sigma: f64) -> f64 {
    weighted_norm(grid, &e.apply(x).sub(&x.scale(sigma))) / weighted_norm(grid, x)
}

/// `λ₁` from the dense `𝕋` construction on a grid of `dense_n` points.
pub fn lambda1_dense(spec: &GridSpec, kappa: f64, dense_n: usize) -> Result<(f64, TtPair)> {
    let mut s = *spec;
    s.n = dense_n;
    let g = s.build()?;
    let b = GroundStateBundle::with_tolerance(&g, kappa, 1.0)?;
    let lin = Linearization::new(&g, &b);
    let pair = negative_eigenpair_tt(&g, &lin)?;
    Ok(((-pair.mu).sqrt(), pair))
}

/// Shift-invert refinement of the `λ₁` eigenpair of `𝓔` on the working grid.
pub fn refine_eigenpair(grid: &RadialGrid, e: &BlockOperatorE, seed: &FieldPair, lambda0: f64, opts: &SpectrumOptions) -> Result<(f64, FieldPair, usize)> {
    let mut lambda = lambda0;
    let mut x = seed.scale(1.0 / weighted_norm(grid, seed));
    let mut it = 0;
    let mut solver = e.factor_shifted(lambda * (1.0 + 1e-3))?;
    let mut last = f64::INFINITY;
    while it < opts.max_iter {
        it += 1;
        let y = solver.solve(&x);
        x = y.scale(1.0 / weighted_norm(grid, &y));
        let ex = e.apply(&x);
        lambda = grid.l2_inner(&ex.u, &x.u) + grid.l2_inner(&ex.v, &x.v);
        let res = eigen_residual(grid, e, &x, lambda);
        if res <= 1e-3 * opts.tol && res > 0.5 * last {
            break;
        }
        if it % 4 == 0 {
            solver = e.factor_shifted(lambda * (1.0 + 1e-8))?;
        }
        last = res;
    }
    Ok((lambda, x, it))
}

/// The eigenpair `e±` of `𝓔` with `e₋ = ē₊`, `|Φ_E(e₊, e₋)| = 1` and
/// `(Re e₊, T(𝐐))_{Ḣ¹_κ} > 0`.
pub fn eigenpair_e(grid: &RadialGrid, b: &GroundStateBundle, opts: &SpectrumOptions) -> Result<SpectralResult> {
    let lin = Linearization::new(grid, b);
    let (lambda_d, pair) = lambda1_dense(&grid.spec, b.kappa, opts.dense_n.min(grid.n))?;
    let seed = if grid.n == opts.dense_n {
        let (e1, e2) = eigenvectors_from_tt(grid, &lin, &pair);
        unstack(&e1, &e2, b.kappa)
    } else {
        b.t_q.add(&b.t_lambda_q.times_i())
    };
    let (lambda, x, iterations) = refine_eigenpair(grid, &lin.e, &seed, lambda_d, opts)?;
    let e1 = stack(&x, false);
    let e2 = stack(&x, true);
    let mut e_plus = unstack(&e1, &e2, b.kappa);
    let raw = lin.quad_form(&e_plus, &e_plus.conj(), FormKind::PhiE);
    if raw.abs() < 1e-12 * lin.quad_form(&e_plus.re(), &e_plus.re(), FormKind::PhiE).abs().max(1e-300) {
        return Err(Error::DegenerateNormalization(raw));
    }
    let mut c = 1.0 / raw.abs().sqrt();
    let tq = &b.t_q;
    let h = grid.dirichlet(&e_plus.u, &tq.u) + b.kappa * grid.dirichlet(&e_plus.v, &tq.v);
    if h < 0.0 {
        c = -c;
    }
    e_plus = e_plus.scale(c);
    let e_minus = e_plus.conj();
    let normalization = lin.quad_form(&e_plus, &e_minus, FormKind::PhiE);
    Ok(SpectralResult {
        kappa: b.kappa,
        lambda1: lambda,
        residual: eigen_residual(grid, &lin.e, &e_plus, lambda),
        residual_minus: eigen_residual(grid, &lin.e, &e_minus, -lambda),
        phi_e_plus: lin.quad_form(&e_plus, &e_plus, FormKind::PhiE),
        phi_e_minus: lin.quad_form(&e_minus, &e_minus, FormKind::PhiE),
        e_plus,
        e_minus,
        normalization,
        raw_normalization: raw * c * c,
        lambda1_dense: lambda_d,
        tt_residual: pair.residual,
        iterations,
    })
}

/// Dense nonsymmetric eigenvalues of `𝓔` (scaled coordinates).
pub fn dense_spectrum_e(lin: &Linearization) -> Vec<C64> {
    let er = lin.e.e_r.symmetric_dense();
    let ei = lin.e.e_i.symmetric_dense();
    let m = er.nrows();
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    a.view_mut((0, m), (m, m)).copy_from(&(-ei));
    a.view_mut((m, 0), (m, m)).copy_from(&er);
    a.complex_eigenvalues().iter().copied().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCounts {
    /// Eigenvalues with `|Re| > tol_re` and `|Im| < tol_im`.
    pub real: usize,
    /// Eigenvalues with modulus below `tol_zero`.
    pub near_zero: usize,
    pub lambda_max_real: f64,
    /// Largest `|Re z|` among the remaining eigenvalues.
    pub off_axis: f64,
}

pub fn classify_spectrum(ev: &[C64], tol_re: f64, tol_im: f64, tol_zero: f64) -> SpectrumCounts {
    let mut c = SpectrumCounts { real: 0, near_zero: 0, lambda_max_real: 0.0, off_axis: 0.0 };
    for z in ev {
        if z.norm() < tol_zero {
            c.near_zero += 1;
        } else if z.re.abs() > tol_re && z.im.abs() < tol_im {
            c.real += 1;
            c.lambda_max_real = c.lambda_max_real.max(z.re);
        } else {
            c.off_axis = c.off_axis.max(z.re.abs());
        }
    }
    c
}

/// Conditioning of `𝓔 - jλ₁`: `‖x‖/‖y‖` for a fixed right-hand side, and the pivot ratio.
pub fn shifted_conditioning(grid: &RadialGrid, e: &BlockOperatorE, sigma: f64, y: &FieldPair) -> Result<(f64, f64)> {
    let s = e.factor_shifted(sigma)?;
    let x = s.solve(y);
    Ok((weighted_norm(grid, &x) / weighted_norm(grid, y), s.pivot_ratio()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoercivityKind {
    /// `Φ` on `{Φ(𝐐,h) = (i𝐐₁,h) = (Λ𝐐,h) = 0}`.
    Phi,
    /// `Φ_E` on `{Φ_E(h,e±) = (T(i𝐐₁),h) = (T(Λ𝐐),h) = 0}`.
    PhiE,
    /// `⟨L_I v, v⟩` for real `v` with `(v, 𝐐₁) = 0`.
    LI,
    /// `⟨E_I v, v⟩` for real `v` with `(v, T(𝐐₁)) = 0`.
    EI,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub kind: CoercivityKind,
    pub trials: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest constraint value after projection, relative to `‖h‖²`.
    pub max_constraint: f64,
}

type Constraint<'a> = Box<dyn Fn(&FieldPair) -> f64 + 'a>;

/// Removes `Σ c_k D_k` from `h` so all constraints vanish.
pub fn project(h: &FieldPair, dirs: &[FieldPair], cons: &[Constraint<'_>]) -> Result<FieldPair> {
    let k = dirs.len();
    let m = DMatrix::from_fn(k, k, |j, l| cons[j](&dirs[l]));
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 || svd.singular_values.min() < 1e-12 * smax {
        return Err(Error::RankDeficient);
    }
    let rhs = DVector::from_iterator(k, cons.iter().map(|c| c(h)));
    let coef = m.lu().solve(&rhs).ok_or(Error::RankDeficient)?;
    let mut out = h.clone();
    for (l, d) in dirs.iter().enumerate() {
        out.axpy(C64::new(-coef[l], 0.0), d);
    }
    Ok(out)
}

/// Minimum of `form(h)/‖h‖²_{Ḣ¹}` over seeded projected random trials.
pub fn coercivity_sample(
    grid: &RadialGrid,
    b: &GroundStateBundle,
    spectral: Option<&SpectralResult>,
    kind: CoercivityKind,
    trials: usize,
    seed: u64,
) -> Result<CoercivityReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let lin = Linearization::new(grid, b);
    let d = build_directions(grid, b);
    let h1 = |a: &FieldPair, c: &FieldPair| grid.h1dot_inner(a, c);
    let (dirs, cons, real): (Vec<FieldPair>, Vec<Constraint<'_>>, bool) = match kind {
        CoercivityKind::Phi => {
            let (q, iq1, lq) = (d.q.clone(), d.i_q1.clone(), d.lambda_q.clone());
            let lin = &lin;
            let cons: Vec<Constraint<'_>> = vec![
                Box::new(move |h: &FieldPair| lin.quad_form(&q, h, FormKind::Phi)),
                Box::new(move |h: &FieldPair| h1(&iq1, h)),
                Box::new(move |h: &FieldPair| h1(&lq, h)),
            ];
            (vec![d.q.clone(), d.i_q1.clone(), d.lambda_q.clone()], cons, false)
        }
        CoercivityKind::PhiE => {
            let sp = spectral.ok_or_else(|| Error::InvalidParameter("Φ_E coercivity needs e±".into()))?;
            let (ep, em) = (sp.e_plus.clone(), sp.e_minus.clone());
            let (ti, tl) = (d.t_i_q1.clone(), d.t_lambda_q.clone());
            let lin = &lin;
            let cons: Vec<Constraint<'_>> = vec![
                Box::new(move |h: &FieldPair| lin.quad_form(h, &ep, FormKind::PhiE)),
                Box::new(move |h: &FieldPair| lin.quad_form(h, &em, FormKind::PhiE)),
                Box::new(move |h: &FieldPair| h1(&ti, h)),
                Box::new(move |h: &FieldPair| h1(&tl, h)),
            ];
            (vec![sp.e_plus.clone(), sp.e_minus.clone(), d.t_i_q1.clone(), d.t_lambda_q.clone()], cons, false)
        }
        CoercivityKind::LI => {
            let q1 = b.q1_vec.clone();
            let cons: Vec<Constraint<'_>> = vec![Box::new(move |h: &FieldPair| h1(&q1, h))];
            (vec![b.q1_vec.clone()], cons, true)
        }
        CoercivityKind::EI => {
            let tq1 = b.t_q1.clone();
            let cons: Vec<Constraint<'_>> = vec![Box::new(move |h: &FieldPair| h1(&tq1, h))];
            (vec![b.t_q1.clone()], cons, true)
        }
    };
    let form = |h: &FieldPair| match kind {
        CoercivityKind::Phi => lin.quad_form(h, h, FormKind::Phi),
        CoercivityKind::PhiE => lin.quad_form(h, h, FormKind::PhiE),
        CoercivityKind::LI => lin.l_i.form_pair(h, h),
        CoercivityKind::EI => lin.e.e_i.form_pair(h, h),
    };
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut max_constraint: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(t as u64));
        let raw = if real { random_real_pair(grid, b.kappa, &mut r) } else { random_pair(grid, b.kappa, &mut r) };
        let h = project(&raw, &dirs, &cons)?;
        let n2 = grid.h1dot_inner(&h, &h);
        for c in &cons {
            max_constraint = max_constraint.max(c(&h).abs() / n2);
        }
        let ratio = form(&h) / n2;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(CoercivityReport { kind, trials, min_ratio, max_ratio, max_constraint })
}
