//! Modulation of radial states near the ground-state orbit.
//!
//! Parameters follow `u_[θ,λ] = (1 + α)𝐐 + h` with
//! `u_[θ,λ] = (λ⁻² e^{iθ} u₁(·/λ), λ⁻² e^{2iθ} u₂(·/λ))`, so `(θ, λ)` map `u`
//! back onto `𝐐`; the orbit point nearest `u` is `𝐐_[-θ, 1/λ]`. The
//! conditions `h ⊥ {i𝐐₁, Λ𝐐}` in `Ḣ¹` and `Φ(𝐐, h) = 0` are imposed on the grid. The
//! translation parameter is absent in the radial setting.

use crate::error::{Error, Result};
use crate::functionals::gap_delta;
use crate::functionals::hamiltonian;
use crate::grid::{FieldPair, RadialGrid, C64};
use crate::groundstate::{apply_symmetry, GroundStateBundle};
use crate::linops::{FormKind, Linearization};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationOptions {
    /// `δ₀ = delta0_fraction · H(𝐐)`.
    pub delta0_fraction: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        ModulationOptions { delta0_fraction: 0.1, tol: 1e-11, max_iter: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationPoint {
    pub t: f64,
    pub theta: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// `|H(u) - H(𝐐)|`.
    pub delta: f64,
    /// `‖h‖_{Ḣ¹}`.
    pub h_norm: f64,
    pub converged: bool,
}

impl ModulationPoint {
    /// `(θ₀ mod 2π, λ₀)` with `u ≈ (1 + α)𝐐_[θ₀,λ₀]`.
    pub fn orbit(&self) -> (f64, f64) {
        ((-self.theta).rem_euclid(2.0 * PI), 1.0 / self.lambda)
    }
}

/// Residuals of the conditions on the returned `h`, relative to `‖h‖‖·‖` scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orthogonality {
    /// `(h, i𝐐₁)_{Ḣ¹} / (‖𝐐‖ ‖𝐐₁‖)`.
    pub i_q1: f64,
    /// `(h, Λ𝐐)_{Ḣ¹} / (‖𝐐‖ ‖Λ𝐐‖)`.
    pub lambda_q: f64,
    /// `Φ(𝐐, h) / |Φ(𝐐)|`.
    pub phi: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub point: ModulationPoint,
    pub h: FieldPair,
    pub orthogonality: Orthogonality,
    pub iterations: usize,
}

/// `Λf = 2f + r ∂_r f` per component.
fn lambda_op(grid: &RadialGrid, f: &FieldPair) -> FieldPair {
    let go = |c: &[C64]| -> Vec<C64> {
        let d = grid.radial_derivative(c);
        c.iter().zip(&d).zip(&grid.nodes).map(|((z, dz), r)| 2.0 * z + dz * *r).collect()
    };
    FieldPair { u: go(&f.u), v: go(&f.v), kappa: f.kappa }
}

/// `i J f` with `J = diag(1, 2)`, the phase generator.
fn phase_gen(f: &FieldPair) -> FieldPair {
    f.map2(|z| z * C64::i(), |z| z * C64::new(0.0, 2.0))
}

/// Radius enclosing half of `∫|∇f|²`.
fn half_radius(grid: &RadialGrid, f: &[C64]) -> f64 {
    let total = grid.weighted_dirichlet(f, f, |_| 1.0);
    let (mut lo, mut hi) = (grid.nodes[0] * 0.5, grid.r_max);
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if grid.weighted_dirichlet(f, f, |r| if r < mid { 1.0 } else { 0.0 }) < 0.5 * total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Initial `(θ, λ)`: scale from the half-energy radius, phase from the
/// first-component pairing with `𝐐`.
pub fn initial_guess(grid: &RadialGrid, u: &FieldPair, b: &GroundStateBundle) -> (f64, f64) {
    let lambda = half_radius(grid, &b.q_vec.u) / half_radius(grid, &u.u);
    let q = &b.q_vec.u;
    let iq: Vec<C64> = q.iter().map(|z| z * C64::i()).collect();
    let phase = grid.dirichlet(&u.u, &iq).atan2(grid.dirichlet(&u.u, q));
    (-phase, lambda)
}

fn delta0(grid: &RadialGrid, b: &GroundStateBundle, opts: &ModulationOptions) -> f64 {
    opts.delta0_fraction * hamiltonian(grid, &b.q_vec)
}

/// Decomposes `u` from the guess `(θ, λ)`; refuses states with `δ ≥ δ₀`.
pub fn decompose(grid: &RadialGrid, b: &GroundStateBundle, u: &FieldPair, guess: Option<(f64, f64)>, opts: &ModulationOptions) -> Result<Decomposition> {
    grid.check_len(u.len())?;
    let delta = gap_delta(grid, u, b);
    let d0 = delta0(grid, b, opts);
    if !(delta < d0) {
        return Err(Error::OutsideNeighbourhood { delta, delta0: d0 });
    }
    let (mut theta, lambda0) = guess.unwrap_or_else(|| initial_guess(grid, u, b));
    let mut s = lambda0.ln();
    let i_q1 = b.q1_vec.times_i();
    let lq = &b.lambda_q;
    let n_q = grid.h1dot_norm(&b.q_vec);
    let s1 = n_q * grid.h1dot_norm(&i_q1);
    let s2 = n_q * grid.h1dot_norm(lq);
    let lin = Linearization::new(grid, b);
    let phi_qq = lin.quad_form(&b.q_vec, &b.q_vec, FormKind::Phi);
    // conditions act on h = w - (Φ(𝐐, w)/Φ(𝐐, 𝐐))𝐐, which is linear in w
    let project = |w: &FieldPair| w.sub(&b.q_vec.scale(lin.quad_form(&b.q_vec, w, FormKind::Phi) / phi_qq));
    let residual = |w: &FieldPair| {
        let h = project(w);
        [grid.h1dot_inner(&h, &i_q1) / s1, grid.h1dot_inner(&h, lq) / s2]
    };
    let mut w = apply_symmetry(grid, u, theta, s.exp())?;
    let mut f = residual(&w);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it;
        let fnorm = f[0].hypot(f[1]);
        if fnorm <= opts.tol {
            converged = true;
            break;
        }
        // ∂_θ u_[θ,λ] = iJ u_[θ,λ],  ∂_{ln λ} u_[θ,λ] = -Λ u_[θ,λ]
        let dt = phase_gen(&w);
        let ds = lambda_op(grid, &w).scale(-1.0);
        let (a, c) = (residual(&dt), residual(&ds));
        let det = a[0] * c[1] - c[0] * a[1];
        if det.abs() < 1e-14 || !det.is_finite() {
            break;
        }
        let step_t = -(f[0] * c[1] - c[0] * f[1]) / det;
        let step_s = -(a[0] * f[1] - f[0] * a[1]) / det;
        let mut damp = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let (t2, s2n) = (theta + damp * step_t, s + damp * step_s);
            let w2 = apply_symmetry(grid, u, t2, s2n.exp())?;
            let f2 = residual(&w2);
            if f2[0].hypot(f2[1]) < fnorm || f2[0].hypot(f2[1]) <= opts.tol {
                theta = t2;
                s = s2n;
                w = w2;
                f = f2;
                accepted = true;
                break;
            }
            damp *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations = it + 1;
    }
    if !converged && f[0].hypot(f[1]) <= opts.tol {
        converged = true;
    }
    let alpha = lin.quad_form(&b.q_vec, &w, FormKind::Phi) / phi_qq - 1.0;
    let h = w.sub(&b.q_vec.scale(1.0 + alpha));
    let orthogonality = Orthogonality {
        i_q1: grid.h1dot_inner(&h, &i_q1) / s1,
        lambda_q: grid.h1dot_inner(&h, lq) / s2,
        phi: lin.quad_form(&b.q_vec, &h, FormKind::Phi) / phi_qq.abs(),
    };
    let point = ModulationPoint { t: 0.0, theta, lambda: s.exp(), alpha, delta, h_norm: grid.h1dot_norm(&h), converged };
    Ok(Decomposition { point, h, orthogonality, iterations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationTrack {
    pub points: Vec<ModulationPoint>,
    /// Central differences over converged neighbours; `None` where unavailable.
    pub d_theta: Vec<Option<f64>>,
    pub d_alpha: Vec<Option<f64>>,
    pub d_lambda: Vec<Option<f64>>,
    pub h_q: f64,
    pub q_norm: f64,
}

impl ModulationTrack {
    /// Builds derivative series from points ordered in time.
    pub fn from_points(points: Vec<ModulationPoint>, h_q: f64, q_norm: f64) -> Self {
        let n = points.len();
        let mut d = [vec![None; n], vec![None; n], vec![None; n]];
        let get = |p: &ModulationPoint| [p.theta, p.alpha, p.lambda];
        for i in 0..n {
            if !points[i].converged {
                continue;
            }
            let lo = if i > 0 && points[i - 1].converged { i - 1 } else { i };
            let hi = if i + 1 < n && points[i + 1].converged { i + 1 } else { i };
            if lo == hi {
                continue;
            }
            let dt = points[hi].t - points[lo].t;
            let (a, c) = (get(&points[lo]), get(&points[hi]));
            for k in 0..3 {
                d[k][i] = Some((c[k] - a[k]) / dt);
            }
        }
        let [d_theta, d_alpha, d_lambda] = d;
        ModulationTrack { points, d_theta, d_alpha, d_lambda, h_q, q_norm }
    }

    pub fn converged_fraction(&self) -> f64 {
        self.points.iter().filter(|p| p.converged).count() as f64 / self.points.len().max(1) as f64
    }

    /// Largest pairwise ratio among `|α|`, `δ/H(𝐐)` and `‖h‖/‖𝐐‖` over converged
    /// samples with `δ > delta_floor`.
    pub fn comparability(&self, delta_floor: f64) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for p in self.points.iter().filter(|p| p.converged && p.delta > delta_floor) {
            let xs = [p.alpha.abs(), p.delta / self.h_q, p.h_norm / self.q_norm];
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let r = xs[i] / xs[j];
                        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
                    }
                }
            }
        }
        worst
    }

    /// CSV `t,theta,lambda,alpha,delta,h_norm,converged`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows = self.points.iter().map(|p| vec![p.t, p.theta, p.lambda, p.alpha, p.delta, p.h_norm, if p.converged { 1.0 } else { 0.0 }]);
        crate::io::write_csv(w, &["t", "theta", "lambda", "alpha", "delta", "h_norm", "converged"], rows)
    }
}

/// Decomposes each `(t, u)` in order, warm-starting from the last converged
/// point. States outside the neighbourhood or where Newton fails are kept
/// with `converged = false`.
pub fn track(grid: &RadialGrid, b: &GroundStateBundle, states: &[(f64, FieldPair)], opts: &ModulationOptions) -> Result<ModulationTrack> {
    let mut points = Vec::with_capacity(states.len());
    let mut guess: Option<(f64, f64)> = None;
    for (t, u) in states {
        match decompose(grid, b, u, guess, opts) {
            Ok(d) => {
                let p = ModulationPoint { t: *t, ..d.point };
                if p.converged {
                    guess = Some((p.theta, p.lambda));
                }
                points.push(p);
            }
            Err(Error::OutsideNeighbourhood { delta, .. }) => {
                points.push(ModulationPoint { t: *t, theta: f64::NAN, lambda: f64::NAN, alpha: f64::NAN, delta, h_norm: f64::NAN, converged: false });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ModulationTrack::from_points(points, hamiltonian(grid, &b.q_vec), grid.h1dot_norm(&b.q_vec)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `(|θ'| + |α'| + |λ'|/λ) / (λ² δ)` per sample; `None` when excluded.
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: Option<f64>,
    pub used: usize,
    pub excluded: usize,
}

/// Samples with `δ ≤ delta_floor` (including the stationary `0/0` case) are excluded.
pub fn verify_rate_bound(track: &ModulationTrack, delta_floor: f64) -> RateReport {
    let mut ratios = Vec::with_capacity(track.points.len());
    for (i, p) in track.points.iter().enumerate() {
        let r = match (track.d_theta[i], track.d_alpha[i], track.d_lambda[i]) {
            (Some(dt), Some(da), Some(dl)) if p.converged && p.delta > delta_floor => {
                Some((dt.abs() + da.abs() + dl.abs() / p.lambda) / (p.lambda * p.lambda * p.delta))
            }
            _ => None,
        };
        ratios.push(r);
    }
    let used = ratios.iter().filter(|r| r.is_some()).count();
    let max_ratio = ratios.iter().flatten().cloned().reduce(f64::max);
    RateReport { excluded: ratios.len() - used, ratios, max_ratio, used }
}
