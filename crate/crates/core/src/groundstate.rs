//! The ground state `Q = (1 + r²/24)⁻²`, the vectors built from it, and the
//! symmetry group action.
//!
//! Scaling convention: `u_[θ,λ] = (λ⁻² e^{iθ} u₁(·/λ), λ⁻² e^{2iθ} u₂(·/λ))`.
//! With `ΛQ = 2Q + r∂_rQ` the orbit derivative is `∂_λ (λ⁻²Q(·/λ))|_{λ=1} = -ΛQ`.

use crate::error::{Error, Result};
use crate::grid::{FieldPair, RadialGrid, C64};
use crate::interp::Pchip;
use crate::io::fmt17;
use std::io::Write;

pub fn q_closed_form(r: f64) -> f64 {
    let b = 1.0 + r * r / 24.0;
    1.0 / (b * b)
}

pub fn q_prime(r: f64) -> f64 {
    let b = 1.0 + r * r / 24.0;
    -(r / 6.0) / (b * b * b)
}

/// `ΛQ = 2Q + rQ' = (2 - r²/12)(1 + r²/24)⁻³`.
pub fn lambda_q_closed_form(r: f64) -> f64 {
    let b = 1.0 + r * r / 24.0;
    (2.0 - r * r / 12.0) / (b * b * b)
}

/// Default bound on the relative elliptic residual accepted at construction.
pub const DEFAULT_ELLIPTIC_TOL: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct GroundStateBundle {
    pub kappa: f64,
    pub q: Vec<f64>,
    pub lambda_q_scalar: Vec<f64>,
    /// `𝐐 = (√κQ, Q)`.
    pub q_vec: FieldPair,
    /// `𝐐₁ = (√κQ, 2Q)`.
    pub q1_vec: FieldPair,
    /// `Λ𝐐 = (√κΛQ, ΛQ)`.
    pub lambda_q: FieldPair,
    pub t_q: FieldPair,
    pub t_q1: FieldPair,
    pub t_lambda_q: FieldPair,
    pub elliptic_residual: f64,
    pub pohozaev_ratio: f64,
}

impl GroundStateBundle {
    pub fn new(grid: &RadialGrid, kappa: f64) -> Result<Self> {
        Self::with_tolerance(grid, kappa, DEFAULT_ELLIPTIC_TOL)
    }

    pub fn with_tolerance(grid: &RadialGrid, kappa: f64, elliptic_tol: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter("κ must be positive".into()));
        }
        let q = grid.sample(q_closed_form);
        let lq = grid.sample(lambda_q_closed_form);
        let sk = kappa.sqrt();
        let pair = |a: f64, b: f64, f: &[f64]| {
            let u: Vec<f64> = f.iter().map(|x| a * x).collect();
            let v: Vec<f64> = f.iter().map(|x| b * x).collect();
            FieldPair::from_real(&u, &v, kappa)
        };
        let q_vec = pair(sk, 1.0, &q);
        let q1_vec = {
            let u: Vec<f64> = q.iter().map(|x| sk * x).collect();
            let v: Vec<f64> = q.iter().map(|x| 2.0 * x).collect();
            FieldPair::from_real(&u, &v, kappa)
        };
        let lambda_q = pair(sk, 1.0, &lq);
        let elliptic_residual = elliptic_residual(grid, &q);
        let h = grid.dirichlet(&q_vec.u, &q_vec.u) + 0.5 * kappa * grid.dirichlet(&q_vec.v, &q_vec.v);
        let p: f64 = (0..grid.n).map(|i| q_vec.u[i].re.powi(2) * q_vec.v[i].re * grid.weights[i]).sum();
        let b = GroundStateBundle {
            kappa,
            t_q: transform_t(&q_vec, false),
            t_q1: transform_t(&q1_vec, false),
            t_lambda_q: transform_t(&lambda_q, false),
            q,
            lambda_q_scalar: lq,
            q_vec,
            q1_vec,
            lambda_q,
            elliptic_residual,
            pohozaev_ratio: h / p,
        };
        if b.elliptic_residual > elliptic_tol {
            return Err(Error::Numerical(format!(
                "elliptic residual {:.3e} exceeds tolerance {:.1e}",
                b.elliptic_residual, elliptic_tol
            )));
        }
        if (b.pohozaev_ratio - 1.5).abs() > 1.5 * elliptic_tol.max(1e-6) {
            return Err(Error::Numerical(format!("Pohozaev ratio {} far from 3/2", b.pohozaev_ratio)));
        }
        if b.q.iter().any(|&x| x <= 0.0) || b.q.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Numerical("Q is not positive and strictly decreasing".into()));
        }
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// `𝐐` for the given system: the original vector or its image under `T`.
    pub fn stationary(&self, transformed: bool) -> &FieldPair {
        if transformed {
            &self.t_q
        } else {
            &self.q_vec
        }
    }
}

/// `‖ΔQ + Q²‖₂ / ‖Q²‖₂`; zero input returns 0.
pub fn elliptic_residual(grid: &RadialGrid, q: &[f64]) -> f64 {
    let lap = grid.laplacian6_real(q);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.n {
        let q2 = q[i] * q[i];
        num += (lap[i] + q2).powi(2) * grid.weights[i];
        den += q2 * q2 * grid.weights[i];
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

pub fn verify_elliptic(bundle: &GroundStateBundle) -> f64 {
    bundle.elliptic_residual
}

/// `(u₁/√2, u₂/2)`, or the inverse map.
pub fn transform_t(u: &FieldPair, inverse: bool) -> FieldPair {
    let (a, b) = if inverse { (2f64.sqrt(), 2.0) } else { (1.0 / 2f64.sqrt(), 0.5) };
    u.map2(|z| z * a, |z| z * b)
}

/// Monotone-cubic interpolant of a complex radial field in the mapped
/// coordinate, with even reflection at the origin and `r⁻⁴` tail beyond `r_max`.
pub struct FieldInterpolant<'a> {
    grid: &'a RadialGrid,
    re: Pchip,
    im: Pchip,
    last: C64,
}

impl<'a> FieldInterpolant<'a> {
    pub fn new(grid: &'a RadialGrid, f: &[C64]) -> Self {
        let s = |i: usize| (i as f64 + 0.5) * grid.h;
        let mut xs = vec![-s(1), -s(0)];
        xs.extend((0..grid.n).map(s));
        let mut re = vec![f[1].re, f[0].re];
        re.extend(f.iter().map(|z| z.re));
        let mut im = vec![f[1].im, f[0].im];
        im.extend(f.iter().map(|z| z.im));
        FieldInterpolant { grid, re: Pchip::new(xs.clone(), re), im: Pchip::new(xs, im), last: f[grid.n - 1] }
    }

    pub fn eval(&self, r: f64) -> C64 {
        if r >= self.grid.r_max {
            return self.last * (self.grid.r_max / r).powi(4);
        }
        let s = self.grid.unmap(r);
        C64::new(self.re.eval(s), self.im.eval(s))
    }
}

/// `(λ⁻² e^{iθ} u₁(·/λ), λ⁻² e^{2iθ} u₂(·/λ))` interpolated back onto the grid.
pub fn apply_symmetry(grid: &RadialGrid, u: &FieldPair, theta: f64, lambda: f64) -> Result<FieldPair> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    grid.check_len(u.len())?;
    let c1 = C64::from_polar(lambda.powi(-2), theta);
    let c2 = C64::from_polar(lambda.powi(-2), 2.0 * theta);
    let out = |f: &[C64], c: C64| -> Vec<C64> {
        if lambda == 1.0 {
            return f.iter().map(|z| z * c).collect();
        }
        let it = FieldInterpolant::new(grid, f);
        grid.nodes.iter().map(|&r| it.eval(r / lambda) * c).collect()
    };
    Ok(FieldPair { u: out(&u.u, c1), v: out(&u.v, c2), kappa: u.kappa })
}

/// `𝐐_[θ,λ]` sampled exactly from the closed form.
pub fn q_orbit(grid: &RadialGrid, kappa: f64, theta: f64, lambda: f64) -> FieldPair {
    let sk = kappa.sqrt();
    let l2 = lambda.powi(-2);
    FieldPair {
        u: grid.sample_c(|r| C64::from_polar(sk * l2 * q_closed_form(r / lambda), theta)),
        v: grid.sample_c(|r| C64::from_polar(l2 * q_closed_form(r / lambda), 2.0 * theta)),
        kappa,
    }
}

#[derive(Clone, Debug)]
pub struct Directions {
    pub q: FieldPair,
    pub i_q1: FieldPair,
    pub lambda_q: FieldPair,
    pub t_q: FieldPair,
    pub t_i_q1: FieldPair,
    pub t_lambda_q: FieldPair,
    /// `|(Λ𝐐, 𝐐)_{Ḣ¹}| / (‖Λ𝐐‖‖𝐐‖)`.
    pub orthogonality: f64,
}

pub fn build_directions(grid: &RadialGrid, b: &GroundStateBundle) -> Directions {
    let i_q1 = b.q1_vec.times_i();
    let orth = grid.h1dot_inner(&b.lambda_q, &b.q_vec) / (grid.h1dot_norm(&b.lambda_q) * grid.h1dot_norm(&b.q_vec));
    Directions {
        q: b.q_vec.clone(),
        t_i_q1: transform_t(&i_q1, false),
        i_q1,
        lambda_q: b.lambda_q.clone(),
        t_q: b.t_q.clone(),
        t_lambda_q: b.t_lambda_q.clone(),
        orthogonality: orth.abs(),
    }
}

/// CSV snapshot with columns `r,Q,LambdaQ`.
pub fn write_snapshot<W: Write>(mut w: W, grid: &RadialGrid, b: &GroundStateBundle) -> Result<()> {
    writeln!(w, "r,Q,LambdaQ")?;
    for i in 0..grid.n {
        writeln!(w, "{},{},{}", fmt17(grid.nodes[i]), fmt17(b.q[i]), fmt17(b.lambda_q_scalar[i]))?;
    }
    Ok(())
}

/// Integrates `Q'' + 5Q'/r + Q² = 0`, `Q(0) = q0`, `Q'(0) = 0` with RK4 from a
/// series start; returns `(r, Q, Q')` samples on a uniform radius grid.
pub fn shoot_ground_state(q0: f64, r_end: f64, steps: usize) -> Vec<(f64, f64, f64)> {
    let dr = r_end / steps as f64;
    let r0 = dr * 1e-3;
    let c2 = -q0 * q0 / 12.0;
    let c4 = q0 * q0 * q0 / 192.0;
    let mut y = [q0 + c2 * r0 * r0 + c4 * r0.powi(4), 2.0 * c2 * r0 + 4.0 * c4 * r0.powi(3)];
    let rhs = |r: f64, y: [f64; 2]| [y[1], -5.0 * y[1] / r - y[0] * y[0]];
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, q0, 0.0));
    let mut r = r0;
    for k in 1..=steps {
        let target = k as f64 * dr;
        let h = target - r;
        let k1 = rhs(r, y);
        let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        r = target;
        out.push((r, y[0], y[1]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn closed_form_values() {
        assert_eq!(q_closed_form(0.0), 1.0);
        assert!((q_closed_form(24f64.sqrt()) - 0.25).abs() < 1e-15);
        let r: f64 = 1e4;
        assert!((r.powi(4) * q_closed_form(r) - 576.0).abs() < 1e-2);
    }

    #[test]
    fn lambda_q_matches_definition() {
        for &r in &[0.0, 0.5, 3.0, 17.0] {
            assert!((lambda_q_closed_form(r) - (2.0 * q_closed_form(r) + r * q_prime(r))).abs() < 1e-14);
        }
    }

    #[test]
    fn transform_round_trip() {
        let g = GridSpec::new(32, 20.0).build().unwrap();
        let b = GroundStateBundle::with_tolerance(&g, 0.7, 1.0).unwrap();
        let back = transform_t(&transform_t(&b.q_vec, false), true);
        for (a, c) in back.u.iter().zip(&b.q_vec.u) {
            assert!((a - c).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_lambda() {
        let g = GridSpec::new(32, 20.0).build().unwrap();
        let u = FieldPair::zeros(32, 1.0);
        assert!(apply_symmetry(&g, &u, 0.0, 0.0).is_err());
        assert!(apply_symmetry(&g, &u, 0.0, -1.0).is_err());
    }
}
