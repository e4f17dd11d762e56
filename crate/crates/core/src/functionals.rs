//! Conserved quantities, the threshold gap, variational constants and the
//! localized virial functionals.

use crate::grid::{FieldPair, RadialGrid};
use crate::groundstate::GroundStateBundle;
use serde::{Deserialize, Serialize};

/// Which system a state belongs to: the original one or its image under `T`
/// (`i u_t + Δu + 2ūv = 0`, `i v_t + κΔv + u² = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    #[default]
    Original,
    Transformed,
}

impl System {
    /// Coefficient of `‖∇v‖²` in `H`.
    pub fn v_kinetic(self, kappa: f64) -> f64 {
        match self {
            System::Original => 0.5 * kappa,
            System::Transformed => kappa,
        }
    }

    /// `E = H/2 - c·P`.
    pub fn p_coefficient(self) -> f64 {
        match self {
            System::Original => 0.5,
            System::Transformed => 1.0,
        }
    }

    /// Coefficient of `ūv` in the `u` equation.
    pub fn coupling(self) -> f64 {
        match self {
            System::Original => 1.0,
            System::Transformed => 2.0,
        }
    }

    /// Component weights of the conserved mass.
    pub fn mass_weights(self) -> (f64, f64) {
        match self {
            System::Original => (1.0, 1.0),
            System::Transformed => (1.0, 2.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub h: f64,
    pub p: f64,
    pub e: f64,
    pub mass: f64,
    /// Identically zero for radial fields.
    pub momentum: [f64; 6],
}

/// `H = ‖∇u‖² + (κ/2)‖∇v‖²`.
pub fn hamiltonian(grid: &RadialGrid, u: &FieldPair) -> f64 {
    hamiltonian_sys(grid, u, System::Original)
}

pub fn hamiltonian_sys(grid: &RadialGrid, u: &FieldPair, sys: System) -> f64 {
    grid.dirichlet(&u.u, &u.u) + sys.v_kinetic(u.kappa) * grid.dirichlet(&u.v, &u.v)
}

/// `P = Re ∫ u² v̄`.
pub fn interaction(grid: &RadialGrid, u: &FieldPair) -> f64 {
    (0..grid.n).map(|i| (u.u[i] * u.u[i] * u.v[i].conj()).re * grid.weights[i]).sum()
}

/// `E = H/2 - P/2`.
pub fn energy(grid: &RadialGrid, u: &FieldPair) -> f64 {
    energy_sys(grid, u, System::Original)
}

pub fn energy_sys(grid: &RadialGrid, u: &FieldPair, sys: System) -> f64 {
    0.5 * hamiltonian_sys(grid, u, sys) - sys.p_coefficient() * interaction(grid, u)
}

/// `∫ a|u|² + b|v|²`.
pub fn weighted_mass(grid: &RadialGrid, u: &FieldPair, a: f64, b: f64) -> f64 {
    (0..grid.n).map(|i| (a * u.u[i].norm_sqr() + b * u.v[i].norm_sqr()) * grid.weights[i]).sum()
}

/// Diagnostic `∫|u|² + |v|²`.
pub fn mass(grid: &RadialGrid, u: &FieldPair) -> f64 {
    weighted_mass(grid, u, 1.0, 1.0)
}

pub fn conserved(grid: &RadialGrid, u: &FieldPair, sys: System) -> ConservedSet {
    let h = hamiltonian_sys(grid, u, sys);
    let p = interaction(grid, u);
    let (a, b) = sys.mass_weights();
    ConservedSet { h, p, e: 0.5 * h - sys.p_coefficient() * p, mass: weighted_mass(grid, u, a, b), momentum: [0.0; 6] }
}

/// `δ = |H(u) - H(𝐐)|` (original system).
pub fn gap_delta(grid: &RadialGrid, u: &FieldPair, b: &GroundStateBundle) -> f64 {
    (hamiltonian(grid, u) - hamiltonian(grid, &b.q_vec)).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalConstants {
    /// `P(𝐐) / H(𝐐)^{3/2}`.
    pub c_gn: f64,
    /// `H(𝐐) / P(𝐐)`.
    pub pohozaev_ratio: f64,
    /// `√(8 / 27κ)`.
    pub c_kappa: f64,
}

pub fn c_kappa(kappa: f64) -> f64 {
    (8.0 / (27.0 * kappa)).sqrt()
}

pub fn variational_constants(grid: &RadialGrid, b: &GroundStateBundle) -> VariationalConstants {
    let h = hamiltonian(grid, &b.q_vec);
    let p = interaction(grid, &b.q_vec);
    VariationalConstants { c_gn: p / h.powf(1.5), pohozaev_ratio: h / p, c_kappa: c_kappa(b.kappa) }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub samples: usize,
    /// min over samples of `(C_GN H^{3/2} - P) / (C_GN H^{3/2})`.
    pub gn_margin: f64,
    /// min over samples of `(C(κ) H^{3/2} - |P|) / (C(κ) H^{3/2})`.
    pub dv_margin: f64,
    /// min over samples with `H ≤ H(𝐐)` of `(H(𝐐)E(f) - H(f)E(𝐐)) / (H(𝐐)|E(𝐐)|)`.
    pub convexity_margin: f64,
    pub convexity_samples: usize,
    /// Human-readable description of each violation beyond `tol`.
    pub violations: Vec<String>,
}

/// Checks the Gagliardo–Nirenberg bound, the `C(κ)` bound and the convexity
/// inequality `H(f)E(𝐐) ≤ H(𝐐)E(f)` on every sample; reports, never panics.
pub fn check_inequalities(grid: &RadialGrid, samples: &[FieldPair], b: &GroundStateBundle, tol: f64) -> InequalityReport {
    let vc = variational_constants(grid, b);
    let hq = hamiltonian(grid, &b.q_vec);
    let eq = energy(grid, &b.q_vec);
    let mut rep = InequalityReport {
        samples: samples.len(),
        gn_margin: f64::INFINITY,
        dv_margin: f64::INFINITY,
        convexity_margin: f64::INFINITY,
        ..Default::default()
    };
    for (k, f) in samples.iter().enumerate() {
        let h = hamiltonian(grid, f);
        let p = interaction(grid, f);
        if h <= 0.0 {
            continue;
        }
        let gn = (vc.c_gn * h.powf(1.5) - p) / (vc.c_gn * h.powf(1.5));
        let dv = (vc.c_kappa * h.powf(1.5) - p.abs()) / (vc.c_kappa * h.powf(1.5));
        rep.gn_margin = rep.gn_margin.min(gn);
        rep.dv_margin = rep.dv_margin.min(dv);
        if gn < -tol {
            rep.violations.push(format!("sample {k}: Gagliardo–Nirenberg margin {gn:e}"));
        }
        if dv < -tol {
            rep.violations.push(format!("sample {k}: C(κ) margin {dv:e}"));
        }
        if h <= hq {
            let e = 0.5 * h - 0.5 * p;
            let cv = (hq * e - h * eq) / (hq * eq.abs());
            rep.convexity_margin = rep.convexity_margin.min(cv);
            rep.convexity_samples += 1;
            if cv < -tol {
                rep.violations.push(format!("sample {k}: convexity margin {cv:e}"));
            }
        }
    }
    rep
}

/// `φ(x) = x²` on `[0,1]`, a degree-6 blend on `[1,2]` with `φ'' ≤ 2`, and the
/// constant `11/5` beyond 2. Only derivatives of `φ` enter `I_R` and `F_R`,
/// and those vanish for `x ≥ 2`.
pub fn phi_derivatives(x: f64) -> [f64; 5] {
    if x <= 1.0 {
        [x * x, 2.0 * x, 2.0, 0.0, 0.0]
    } else if x >= 2.0 {
        [2.2, 0.0, 0.0, 0.0, 0.0]
    } else {
        let t = x - 1.0;
        let t2 = t * t;
        let t3 = t2 * t;
        [
            1.0 + 2.0 * t + t2 - 8.0 * t2 * t2 + 9.2 * t2 * t3 - 3.0 * t3 * t3,
            2.0 + 2.0 * t - 32.0 * t3 + 46.0 * t2 * t2 - 18.0 * t2 * t3,
            2.0 - 96.0 * t2 + 184.0 * t3 - 90.0 * t2 * t2,
            -192.0 * t + 552.0 * t2 - 360.0 * t3,
            -192.0 + 1104.0 * t - 1080.0 * t2,
        ]
    }
}

/// `w_R(r) = R²φ(r/R)`, or `w_∞ = r²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VirialWeight {
    Finite(f64),
    Infinite,
}

impl VirialWeight {
    /// `[w, w', w'', w''', w'''']`.
    pub fn derivatives(&self, r: f64) -> [f64; 5] {
        match *self {
            VirialWeight::Infinite => [r * r, 2.0 * r, 2.0, 0.0, 0.0],
            VirialWeight::Finite(big_r) => {
                let d = phi_derivatives(r / big_r);
                [big_r * big_r * d[0], big_r * d[1], d[2], d[3] / big_r, d[4] / (big_r * big_r)]
            }
        }
    }

    pub fn w(&self, r: f64) -> f64 {
        self.derivatives(r)[0]
    }

    /// `Δw = w'' + 5w'/r`.
    pub fn laplacian(&self, r: f64) -> f64 {
        if self.is_quadratic_at(r) {
            return 12.0;
        }
        let d = self.derivatives(r);
        d[2] + 5.0 * d[1] / r
    }

    /// `(Δw)' = w''' + 5w''/r - 5w'/r²`.
    pub fn laplacian_derivative(&self, r: f64) -> f64 {
        if self.is_quadratic_at(r) {
            return 0.0;
        }
        let d = self.derivatives(r);
        d[3] + 5.0 * d[2] / r - 5.0 * d[1] / (r * r)
    }

    /// `Δ²w = w'''' + 10w'''/r + 15w''/r² - 15w'/r³`.
    pub fn bilaplacian(&self, r: f64) -> f64 {
        if self.is_quadratic_at(r) {
            return 0.0;
        }
        let d = self.derivatives(r);
        d[4] + 10.0 * d[3] / r + 15.0 * d[2] / (r * r) - 15.0 * d[1] / (r * r * r)
    }

    fn is_quadratic_at(&self, r: f64) -> bool {
        match *self {
            VirialWeight::Infinite => true,
            VirialWeight::Finite(big_r) => r <= big_r,
        }
    }
}

/// `I_R = 2κ Im ∫ ∇w·(2∇u ū + ∇v v̄)`.
pub fn virial_i(grid: &RadialGrid, u: &FieldPair, w: &VirialWeight) -> f64 {
    let du = grid.radial_derivative(&u.u);
    let dv = grid.radial_derivative(&u.v);
    let mut acc = 0.0;
    for i in 0..grid.n {
        let w1 = w.derivatives(grid.nodes[i])[1];
        acc += w1 * (2.0 * du[i] * u.u[i].conj() + dv[i] * u.v[i].conj()).im * grid.weights[i];
    }
    2.0 * u.kappa * acc
}

/// `F_R`; the `R = ∞` branch returns `8κ(2H - 3P)`.
pub fn virial_f(grid: &RadialGrid, u: &FieldPair, w: &VirialWeight) -> f64 {
    let k = u.kappa;
    match w {
        VirialWeight::Infinite => 8.0 * k * (2.0 * hamiltonian(grid, u) - 3.0 * interaction(grid, u)),
        VirialWeight::Finite(_) => {
            // w'''' jumps at R and 2R, so the Δ²w term is taken as +2κ∫(Δw)'ρ'.
            let du = grid.radial_derivative(&u.u);
            let dv = grid.radial_derivative(&u.v);
            let mut acc = 0.0;
            for i in 0..grid.n {
                let r = grid.nodes[i];
                let drho = 2.0 * (u.u[i].conj() * du[i]).re + k * (u.v[i].conj() * dv[i]).re;
                let coup = (u.v[i].conj() * u.u[i] * u.u[i]).re;
                acc += (2.0 * k * w.laplacian_derivative(r) * drho - 2.0 * k * w.laplacian(r) * coup) * grid.weights[i];
            }
            let hess = |r: f64| w.derivatives(r)[2];
            acc + 8.0 * k * (grid.weighted_dirichlet(&u.u, &u.u, hess) + 0.5 * k * grid.weighted_dirichlet(&u.v, &u.v, hess))
        }
    }
}

/// `V_R = ∫ w_R (a|u|² + b|v|²)`; `(a, b) = (2κ, 1)` or `(1, 1)`.
pub fn virial_v(grid: &RadialGrid, u: &FieldPair, w: &VirialWeight, a: f64, b: f64) -> f64 {
    (0..grid.n)
        .map(|i| w.w(grid.nodes[i]) * (a * u.u[i].norm_sqr() + b * u.v[i].norm_sqr()) * grid.weights[i])
        .sum()
}

/// `Im ∫ w ū² v`, the coupling left over in `dV_R/dt - I_R`.
pub fn virial_coupling(grid: &RadialGrid, u: &FieldPair, w: &VirialWeight) -> f64 {
    (0..grid.n)
        .map(|i| w.w(grid.nodes[i]) * (u.u[i].conj() * u.u[i].conj() * u.v[i]).im * grid.weights[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_is_c3_at_the_joints() {
        for x0 in [1.0, 2.0] {
            let a = phi_derivatives(x0 - 1e-12);
            let b = phi_derivatives(x0 + 1e-12);
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-9, "x0={x0} k={k}: {} vs {}", a[k], b[k]);
            }
        }
    }

    #[test]
    fn curvature_bound_holds() {
        let worst = (0..=200_000).map(|i| phi_derivatives(i as f64 * 1.5e-5)[2]).fold(f64::MIN, f64::max);
        assert!(worst <= 2.0 + 1e-12);
    }

    #[test]
    fn c_kappa_at_one() {
        assert!((c_kappa(1.0) - 0.5443310539518174).abs() < 1e-15);
    }
}
