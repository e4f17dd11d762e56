//! Special solutions converging exponentially to the ground state.
//!
//! For the transformed system, `W = T(𝐐) + h` with `h_t + 𝓔h = iN(h)`. The
//! approximate solution `U_k = Σ_{j≤k} e^{-jλ₁t} g_j` has `g₁ = a e₊` and
//! `(𝓔 - jλ₁) g_j = i Σ_{m+l=j} B(g_m, g_l)`; the true solution is obtained by
//! shooting backward from `t_far` with `U_k(t_far)` as data.

use crate::ddouble::{n_bilinear_dd, Dd, DdPair};
use crate::error::{Error, Result};
use crate::evolution::{run_with, EvolutionConfig, Mode, Scheme, Sponge, Termination, TrajectoryRecord};
use crate::functionals::{energy, hamiltonian, hamiltonian_sys, System};
use crate::grid::{FieldPair, RadialGrid, C64};
use crate::groundstate::{transform_t, GroundStateBundle};
use crate::linops::{n_bilinear, BlockOperatorE};
use crate::spectrum::SpectralResult;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Pivot ratios below this flag `jλ₁` as (numerically) in the spectrum of `𝓔`.
const PIVOT_FLOOR: f64 = 1e-13;
/// Relative residual of a shifted solve beyond which the shift counts as singular.
const SOLVE_CEILING: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ApproxSolution {
    pub a: f64,
    pub k: usize,
    pub lambda1: f64,
    /// `g_1, …, g_k`.
    pub profiles: Vec<FieldPair>,
    /// `‖(𝓔 - jλ₁)g_j - iC_j‖ / ‖iC_j‖` in weighted L² (`j ≥ 2`).
    pub solve_residuals: Vec<f64>,
    /// `λ₁` and `g_j` refined with double-double residuals.
    pub refined: Refined,
}

/// Eigenpair and profiles with residuals below double-precision roundoff.
#[derive(Clone, Debug)]
pub struct Refined {
    pub lambda1: Dd,
    pub profiles: Vec<DdPair>,
}

impl Refined {
    fn forcing(&self, j: usize) -> DdPair {
        let k = self.profiles.len();
        let mut c = DdPair::zeros(self.profiles[0].len(), self.profiles[0].kappa);
        for m in 1..j {
            let l = j - m;
            if m <= k && l <= k {
                c = c.add(&n_bilinear_dd(&self.profiles[m - 1], &self.profiles[l - 1]));
            }
        }
        c
    }
}

impl ApproxSolution {
    fn zeros_like(&self) -> FieldPair {
        FieldPair::zeros(self.profiles[0].len(), self.profiles[0].kappa)
    }

    /// `C_j = Σ_{m+l=j, 1≤m,l≤k} B(g_m, g_l)`, the `e^{-jλ₁t}` coefficient of `N(U_k)`.
    pub fn forcing(&self, j: usize) -> FieldPair {
        let mut c = self.zeros_like();
        for m in 1..j {
            let l = j - m;
            if m > self.k || l > self.k {
                continue;
            }
            c = c.add(&n_bilinear(&self.profiles[m - 1], &self.profiles[l - 1]));
        }
        c
    }

    /// `U_k(t)`.
    pub fn eval(&self, t: f64) -> FieldPair {
        let x = (-self.lambda1 * t).exp();
        let mut u = self.zeros_like();
        let mut p = 1.0;
        for g in &self.profiles {
            p *= x;
            u.axpy(C64::new(p, 0.0), g);
        }
        u
    }

    /// First-order part `a e^{-λ₁t} e₊`.
    pub fn linear_part(&self, t: f64) -> FieldPair {
        self.profiles[0].scale((-self.lambda1 * t).exp())
    }
}

fn weighted(grid: &RadialGrid, f: &FieldPair) -> f64 {
    grid.l2_norm(f)
}

fn plain_dot(a: &FieldPair, b: &FieldPair) -> f64 {
    a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Newton on `(𝓔 - λ)x = 0` with `⟨e₊, δx⟩ = 0`, residuals in double-double and
/// corrections from a factorization slightly off `λ₁`.
fn refine_eigenpair(grid: &RadialGrid, e: &BlockOperatorE, lambda: f64, e_plus: &FieldPair) -> Result<(Dd, DdPair)> {
    let solver = e.factor_shifted(lambda * (1.0 + 1e-7))?;
    let mut x = DdPair::from_pair(e_plus);
    let mut lam = Dd::new(lambda);
    let scale = weighted(grid, e_plus);
    let mut last = f64::INFINITY;
    for _ in 0..12 {
        let r = e.apply_dd(&x).sub(&x.scale(lam)).to_pair();
        let res = weighted(grid, &r) / scale;
        if res < 1e-30 || res > 0.5 * last {
            break;
        }
        last = res;
        let y = solver.solve(&r.scale(-1.0));
        let z = solver.solve(&x.to_pair());
        let dl = -plain_dot(e_plus, &y) / plain_dot(e_plus, &z);
        x = x.add_pair(&y.add(&z.scale(dl)));
        lam = lam + Dd::new(dl);
    }
    Ok((lam, x))
}

/// Builds `g_1..g_k` for amplitude `a`.
pub fn approx_profiles(grid: &RadialGrid, b: &GroundStateBundle, spec: &SpectralResult, a: f64, k: usize) -> Result<ApproxSolution> {
    if k == 0 {
        return Err(Error::InvalidParameter("order k must be at least 1".into()));
    }
    grid.check_len(spec.e_plus.len())?;
    let e = BlockOperatorE::new(grid, b);
    let lambda = spec.lambda1;
    let (lam_dd, e_dd) = refine_eigenpair(grid, &e, lambda, &spec.e_plus)?;
    let refined = Refined { lambda1: lam_dd, profiles: vec![e_dd.scale(Dd::new(a))] };
    let mut sol = ApproxSolution { a, k, lambda1: lambda, profiles: vec![spec.e_plus.scale(a)], solve_residuals: vec![], refined };
    for j in 2..=k {
        let sigma = j as f64 * lambda;
        let solver = e.factor_shifted(sigma).map_err(|_| singular_shift(j, sigma))?;
        if solver.pivot_ratio() < PIVOT_FLOOR {
            return Err(singular_shift(j, sigma));
        }
        let rhs = sol.refined.forcing(j).times_i();
        let sigma_dd = lam_dd.mul_f64(j as f64);
        let mut g = DdPair::from_pair(&solver.solve(&rhs.to_pair()));
        let scale = weighted(grid, &rhs.to_pair());
        let mut last = f64::INFINITY;
        for _ in 0..8 {
            let r = rhs.sub(&e.apply_dd(&g).sub(&g.scale(sigma_dd))).to_pair();
            let res = weighted(grid, &r);
            if res <= 1e-30 * scale || res > 0.5 * last {
                break;
            }
            last = res;
            g = g.add_pair(&solver.solve(&r));
        }
        let g64 = g.to_pair();
        sol.refined.profiles.push(g);
        sol.profiles.push(FieldPair::zeros(grid.n, b.kappa));
        let rhs64 = sol.forcing(j).times_i();
        let res = e.apply(&g64).sub(&g64.scale(sigma)).sub(&rhs64);
        let s64 = weighted(grid, &rhs64);
        let rel = if s64 > 0.0 { weighted(grid, &res) / s64 } else { 0.0 };
        if !(rel <= SOLVE_CEILING) {
            return Err(singular_shift(j, sigma));
        }
        sol.solve_residuals.push(rel);
        sol.profiles[j - 1] = g64;
    }
    Ok(sol)
}

fn singular_shift(j: usize, sigma: f64) -> Error {
    Error::Numerical(format!("𝓔 - {j}λ₁ is singular to working precision at σ = {sigma}; the construction assumes jλ₁ lies outside the spectrum of 𝓔"))
}

/// `ε_k(t) = ∂_t U_k + 𝓔U_k - iN(U_k)`, expanded by powers of `x = e^{-λ₁t}`:
/// `Σ_{j≤k} x^j[(𝓔 - jλ₁)g_j - iC_j] - i Σ_{j=k+1}^{2k} x^j C_j`.
///
/// Coefficients come from the refined profiles, so the `j ≤ k` defects sit at
/// double-double roundoff rather than at the double-precision solve floor.
pub struct EpsilonK<'a> {
    sol: &'a ApproxSolution,
    lambda1: f64,
    defects: Vec<FieldPair>,
    tails: Vec<FieldPair>,
}

impl<'a> EpsilonK<'a> {
    pub fn new(grid: &RadialGrid, b: &GroundStateBundle, sol: &'a ApproxSolution) -> Self {
        let e = BlockOperatorE::new(grid, b);
        let r = &sol.refined;
        let defects = (1..=sol.k)
            .map(|j| {
                let g = &r.profiles[j - 1];
                e.apply_dd(g).sub(&g.scale(r.lambda1.mul_f64(j as f64))).sub(&r.forcing(j).times_i()).to_pair()
            })
            .collect();
        let tails = (sol.k + 1..=2 * sol.k).map(|j| r.forcing(j).times_i().to_pair().scale(-1.0)).collect();
        EpsilonK { sol, lambda1: r.lambda1.to_f64(), defects, tails }
    }

    pub fn eval(&self, t: f64) -> FieldPair {
        let x = (-self.lambda1 * t).exp();
        let mut out = self.sol.zeros_like();
        for (j, d) in self.defects.iter().enumerate() {
            out.axpy(C64::new(x.powi(j as i32 + 1), 0.0), d);
        }
        for (j, c) in self.tails.iter().enumerate() {
            out.axpy(C64::new(x.powi((self.sol.k + 1 + j) as i32), 0.0), c);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    /// Least-squares slopes of `ln‖ε_k‖`; `None` when `ε_k ≡ 0`.
    pub slope_l2: Option<f64>,
    pub slope_h1: Option<f64>,
}

/// Least-squares slope of `ln y` against `t`, ignoring non-positive values.
pub fn log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0 && v.is_finite()).map(|(a, v)| (*a, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Evaluates `ε_k` on `t_grid` in weighted L² and `Ḣ¹` and fits the decay rate.
pub fn residual_epsk(grid: &RadialGrid, b: &GroundStateBundle, sol: &ApproxSolution, t_grid: &[f64]) -> DecayFit {
    let eps = EpsilonK::new(grid, b, sol);
    let mut l2 = Vec::with_capacity(t_grid.len());
    let mut h1 = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let f = eps.eval(t);
        l2.push(grid.l2_norm(&f));
        h1.push(grid.h1dot_norm(&f));
    }
    DecayFit { slope_l2: log_slope(t_grid, &l2), slope_h1: log_slope(t_grid, &h1), times: t_grid.to_vec(), l2, h1 }
}

/// `t` at which `|a| e^{-λ₁t} = level`.
pub fn time_at_level(a: f64, lambda1: f64, level: f64) -> f64 {
    (a.abs() / level).ln() / lambda1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub a: f64,
    pub k: usize,
    pub t_far: f64,
    /// Backward leg ends here.
    pub t_start: f64,
    /// Forward leg ends here.
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// Snapshots are kept at `t_far ± m·spacing` (plus the endpoints).
    pub snapshot_spacing: f64,
    pub monitor_stride: usize,
    /// Absorbing layer, for legs that radiate out to the boundary.
    pub sponge: Option<Sponge>,
}

impl ShootConfig {
    /// `t_far` from `|a| e^{-λ₁t_far} = 10⁻³`, backward to 0 and forward by 10.
    pub fn new(a: f64, k: usize, lambda1: f64) -> Self {
        let t_far = if a == 0.0 { 10.0 } else { time_at_level(a, lambda1, 1e-3) };
        ShootConfig { a, k, t_far, t_start: 0.0, t_end: t_far + 10.0, dt: 1e-2, scheme: Scheme::Composition4, snapshot_spacing: 1.0, monitor_stride: 10, sponge: None }
    }

    fn evolution(&self, t_end: f64) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt,
            t_end,
            scheme: self.scheme,
            system: System::Transformed,
            mode: Mode::Perturbation,
            monitor_stride: self.monitor_stride,
            adapt: true,
            sponge: self.sponge,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub t: f64,
    /// `‖W - W_k‖_{Ḣ¹}` with `W_k = T(𝐐) + U_k`.
    pub dev_k: f64,
    /// `‖W - T(𝐐) - a e^{-λ₁t} e₊‖_{Ḣ¹}`.
    pub dev_linear: f64,
    /// `H_N(W) - H_N(T(𝐐))`.
    pub hn_gap: f64,
}

#[derive(Clone, Debug)]
pub struct SpecialTrajectory {
    pub a: f64,
    pub k: usize,
    pub lambda1: f64,
    pub t_far: f64,
    /// Ascending in `t`.
    pub deviations: Vec<DeviationSample>,
    /// `(t, W(t))` in transformed variables, ascending in `t`.
    pub snapshots: Vec<(f64, FieldPair)>,
    pub backward: TrajectoryRecord,
    pub forward: TrajectoryRecord,
}

impl SpecialTrajectory {
    /// Whether the backward leg stopped on the blow-up trigger.
    pub fn backward_blowup(&self) -> bool {
        matches!(self.backward.termination, Termination::Blowup { .. })
    }

    /// Earliest time reached.
    pub fn t_min(&self) -> f64 {
        self.deviations.first().map_or(self.t_far, |d| d.t)
    }

    /// Snapshot nearest to `t`.
    pub fn snapshot_near(&self, t: f64) -> Option<&(f64, FieldPair)> {
        self.snapshots.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
    }

    /// `ln‖·‖` slope of a deviation series over `[t0, t1]`.
    pub fn fit(&self, t0: f64, t1: f64, which: fn(&DeviationSample) -> f64) -> Option<f64> {
        let (t, y): (Vec<f64>, Vec<f64>) = self.deviations.iter().filter(|d| d.t >= t0 && d.t <= t1).map(|d| (d.t, which(d))).unzip();
        log_slope(&t, &y)
    }

    /// CSV with `t,H,P,E,delta,dev_k,dev_linear,hn_gap`; the monitored
    /// quantities refer to the original variables `T⁻¹W`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut samples: Vec<_> = self.backward.samples.iter().chain(self.forward.samples.iter().skip(1)).collect();
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        for s in samples {
            let d = self.deviations.iter().min_by(|a, b| (a.t - s.t).abs().total_cmp(&(b.t - s.t).abs()));
            let (dk, dl, hg) = d.map_or((f64::NAN, f64::NAN, f64::NAN), |d| (d.dev_k, d.dev_linear, d.hn_gap));
            rows.push(vec![s.t, s.h_orig, s.conserved.p, s.conserved.e, s.delta, dk, dl, hg]);
        }
        crate::io::write_csv(w, &["t", "H", "P", "E", "delta", "dev_k", "dev_linear", "hn_gap"], rows)
    }
}

/// Shoots `W^a` from `W_k(t_far)`, backward to `t_start` and forward to `t_end`.
pub fn shoot_w(grid: &RadialGrid, b: &GroundStateBundle, spec: &SpectralResult, cfg: &ShootConfig) -> Result<SpecialTrajectory> {
    if !(cfg.t_start <= cfg.t_far && cfg.t_far <= cfg.t_end) {
        return Err(Error::InvalidParameter("need t_start ≤ t_far ≤ t_end".into()));
    }
    let sol = approx_profiles(grid, b, spec, cfg.a, cfg.k)?;
    let h0 = sol.eval(cfg.t_far);
    let hn_q = hamiltonian_sys(grid, &b.t_q, System::Transformed);
    let mut deviations = Vec::new();
    let mut snapshots = Vec::new();
    let spacing = cfg.snapshot_spacing;
    let record = |t: f64, h: &FieldPair, deviations: &mut Vec<DeviationSample>, snapshots: &mut Vec<(f64, FieldPair)>| {
        let w = b.t_q.add(h);
        deviations.push(DeviationSample {
            t,
            dev_k: grid.h1dot_norm(&h.sub(&sol.eval(t))),
            dev_linear: grid.h1dot_norm(&h.sub(&sol.linear_part(t))),
            hn_gap: hamiltonian_sys(grid, &w, System::Transformed) - hn_q,
        });
        let off = t - cfg.t_far;
        let on_grid = spacing > 0.0 && ((off / spacing).round() * spacing - off).abs() < 0.25 * cfg.dt;
        let endpoint = t == cfg.t_far || t == cfg.t_start || t == cfg.t_end;
        if (on_grid || endpoint) && snapshots.last().is_none_or(|(s, _): &(f64, FieldPair)| (s - t).abs() > 0.25 * cfg.dt) {
            snapshots.push((t, w));
        }
    };
    // snapshots come from monitored states, so the stride must divide the spacing
    let mut ecfg = cfg.evolution(cfg.t_start);
    let per = (spacing / cfg.dt).round() as usize;
    if spacing > 0.0 && per > 0 && !per.is_multiple_of(ecfg.monitor_stride) {
        ecfg.monitor_stride = per;
    }
    let backward = run_with(grid, b, &h0, cfg.t_far, &ecfg, &mut |t, h| record(t, h, &mut deviations, &mut snapshots))?;
    deviations.reverse();
    snapshots.reverse();
    let mut fwd_dev = Vec::new();
    let mut fwd_snap = Vec::new();
    let fcfg = EvolutionConfig { t_end: cfg.t_end, ..ecfg };
    let forward = run_with(grid, b, &h0, cfg.t_far, &fcfg, &mut |t, h| record(t, h, &mut fwd_dev, &mut fwd_snap))?;
    deviations.extend(fwd_dev.into_iter().skip(1));
    snapshots.extend(fwd_snap.into_iter().skip(1));
    Ok(SpecialTrajectory { a: cfg.a, k: cfg.k, lambda1: sol.lambda1, t_far: cfg.t_far, deviations, snapshots, backward, forward })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GSign {
    Plus,
    Minus,
}

impl GSign {
    pub fn amplitude(self) -> f64 {
        match self {
            GSign::Plus => 1.0,
            GSign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GConfig {
    pub k: usize,
    /// `t₀` is searched from the time where `e^{-λ₁t} = t0_level`.
    pub t0_level: f64,
    /// `t_far` from `e^{-λ₁t_far} = far_level`.
    pub far_level: f64,
    pub dt: f64,
    /// Length of the forward leg past `t_far`.
    pub forward: f64,
}

impl Default for GConfig {
    fn default() -> Self {
        GConfig { k: 3, t0_level: 0.1, far_level: 1e-3, dt: 1e-2, forward: 10.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ThresholdSolution {
    pub sign: GSign,
    pub t0: f64,
    /// `𝒢(0) = T⁻¹(W(t₀))`, original variables.
    pub data: FieldPair,
    pub trajectory: SpecialTrajectory,
    /// `(E(𝒢) - E(𝐐)) / E(𝐐)`.
    pub energy_gap: f64,
    /// `H(𝒢) - H(𝐐)`.
    pub h_gap: f64,
    /// Fitted decay rate of `δ(t)` on `[t₀, t_far]`, in units of `λ₁`.
    pub delta_rate: Option<f64>,
}

/// Builds `𝒢±(0)` from `W^{±1}` and checks the threshold properties.
pub fn construct_g(grid: &RadialGrid, b: &GroundStateBundle, spec: &SpectralResult, sign: GSign, cfg: &GConfig) -> Result<ThresholdSolution> {
    let a = sign.amplitude();
    let lambda = spec.lambda1;
    let t0_min = time_at_level(a, lambda, cfg.t0_level);
    let t_far = time_at_level(a, lambda, cfg.far_level);
    let shoot = ShootConfig { a, k: cfg.k, t_far, t_start: t0_min, t_end: t_far + cfg.forward, dt: cfg.dt, scheme: Scheme::Composition4, snapshot_spacing: 1.0, monitor_stride: 10, sponge: None };
    let traj = shoot_w(grid, b, spec, &shoot)?;
    // earliest snapshot from which the sign of H_N(W) - H_N(T(𝐐)) agrees with a
    let hn_q = hamiltonian_sys(grid, &b.t_q, System::Transformed);
    let signs: Vec<(f64, bool)> = traj
        .snapshots
        .iter()
        .filter(|(t, _)| *t >= t0_min - 1e-9 && *t <= t_far + 1e-9)
        .map(|(t, w)| (*t, (hamiltonian_sys(grid, w, System::Transformed) - hn_q) * a > 0.0))
        .collect();
    let mut t0 = None;
    for (i, (t, ok)) in signs.iter().enumerate() {
        if *ok && signs[i..].iter().all(|s| s.1) {
            t0 = Some(*t);
            break;
        }
    }
    let t0 = t0.ok_or(Error::SignCondition)?;
    let w0 = &traj.snapshot_near(t0).expect("snapshot present").1;
    let data = transform_t(w0, true);
    let eq = energy(grid, &b.q_vec);
    let energy_gap = (energy(grid, &data) - eq) / eq;
    let h_gap = hamiltonian(grid, &data) - hamiltonian(grid, &b.q_vec);
    let (t, d): (Vec<f64>, Vec<f64>) = traj
        .backward
        .samples
        .iter()
        .chain(traj.forward.samples.iter())
        .filter(|s| s.t >= t0 && s.t <= t_far)
        .map(|s| (s.t, s.delta))
        .unzip();
    let delta_rate = log_slope(&t, &d).map(|s| -s / lambda);
    Ok(ThresholdSolution { sign, t0, data, trajectory: traj, energy_gap, h_gap, delta_rate })
}

/// `max_t ‖W^a(t) - W^{±1}(t - ln|a|/λ₁)‖_{Ḣ¹} / ‖W^{±1} - T(𝐐)‖_{Ḣ¹}` over
/// snapshot times of `w_a` whose shifted time is covered by `w_unit`.
pub fn translation_mismatch(grid: &RadialGrid, b: &GroundStateBundle, w_a: &SpecialTrajectory, w_unit: &SpecialTrajectory) -> Option<f64> {
    let shift = w_a.a.abs().ln() / w_a.lambda1;
    let mut worst: Option<f64> = None;
    for (t, w) in &w_a.snapshots {
        let s = t - shift;
        if let Some((tu, wu)) = w_unit.snapshot_near(s) {
            if (tu - s).abs() > 1e-6 {
                continue;
            }
            let r = grid.h1dot_norm(&w.sub(wu)) / grid.h1dot_norm(&wu.sub(&b.t_q));
            worst = Some(worst.map_or(r, |x: f64| x.max(r)));
        }
    }
    worst
}

/// Integrates `𝒢` backward from `𝒢(0)` for `duration` in transformed
/// perturbation variables; record times are `𝒢`-times (`t - t₀`).
pub fn threshold_backward(grid: &RadialGrid, b: &GroundStateBundle, g: &ThresholdSolution, duration: f64, dt: f64, sponge: Option<Sponge>) -> Result<TrajectoryRecord> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("backward duration must be positive".into()));
    }
    let h0 = transform_t(&g.data, false).sub(&b.t_q);
    let cfg = EvolutionConfig { dt, t_end: -duration, scheme: Scheme::Composition4, system: System::Transformed, mode: Mode::Perturbation, adapt: true, sponge, ..Default::default() };
    run_with(grid, b, &h0, 0.0, &cfg, &mut |_, _| {})
}
