//! Time integration by operator splitting.
//!
//! The linear part is advanced by the Cayley transform, which is unitary in
//! the weighted L² inner product; the pointwise quadratic part by RK4 per node.
//! In `Mode::Perturbation` the unknown is `h = W - T(𝐐)` for the transformed
//! system, the linear part is `-𝓔`, and `T(𝐐)` is an exact fixed point.

use crate::banded::ComplexBandLu;
use crate::error::{Error, Result};
use crate::functionals::{conserved, gap_delta, hamiltonian, virial_f, virial_i, ConservedSet, System, VirialWeight};
use crate::grid::{FieldPair, RadialGrid, C64};
use crate::groundstate::{transform_t, GroundStateBundle};
use crate::linops::{BlockOperatorE, ShiftedE};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

pub use crate::io::{read_checkpoint, write_checkpoint, CheckpointHeader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Second-order Strang splitting.
    StrangSplit,
    /// Fourth-order triple-jump composition of Strang steps.
    #[default]
    Composition4,
    /// Implicit midpoint with fixed-point iteration on the nonlinearity.
    CrankNicolson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Evolve the state itself.
    #[default]
    Full,
    /// Evolve `W - T(𝐐)` (transformed system only).
    Perturbation,
}

/// Absorbing layer: after each step the field is multiplied by
/// `exp(-strength·((r - start)/(r_max - start))²·|dt|)` for `r > start`.
/// How the linear substep is advanced in `Mode::Full`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolver {
    /// Banded Cayley transform.
    #[default]
    Cayley,
    /// Dense eigenbasis of the discrete Laplacian (small grids).
    Eigenbasis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub start: f64,
    pub strength: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Base step; its sign is taken from the direction of `t_end`.
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub system: System,
    pub mode: Mode,
    pub linear: LinearSolver,
    pub blowup_h_factor: f64,
    /// Amplitude trigger as a multiple of `‖𝐐‖_∞`.
    pub blowup_amplitude_factor: f64,
    pub dt_min: f64,
    pub monitor_stride: usize,
    pub adapt: bool,
    /// Largest accepted relative energy change per step in adaptive mode.
    pub step_tol: f64,
    pub virial_r: Option<f64>,
    pub sponge: Option<Sponge>,
    /// Radius of the ball used by the local L⁴ density.
    pub l4_radius: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::default(),
            system: System::Original,
            mode: Mode::Full,
            linear: LinearSolver::Cayley,
            blowup_h_factor: 50.0,
            blowup_amplitude_factor: 50.0,
            dt_min: 1e-9,
            monitor_stride: 10,
            adapt: false,
            step_tol: 1e-4,
            virial_r: None,
            sponge: None,
            l4_radius: 20.0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.blowup_h_factor <= 1.0 {
            return Err(Error::InvalidParameter("blowup_h_factor must exceed 1".into()));
        }
        if self.monitor_stride == 0 {
            return Err(Error::InvalidParameter("monitor_stride must be at least 1".into()));
        }
        if self.mode == Mode::Perturbation && self.system != System::Transformed {
            return Err(Error::InvalidParameter("perturbation mode needs the transformed system".into()));
        }
        if self.mode == Mode::Perturbation && self.linear == LinearSolver::Eigenbasis {
            return Err(Error::InvalidParameter("the eigenbasis solver only covers the full mode".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    Blowup { reason: String },
    Instability { diagnostic: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Conserved set of the evolved system.
    pub conserved: ConservedSet,
    /// `|H - H(𝐐)|` of the original-variable state.
    pub delta: f64,
    /// Original-variable `H`.
    pub h_orig: f64,
    pub i_r: f64,
    pub f_r: f64,
    pub i_inf: f64,
    pub f_inf: f64,
    /// `∫_{|x|<l4_radius} |u|⁴ + |v|⁴`.
    pub l4_local: f64,
    pub dt: f64,
    pub max_amp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub kappa: f64,
    pub system: System,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub h_q: f64,
    pub virial_r: Option<f64>,
    pub steps: usize,
    pub rejected: usize,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].conserved.e;
        self.samples.iter().map(|s| (s.conserved.e - e0).abs() / e0.abs()).fold(0.0, f64::max)
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples[0].conserved.mass;
        self.samples.iter().map(|s| (s.conserved.mass - m0).abs() / m0.abs()).fold(0.0, f64::max)
    }

    /// CSV with `t,H,P,E,mass,delta,I_R,F_R,I_inf,F_inf,L4,dt`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_csv(
            w,
            &["t", "H", "P", "E", "mass", "delta", "I_R", "F_R", "I_inf", "F_inf", "L4", "dt"],
            self.samples.iter().map(|s| {
                vec![s.t, s.conserved.h, s.conserved.p, s.conserved.e, s.conserved.mass, s.delta, s.i_r, s.f_r, s.i_inf, s.f_inf, s.l4_local, s.dt]
            }),
        )
    }
}

/// `exp(iαΔ·t)` applied exactly through the eigenbasis of the discrete Laplacian.
#[derive(Clone, Debug)]
pub struct EigenPropagator {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    sw: Vec<f64>,
}

impl EigenPropagator {
    /// Dense; meant for `n` up to about a thousand.
    pub fn new(grid: &RadialGrid) -> Self {
        let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
        let mut k = grid.stiffness.to_dense();
        for i in 0..grid.n {
            for j in 0..grid.n {
                k[(i, j)] /= sw[i] * sw[j];
            }
        }
        let e = SymmetricEigen::new(k);
        EigenPropagator { vectors: e.eigenvectors, values: e.eigenvalues, sw }
    }

    pub fn apply_component(&self, f: &[C64], t: f64, alpha: f64) -> Vec<C64> {
        let n = f.len();
        let re = DVector::from_iterator(n, (0..n).map(|i| f[i].re * self.sw[i]));
        let im = DVector::from_iterator(n, (0..n).map(|i| f[i].im * self.sw[i]));
        let cr = self.vectors.tr_mul(&re);
        let ci = self.vectors.tr_mul(&im);
        let mut yr = DVector::zeros(n);
        let mut yi = DVector::zeros(n);
        for k in 0..n {
            let z = C64::new(cr[k], ci[k]) * C64::from_polar(1.0, -alpha * t * self.values[k]);
            yr[k] = z.re;
            yi[k] = z.im;
        }
        let ur = &self.vectors * yr;
        let ui = &self.vectors * yi;
        (0..n).map(|i| C64::new(ur[i], ui[i]) / self.sw[i]).collect()
    }

    /// `diag(exp(itΔ), exp(iκtΔ))`.
    pub fn apply(&self, u: &FieldPair, t: f64) -> FieldPair {
        FieldPair { u: self.apply_component(&u.u, t, 1.0), v: self.apply_component(&u.v, t, u.kappa), kappa: u.kappa }
    }
}

/// Cayley approximation of `exp(iαΔτ)` on one component.
#[derive(Clone, Debug)]
pub struct CayleyStep {
    lu: ComplexBandLu,
    beta: f64,
}

impl CayleyStep {
    pub fn new(grid: &RadialGrid, tau: f64, alpha: f64) -> Self {
        let beta = 0.5 * tau * alpha;
        CayleyStep { lu: ComplexBandLu::new(&grid.weights, beta, &grid.stiffness), beta }
    }

    pub fn apply(&self, grid: &RadialGrid, f: &[C64]) -> Vec<C64> {
        let kf = grid.stiffness.apply_c(f);
        let i = C64::i();
        let mut x: Vec<C64> = (0..f.len()).map(|k| f[k] * grid.weights[k] - i * self.beta * kf[k]).collect();
        self.lu.solve_in_place(&mut x);
        x
    }
}

/// `diag(exp(i·dt·Δ), exp(iκ·dt·Δ))`, exact in the discrete eigenbasis.
pub fn linear_propagator(prop: &EigenPropagator, u: &FieldPair, dt: f64) -> FieldPair {
    if dt == 0.0 {
        return u.clone();
    }
    prop.apply(u, dt)
}

/// One Cayley step of the same flow; banded, so usable at any `n`.
pub fn cayley_propagator(grid: &RadialGrid, u: &FieldPair, dt: f64) -> FieldPair {
    if dt == 0.0 {
        return u.clone();
    }
    let a = CayleyStep::new(grid, dt, 1.0);
    let b = CayleyStep::new(grid, dt, u.kappa);
    FieldPair { u: a.apply(grid, &u.u), v: b.apply(grid, &u.v), kappa: u.kappa }
}

/// Pointwise RK4 for `u' = i c ū v`, `v' = i u²`.
pub fn nonlinear_substep(u: &FieldPair, dt: f64, coupling: f64) -> FieldPair {
    let i = C64::i();
    let rhs = |a: C64, b: C64| (i * coupling * a.conj() * b, i * a * a);
    let mut out = u.clone();
    for k in 0..u.len() {
        let (a, b) = (u.u[k], u.v[k]);
        let (k1a, k1b) = rhs(a, b);
        let (k2a, k2b) = rhs(a + 0.5 * dt * k1a, b + 0.5 * dt * k1b);
        let (k3a, k3b) = rhs(a + 0.5 * dt * k2a, b + 0.5 * dt * k2b);
        let (k4a, k4b) = rhs(a + dt * k3a, b + dt * k3b);
        out.u[k] = a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        out.v[k] = b + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    }
    out
}

/// Cayley step of `h' = -𝓔h`.
struct PerturbationStep {
    solver: ShiftedE,
    inv: f64,
}

enum LinearStep {
    Full(CayleyStep, CayleyStep),
    Eigen(f64),
    Perturbation(PerturbationStep),
}

const YOSHIDA_W1: f64 = 1.351_207_191_959_657_6;
const YOSHIDA_W0: f64 = -1.702_414_383_919_315_3;

/// A reusable stepper with cached linear factorizations.
pub struct Stepper<'a> {
    grid: &'a RadialGrid,
    kappa: f64,
    system: System,
    mode: Mode,
    scheme: Scheme,
    e: Option<BlockOperatorE>,
    eigen: Option<Arc<EigenPropagator>>,
    cache: Vec<((u64, bool), LinearStep)>,
    sponge: Option<Vec<f64>>,
    sponge_strength: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a RadialGrid, b: &GroundStateBundle, cfg: &EvolutionConfig) -> Self {
        let eigen = (cfg.linear == LinearSolver::Eigenbasis && cfg.mode == Mode::Full).then(|| Arc::new(EigenPropagator::new(grid)));
        Self::build(grid, b, cfg, eigen)
    }

    /// Reuses a precomputed eigenbasis.
    pub fn with_propagator(grid: &'a RadialGrid, b: &GroundStateBundle, cfg: &EvolutionConfig, prop: Arc<EigenPropagator>) -> Self {
        Self::build(grid, b, cfg, Some(prop))
    }

    fn build(grid: &'a RadialGrid, b: &GroundStateBundle, cfg: &EvolutionConfig, eigen: Option<Arc<EigenPropagator>>) -> Self {
        let e = (cfg.mode == Mode::Perturbation).then(|| BlockOperatorE::new(grid, b));
        let sponge = cfg.sponge.map(|s| {
            grid.nodes
                .iter()
                .map(|&r| if r > s.start { ((r - s.start) / (grid.r_max - s.start)).powi(2) } else { 0.0 })
                .collect()
        });
        Stepper {
            grid,
            kappa: b.kappa,
            system: cfg.system,
            mode: cfg.mode,
            scheme: cfg.scheme,
            e,
            eigen,
            cache: Vec::new(),
            sponge,
            sponge_strength: cfg.sponge.map_or(0.0, |s| s.strength),
        }
    }

    fn linear_step(&mut self, tau: f64, exact: bool) -> Result<usize> {
        let key = (tau.to_bits(), exact);
        if let Some(k) = self.cache.iter().position(|(t, _)| *t == key) {
            return Ok(k);
        }
        let step = match self.mode {
            Mode::Full if exact && self.eigen.is_some() => LinearStep::Eigen(tau),
            Mode::Full => LinearStep::Full(CayleyStep::new(self.grid, tau, 1.0), CayleyStep::new(self.grid, tau, self.kappa)),
            Mode::Perturbation => {
                let e = self.e.as_ref().expect("operator present in perturbation mode");
                LinearStep::Perturbation(PerturbationStep { solver: e.factor_shifted(-2.0 / tau)?, inv: 2.0 / tau })
            }
        };
        if self.cache.len() > 16 {
            self.cache.remove(0);
        }
        self.cache.push((key, step));
        Ok(self.cache.len() - 1)
    }

    fn linear(&mut self, x: &FieldPair, tau: f64) -> Result<FieldPair> {
        if tau == 0.0 {
            return Ok(x.clone());
        }
        let k = self.linear_step(tau, true)?;
        Ok(match &self.cache[k].1 {
            LinearStep::Full(a, b) => FieldPair { u: a.apply(self.grid, &x.u), v: b.apply(self.grid, &x.v), kappa: x.kappa },
            LinearStep::Eigen(t) => self.eigen.as_ref().expect("eigenbasis present").apply(x, *t),
            LinearStep::Perturbation(p) => {
                let e = self.e.as_ref().expect("operator present in perturbation mode");
                let rhs = x.scale(p.inv).sub(&e.apply(x));
                p.solver.solve(&rhs)
            }
        })
    }

    fn nonlinear(&self, x: &FieldPair, tau: f64) -> FieldPair {
        nonlinear_substep(x, tau, self.system.coupling())
    }

    fn strang_chain(&mut self, x: &FieldPair, subs: &[f64]) -> Result<FieldPair> {
        // Adjacent half-steps merge only for the exact flow; two Cayley
        // half-steps are not one Cayley step.
        let merge = self.eigen.is_some() && self.mode == Mode::Full;
        let mut y = x.clone();
        let mut pending = 0.0;
        for &s in subs {
            if merge {
                y = self.linear(&y, pending + 0.5 * s)?;
            } else {
                let z = self.linear(&y, pending)?;
                y = self.linear(&z, 0.5 * s)?;
            }
            y = self.nonlinear(&y, s);
            pending = 0.5 * s;
        }
        self.linear(&y, pending)
    }

    fn implicit_midpoint(&mut self, x: &FieldPair, tau: f64) -> Result<FieldPair> {
        let c = self.system.coupling();
        let i = C64::i();
        let nl = |z: &FieldPair| -> FieldPair {
            FieldPair {
                u: z.u.iter().zip(&z.v).map(|(a, b)| i * c * a.conj() * b).collect(),
                v: z.u.iter().map(|a| i * a * a).collect(),
                kappa: z.kappa,
            }
        };
        let base = self.cayley(x, tau)?;
        let mut y = base.clone();
        for _ in 0..60 {
            let mid = x.lin(0.5, &y, 0.5);
            // (I - τA/2)⁻¹ τ N(mid) added to the Cayley image of x
            let forcing = nl(&mid).scale(tau);
            let corr = self.resolvent_half(&forcing, tau)?;
            let next = base.add(&corr);
            let d = next.sub(&y).max_abs();
            y = next;
            if d <= 1e-14 * (1.0 + y.max_abs()) {
                return Ok(y);
            }
        }
        Err(Error::Numerical("implicit midpoint fixed point did not converge".into()))
    }

    fn cayley(&mut self, x: &FieldPair, tau: f64) -> Result<FieldPair> {
        let k = self.linear_step(tau, false)?;
        Ok(match &self.cache[k].1 {
            LinearStep::Full(a, b) => FieldPair { u: a.apply(self.grid, &x.u), v: b.apply(self.grid, &x.v), kappa: x.kappa },
            LinearStep::Perturbation(p) => {
                let e = self.e.as_ref().expect("operator present in perturbation mode");
                p.solver.solve(&x.scale(p.inv).sub(&e.apply(x)))
            }
            LinearStep::Eigen(_) => unreachable!("cayley keys never map to the eigenbasis"),
        })
    }

    /// `(I - τA/2)⁻¹ f` for the linear generator `A`.
    fn resolvent_half(&mut self, f: &FieldPair, tau: f64) -> Result<FieldPair> {
        let k = self.linear_step(tau, false)?;
        Ok(match &self.cache[k].1 {
            LinearStep::Full(a, b) => {
                let solve = |s: &CayleyStep, g: &[C64]| {
                    let mut z: Vec<C64> = g.iter().zip(&self.grid.weights).map(|(v, w)| v * w).collect();
                    s.lu.solve_in_place(&mut z);
                    z
                };
                FieldPair { u: solve(a, &f.u), v: solve(b, &f.v), kappa: f.kappa }
            }
            LinearStep::Perturbation(p) => p.solver.solve(&f.scale(p.inv)),
            LinearStep::Eigen(_) => unreachable!("cayley keys never map to the eigenbasis"),
        })
    }

    /// Advances by `tau` (any sign).
    pub fn step(&mut self, x: &FieldPair, tau: f64) -> Result<FieldPair> {
        let mut y = match self.scheme {
            Scheme::StrangSplit => self.strang_chain(x, &[tau])?,
            Scheme::Composition4 => self.strang_chain(x, &[YOSHIDA_W1 * tau, YOSHIDA_W0 * tau, YOSHIDA_W1 * tau])?,
            Scheme::CrankNicolson => self.implicit_midpoint(x, tau)?,
        };
        if let Some(s) = &self.sponge {
            let a = self.sponge_strength * tau.abs();
            for k in 0..y.len() {
                if s[k] > 0.0 {
                    let f = (-a * s[k]).exp();
                    y.u[k] *= f;
                    y.v[k] *= f;
                }
            }
        }
        Ok(y)
    }
}

/// Evaluates the monitored quantities for an evolved state.
pub struct Monitor<'a> {
    grid: &'a RadialGrid,
    bundle: &'a GroundStateBundle,
    system: System,
    mode: Mode,
    virial_r: Option<f64>,
    l4_radius: f64,
}

impl<'a> Monitor<'a> {
    pub fn new(grid: &'a RadialGrid, bundle: &'a GroundStateBundle, cfg: &EvolutionConfig) -> Self {
        Monitor { grid, bundle, system: cfg.system, mode: cfg.mode, virial_r: cfg.virial_r, l4_radius: cfg.l4_radius }
    }

    /// The state of the evolved system (adds `T(𝐐)` in perturbation mode).
    pub fn state(&self, x: &FieldPair) -> FieldPair {
        match self.mode {
            Mode::Full => x.clone(),
            Mode::Perturbation => self.bundle.t_q.add(x),
        }
    }

    /// Original-system variables.
    pub fn original(&self, x: &FieldPair) -> FieldPair {
        let s = self.state(x);
        match self.system {
            System::Original => s,
            System::Transformed => transform_t(&s, true),
        }
    }

    pub fn sample(&self, x: &FieldPair, t: f64, dt: f64) -> Sample {
        let s = self.state(x);
        let o = self.original(x);
        let g = self.grid;
        let (i_r, f_r) = match self.virial_r {
            Some(r) => (virial_i(g, &o, &VirialWeight::Finite(r)), virial_f(g, &o, &VirialWeight::Finite(r))),
            None => (0.0, 0.0),
        };
        let l4_local = (0..g.n)
            .filter(|&k| g.nodes[k] < self.l4_radius)
            .map(|k| (o.u[k].norm_sqr().powi(2) + o.v[k].norm_sqr().powi(2)) * g.weights[k])
            .sum();
        Sample {
            t,
            conserved: conserved(g, &s, self.system),
            delta: gap_delta(g, &o, self.bundle),
            h_orig: hamiltonian(g, &o),
            i_r,
            f_r,
            i_inf: if self.virial_r.is_some() { virial_i(g, &o, &VirialWeight::Infinite) } else { 0.0 },
            f_inf: if self.virial_r.is_some() { virial_f(g, &o, &VirialWeight::Infinite) } else { 0.0 },
            l4_local,
            dt,
            max_amp: o.max_abs(),
        }
    }
}

/// Runs from `(t0, x0)` to `cfg.t_end`; `x0` is the perturbation in
/// perturbation mode. `observer` sees every monitored state.
pub fn run_with(
    grid: &RadialGrid,
    bundle: &GroundStateBundle,
    x0: &FieldPair,
    t0: f64,
    cfg: &EvolutionConfig,
    observer: &mut dyn FnMut(f64, &FieldPair),
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    grid.check_len(x0.len())?;
    let dir = if cfg.t_end >= t0 { 1.0 } else { -1.0 };
    let mut stepper = Stepper::new(grid, bundle, cfg);
    let monitor = Monitor::new(grid, bundle, cfg);
    let h_q = hamiltonian(grid, &bundle.q_vec);
    let amp_limit = cfg.blowup_amplitude_factor * bundle.q_vec.max_abs();
    let mut x = x0.clone();
    let mut t = t0;
    let mut dt = cfg.dt;
    let mut samples = vec![monitor.sample(&x, t, dt)];
    observer(t, &x);
    let mut e_last = samples[0].conserved.e;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut termination = Termination::Completed;
    let span = (cfg.t_end - t0).abs();
    while (t - t0).abs() < span * (1.0 - 1e-14) {
        let remaining = span - (t - t0).abs();
        let tau = dt.min(remaining);
        let y = match stepper.step(&x, dir * tau) {
            Ok(y) => y,
            Err(e) => {
                termination = Termination::Instability { diagnostic: e.to_string() };
                break;
            }
        };
        if !y.is_finite() {
            if cfg.adapt && dt > cfg.dt_min {
                dt *= 0.5;
                rejected += 1;
                continue;
            }
            termination = Termination::Instability { diagnostic: format!("non-finite state at t = {t}") };
            break;
        }
        if cfg.adapt {
            let s = monitor.state(&y);
            let c = conserved(grid, &s, cfg.system);
            let scale = c.h.abs().max(h_q);
            if (c.e - e_last).abs() > cfg.step_tol * scale {
                dt *= 0.5;
                rejected += 1;
                if dt < cfg.dt_min {
                    termination = Termination::Blowup { reason: format!("accepted step fell below {:e} at t = {t}", cfg.dt_min) };
                    break;
                }
                continue;
            }
            e_last = c.e;
        }
        x = y;
        t += dir * tau;
        steps += 1;
        let o = monitor.original(&x);
        let h = hamiltonian(grid, &o);
        let amp = o.max_abs();
        let trigger = if h > cfg.blowup_h_factor * h_q {
            Some(format!("H = {h:e} exceeds {} H(Q) at t = {t}", cfg.blowup_h_factor))
        } else if amp > amp_limit {
            Some(format!("amplitude {amp:e} exceeds {} |Q|_inf at t = {t}", cfg.blowup_amplitude_factor))
        } else {
            None
        };
        if steps.is_multiple_of(cfg.monitor_stride) || trigger.is_some() || (t - t0).abs() >= span * (1.0 - 1e-14) {
            samples.push(monitor.sample(&x, t, tau));
            observer(t, &x);
        }
        if let Some(reason) = trigger {
            termination = Termination::Blowup { reason };
            break;
        }
        if cfg.adapt && dt < cfg.dt {
            dt = (dt * 1.25).min(cfg.dt);
        }
    }
    Ok(TrajectoryRecord { kappa: bundle.kappa, system: cfg.system, samples, termination, h_q, virial_r: cfg.virial_r, steps, rejected })
}

pub fn run(grid: &RadialGrid, bundle: &GroundStateBundle, x0: &FieldPair, cfg: &EvolutionConfig) -> Result<TrajectoryRecord> {
    run_with(grid, bundle, x0, 0.0, cfg, &mut |_, _| {})
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirialDeviation {
    /// `max |dI_R/dt - F_R| / max |F_R|` over interior samples.
    pub finite: f64,
    /// The same for `R = ∞`.
    pub infinite: f64,
    pub finite_abs: f64,
    pub infinite_abs: f64,
    /// `max |F_R|` and `max |F_∞|`.
    pub finite_scale: f64,
    pub infinite_scale: f64,
}

/// Centred differences of the `I_R` series against `F_R`.
pub fn check_virial_identity(record: &TrajectoryRecord) -> Result<VirialDeviation> {
    if record.virial_r.is_none() {
        return Err(Error::InvalidParameter("record has no virial series".into()));
    }
    let s = &record.samples;
    if s.len() < 3 {
        return Err(Error::InvalidParameter("need at least three samples".into()));
    }
    let dev = |i_of: &dyn Fn(&Sample) -> f64, f_of: &dyn Fn(&Sample) -> f64| {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 1..s.len() - 1 {
            let d = (i_of(&s[k + 1]) - i_of(&s[k - 1])) / (s[k + 1].t - s[k - 1].t);
            worst = worst.max((d - f_of(&s[k])).abs());
            scale = scale.max(f_of(&s[k]).abs());
        }
        (worst, scale)
    };
    let (wf, sf) = dev(&|x| x.i_r, &|x| x.f_r);
    let (wi, si) = dev(&|x| x.i_inf, &|x| x.f_inf);
    Ok(VirialDeviation {
        finite: wf / sf.max(f64::MIN_POSITIVE),
        infinite: wi / si.max(f64::MIN_POSITIVE),
        finite_abs: wf,
        infinite_abs: wi,
        finite_scale: sf,
        infinite_scale: si,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    GlobalDecaying,
    Blowup,
    Trapped,
    Undecided,
}

/// Thresholds for [`detect`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    /// `δ₀` as a fraction of `H(𝐐)`.
    pub delta0_fraction: f64,
    /// Number of equal time windows for the L⁴ trend.
    pub windows: usize,
    /// Last-window L⁴ integral must fall below this fraction of the largest window.
    pub decay_ratio: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions { delta0_fraction: 0.1, windows: 4, decay_ratio: 0.2 }
    }
}

/// Windowed `∫∫ |u|⁴ + |v|⁴` over the local ball.
pub fn l4_windows(record: &TrajectoryRecord, windows: usize) -> Vec<f64> {
    let s = &record.samples;
    if s.len() < 2 || windows == 0 {
        return vec![];
    }
    let (t0, t1) = (s[0].t, s[s.len() - 1].t);
    let width = (t1 - t0) / windows as f64;
    let mut out = vec![0.0; windows];
    for k in 1..s.len() {
        let mid = 0.5 * (s[k].t + s[k - 1].t);
        let w = (((mid - t0) / width).floor() as usize).min(windows - 1);
        out[w] += 0.5 * (s[k].l4_local + s[k - 1].l4_local) * (s[k].t - s[k - 1].t).abs();
    }
    out
}

/// Classifies a record. `lambda_bounded` carries the modulation verdict when
/// one is available; without it a small `δ` alone decides "trapped".
pub fn detect(record: &TrajectoryRecord, opts: &DetectOptions, lambda_bounded: Option<bool>) -> Classification {
    if matches!(record.termination, Termination::Blowup { .. }) {
        return Classification::Blowup;
    }
    if matches!(record.termination, Termination::Instability { .. }) {
        return Classification::Undecided;
    }
    let s = &record.samples;
    let half = s.len() / 2;
    let delta0 = opts.delta0_fraction * record.h_q;
    if s[half..].iter().all(|x| x.delta < delta0) && lambda_bounded != Some(false) {
        return Classification::Trapped;
    }
    let w = l4_windows(record, opts.windows);
    if let (Some(last), Some(max)) = (w.last(), w.iter().cloned().reduce(f64::max)) {
        let tail_decreasing = w.windows(2).skip(w.len() / 2).all(|p| p[1] <= p[0]);
        if *last < opts.decay_ratio * max && tail_decreasing {
            return Classification::GlobalDecaying;
        }
    }
    Classification::Undecided
}
