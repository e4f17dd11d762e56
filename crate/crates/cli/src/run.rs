//! Scenario execution and per-run artifacts.

use crate::config::{BoundaryKind, MappingKind, Recipe, RunDescriptor, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::report::{emit_report, Report};
use qnls::evolution::{check_virial_identity, detect, run_with, DetectOptions, EvolutionConfig, Mode, Sponge, TrajectoryRecord};
use qnls::functionals::{conserved, variational_constants};
use qnls::groundstate::{q_orbit, transform_t, write_snapshot};
use qnls::io::{read_profile, write_profile};
use qnls::modulation::{track, verify_rate_bound, ModulationOptions};
use qnls::random::{random_pair, rng};
use qnls::special::{construct_g, shoot_w, threshold_backward, GConfig, GSign, ShootConfig};
use qnls::spectrum::{eigenpair_e, SpectralResult, SpectrumOptions};
use qnls::{FieldPair, GridSpec, GroundStateBundle, Mapping, OuterBoundary, RadialGrid, System};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Failed,
}

/// Contents of `<out>/<label>/run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub recipe: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    /// Finite scalar results only.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl RunSummary {
    fn new(label: &str, recipe: String) -> Self {
        RunSummary { label: label.into(), recipe, status: RunStatus::Completed, error: None, classification: None, termination: None, metrics: BTreeMap::new() }
    }

    fn metric(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.metrics.insert(key.into(), v);
        }
    }

    fn failed(label: &str, recipe: String, e: &CliError) -> Self {
        RunSummary { status: RunStatus::Failed, error: Some(e.to_string()), ..RunSummary::new(label, recipe) }
    }
}

/// Contents of `<out>/summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub version: String,
    pub seed: u64,
    pub kappa: f64,
    pub n: usize,
    pub metrics: BTreeMap<String, f64>,
    pub runs: Vec<RunSummary>,
}

pub fn build_grid(cfg: &ScenarioConfig) -> Result<RadialGrid, CliError> {
    let g = &cfg.grid;
    let spec = GridSpec {
        n: g.n,
        r_max: g.r_max,
        mapping: match g.mapping {
            MappingKind::Sinh => Mapping::Sinh { core: g.core },
            MappingKind::Uniform => Mapping::Uniform,
        },
        boundary: match g.boundary {
            BoundaryKind::Harmonic => OuterBoundary::HarmonicTail,
            BoundaryKind::Dirichlet => OuterBoundary::Dirichlet,
        },
    };
    spec.build().map_err(CliError::numerical("grid"))
}

pub fn evolution_config(cfg: &ScenarioConfig) -> EvolutionConfig {
    let e = &cfg.evolution;
    EvolutionConfig {
        dt: e.dt,
        t_end: e.t_end,
        scheme: e.scheme,
        system: e.system,
        mode: Mode::Full,
        linear: e.linear,
        blowup_h_factor: e.blowup_factor,
        blowup_amplitude_factor: e.blowup_factor,
        monitor_stride: e.monitor_stride,
        adapt: e.adapt,
        virial_r: e.virial_r,
        sponge: e.sponge_start.map(|start| Sponge { start, strength: e.sponge_strength }),
        ..Default::default()
    }
}

fn spectrum_options(cfg: &ScenarioConfig) -> SpectrumOptions {
    SpectrumOptions { dense_n: cfg.spectrum.dense_n, tol: cfg.spectrum.tol, max_iter: cfg.spectrum.max_iter }
}

fn g_config(cfg: &ScenarioConfig) -> GConfig {
    let s = &cfg.special;
    GConfig { k: s.k, t0_level: s.t0_level, far_level: s.far_level, dt: s.dt, forward: s.forward }
}

/// One unit of pool work: writes into the given run directory.
type Job<'a> = Box<dyn Fn(&Path) -> Result<RunSummary, CliError> + Sync + 'a>;

struct Context {
    grid: RadialGrid,
    bundle: GroundStateBundle,
    spectrum: Option<SpectralResult>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    fs::write(path, text + "\n").map_err(CliError::io(path))
}

/// Initial data in original variables.
fn initial_data(ctx: &Context, cfg: &ScenarioConfig, run: &RunDescriptor) -> Result<FieldPair, CliError> {
    let (g, b) = (&ctx.grid, &ctx.bundle);
    let kappa = cfg.physics.kappa;
    let ctxt = || format!("{} ({})", run.label, run.recipe);
    match &run.recipe {
        Recipe::Scaled { scale, theta, lambda, noise } => {
            let mut u = q_orbit(g, kappa, *theta, *lambda).scale(*scale);
            if *noise != 0.0 {
                let mut r = rng(cfg.seed.wrapping_add(run.index as u64));
                let z = random_pair(g, kappa, &mut r);
                u = u.add(&z.scale(noise * g.h1dot_norm(&b.q_vec) / g.h1dot_norm(&z)));
            }
            Ok(u)
        }
        Recipe::Threshold { sign } => {
            let spec = ctx.spectrum.as_ref().expect("spectrum computed for threshold recipes");
            let th = construct_g(g, b, spec, *sign, &g_config(cfg)).map_err(CliError::numerical(ctxt()))?;
            Ok(th.data)
        }
        Recipe::Special { a } => {
            let spec = ctx.spectrum.as_ref().expect("spectrum computed for special recipes");
            let mut sc = ShootConfig::new(*a, cfg.special.k, spec.lambda1);
            sc.dt = cfg.special.dt;
            sc.t_end = sc.t_far + 1.0;
            let tr = shoot_w(g, b, spec, &sc).map_err(CliError::numerical(ctxt()))?;
            if tr.backward_blowup() {
                return Err(CliError::Failed { context: ctxt(), msg: format!("shot blew up before reaching t = 0 (stopped at {})", tr.t_min()) });
            }
            let (_, w) = tr.snapshots.first().ok_or_else(|| CliError::Failed { context: ctxt(), msg: "shot produced no states".into() })?;
            Ok(transform_t(w, true))
        }
        Recipe::File { path } => {
            let f = File::open(path).map_err(CliError::io(path))?;
            let (rs, u) = read_profile(f, kappa).map_err(CliError::numerical(ctxt()))?;
            let tol = 1e-9 * g.r_max;
            if rs.len() != g.n || rs.iter().zip(&g.nodes).any(|(a, b)| (a - b).abs() > tol) {
                return Err(CliError::Failed { context: ctxt(), msg: format!("profile nodes do not match the configured grid (n = {})", g.n) });
            }
            Ok(u)
        }
    }
}

fn record_metrics(s: &mut RunSummary, rec: &TrajectoryRecord) {
    let last = rec.samples.last().expect("record has samples");
    s.metric("t_final", last.t);
    s.metric("steps", rec.steps as f64);
    s.metric("rejected", rec.rejected as f64);
    s.metric("energy_drift", rec.max_energy_drift());
    s.metric("mass_drift", rec.max_mass_drift());
    s.metric("delta_initial", rec.samples[0].delta);
    s.metric("delta_final", last.delta);
    if let Ok(v) = check_virial_identity(rec) {
        s.metric("virial_finite", v.finite);
        s.metric("virial_infinite", v.infinite);
    }
    s.termination = Some(match &rec.termination {
        qnls::evolution::Termination::Completed => "completed".into(),
        qnls::evolution::Termination::Blowup { reason } => format!("blowup: {reason}"),
        qnls::evolution::Termination::Instability { diagnostic } => format!("instability: {diagnostic}"),
    });
}

fn evolve_one(ctx: &Context, cfg: &ScenarioConfig, run: &RunDescriptor, dir: &Path) -> Result<RunSummary, CliError> {
    let (g, b) = (&ctx.grid, &ctx.bundle);
    let u0 = initial_data(ctx, cfg, run)?;
    write_profile(create(&dir.join("initial.csv"))?, g, &u0).map_err(CliError::numerical(&run.label))?;
    let ecfg = evolution_config(cfg);
    let transformed = ecfg.system == System::Transformed;
    let x0 = if transformed { transform_t(&u0, false) } else { u0 };
    let keep = cfg.scenario == Scenario::Modulate;
    let mut states: Vec<(f64, FieldPair)> = Vec::new();
    let rec = run_with(g, b, &x0, 0.0, &ecfg, &mut |t, x| {
        if keep {
            states.push((t, if transformed { transform_t(x, true) } else { x.clone() }));
        }
    })
    .map_err(CliError::numerical(format!("{} ({})", run.label, run.recipe)))?;
    rec.write_csv(create(&dir.join("trajectory.csv"))?).map_err(CliError::numerical(&run.label))?;
    let mut s = RunSummary::new(&run.label, run.recipe.to_string());
    record_metrics(&mut s, &rec);
    let class = detect(&rec, &DetectOptions::default(), None);
    s.classification = Some(serde_json::to_value(class).expect("enum serializes").as_str().unwrap_or_default().to_string());
    if keep {
        let mo = ModulationOptions { delta0_fraction: cfg.modulation.delta0_fraction, tol: cfg.modulation.tol, ..Default::default() };
        let tr = track(g, b, &states, &mo).map_err(CliError::numerical(&run.label))?;
        tr.write_csv(create(&dir.join("modulation.csv"))?).map_err(CliError::numerical(&run.label))?;
        let rep = verify_rate_bound(&tr, 1e-12 * tr.h_q);
        s.metric("modulation_converged_fraction", tr.converged_fraction());
        if let Some(c) = tr.comparability(1e-12 * tr.h_q) {
            s.metric("modulation_comparability", c);
        }
        if let Some(r) = rep.max_ratio {
            s.metric("modulation_rate_ratio_max", r);
        }
    }
    Ok(s)
}

fn threshold_one(ctx: &Context, cfg: &ScenarioConfig, sign: GSign, dir: &Path) -> Result<RunSummary, CliError> {
    let (g, b) = (&ctx.grid, &ctx.bundle);
    let spec = ctx.spectrum.as_ref().expect("spectrum computed");
    let name = if sign == GSign::Plus { "G+" } else { "G-" };
    let th = construct_g(g, b, spec, sign, &g_config(cfg)).map_err(CliError::numerical(name))?;
    write_profile(create(&dir.join("initial.csv"))?, g, &th.data).map_err(CliError::numerical(name))?;
    th.trajectory.write_csv(create(&dir.join("trajectory.csv"))?).map_err(CliError::numerical(name))?;
    let mut s = RunSummary::new(&dir.file_name().unwrap_or_default().to_string_lossy(), name.into());
    s.metric("t0", th.t0);
    s.metric("energy_gap", th.energy_gap);
    s.metric("h_gap", th.h_gap);
    if let Some(r) = th.delta_rate {
        s.metric("delta_rate_over_lambda1", r);
    }
    s.metric("lambda1", spec.lambda1);
    if cfg.special.backward > 0.0 {
        let sponge = Some(Sponge { start: 0.75 * g.r_max, strength: 1.0 });
        let rec = threshold_backward(g, b, &th, cfg.special.backward, cfg.special.dt, sponge).map_err(CliError::numerical(name))?;
        rec.write_csv(create(&dir.join("backward.csv"))?).map_err(CliError::numerical(name))?;
        let class = detect(&rec, &DetectOptions::default(), None);
        s.classification = Some(serde_json::to_value(class).expect("enum serializes").as_str().unwrap_or_default().to_string());
        s.metric("backward_t_final", rec.samples.last().map_or(f64::NAN, |x| x.t));
    }
    Ok(s)
}

/// Runs `f` over `0..n` on up to `workers` threads; results keep index order.
fn pool<T: Send, F: Fn(usize) -> T + Sync>(n: usize, workers: usize, f: F) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let workers = workers.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every index ran")).collect()
}

fn workers(cfg: &ScenarioConfig) -> usize {
    if cfg.workers > 0 {
        cfg.workers
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Outcome of [`run_scenario`].
#[derive(Clone, Debug)]
pub enum Outcome {
    Summary(ScenarioSummary),
    Report(Report),
}

/// Runs the configured scenario, writing artifacts under `cfg.output`.
/// Per-run failures are recorded in their `run.json`; the first one is
/// returned as the error after all artifacts are written.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    cfg.validate(0)?;
    let out = cfg.output.clone();
    fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    if cfg.scenario == Scenario::Report {
        return emit_report(&out).map(Outcome::Report);
    }
    let grid = build_grid(cfg)?;
    let bundle = GroundStateBundle::new(&grid, cfg.physics.kappa).map_err(CliError::numerical("ground state"))?;
    let mut summary = ScenarioSummary {
        scenario: cfg.scenario,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        kappa: cfg.physics.kappa,
        n: grid.n,
        metrics: BTreeMap::new(),
        runs: vec![],
    };
    let mut metric = |k: &str, v: f64| {
        if v.is_finite() {
            summary.metrics.insert(k.into(), v);
        }
    };
    let needs_spectrum = matches!(cfg.scenario, Scenario::Spectrum | Scenario::Special)
        || cfg.sweep.iter().any(|r| matches!(r, Recipe::Threshold { .. } | Recipe::Special { .. })) && cfg.scenario.needs_sweep();
    let spectrum = if needs_spectrum { Some(eigenpair_e(&grid, &bundle, &spectrum_options(cfg)).map_err(CliError::numerical("spectrum"))?) } else { None };
    match cfg.scenario {
        Scenario::GroundState => {
            let vc = variational_constants(&grid, &bundle);
            let c = conserved(&grid, &bundle.q_vec, System::Original);
            metric("elliptic_residual", bundle.elliptic_residual);
            metric("pohozaev_ratio", vc.pohozaev_ratio);
            metric("c_gn", vc.c_gn);
            metric("c_kappa", vc.c_kappa);
            metric("h", c.h);
            metric("p", c.p);
            metric("e", c.e);
            write_snapshot(create(&out.join("ground_state.csv"))?, &grid, &bundle).map_err(CliError::numerical("ground state"))?;
        }
        Scenario::Spectrum => {
            let s = spectrum.as_ref().expect("computed above");
            metric("lambda1", s.lambda1);
            metric("lambda1_dense", s.lambda1_dense);
            metric("residual", s.residual);
            metric("normalization", s.normalization);
            metric("raw_normalization", s.raw_normalization);
            fs::write(out.join("spectrum.json"), s.to_json() + "\n").map_err(CliError::io(&out.join("spectrum.json")))?;
            s.write_profiles(create(&out.join("e_plus.csv"))?, &grid).map_err(CliError::numerical("spectrum"))?;
        }
        _ => {}
    }
    let ctx = &Context { grid, bundle, spectrum };
    let runs: Vec<(String, String, Job<'_>)> = match cfg.scenario {
        Scenario::Special => [GSign::Plus, GSign::Minus]
            .into_iter()
            .map(|sign| {
                let label = if sign == GSign::Plus { "g-plus" } else { "g-minus" };
                let f: Job<'_> = Box::new(move |d: &Path| threshold_one(ctx, cfg, sign, d));
                (label.to_string(), if sign == GSign::Plus { "G+".into() } else { "G-".into() }, f)
            })
            .collect(),
        s if s.needs_sweep() => cfg
            .runs()
            .into_iter()
            .map(|run| {
                let (label, recipe) = (run.label.clone(), run.recipe.to_string());
                let f: Job<'_> = Box::new(move |d: &Path| evolve_one(ctx, cfg, &run, d));
                (label, recipe, f)
            })
            .collect(),
        _ => vec![],
    };
    let results = pool(runs.len(), workers(cfg), |i| {
        let (label, recipe, f) = &runs[i];
        let dir = out.join(label);
        let res = fs::create_dir_all(&dir).map_err(CliError::io(&dir)).and_then(|_| f(&dir));
        let (s, err) = match res {
            Ok(s) => (s, None),
            Err(e) => (RunSummary::failed(label, recipe.clone(), &e), Some(e)),
        };
        let written = write_json(&dir.join("run.json"), &s);
        (s, err.or(written.err()))
    });
    let mut first_err = None;
    for (s, e) in results {
        summary.runs.push(s);
        if first_err.is_none() {
            first_err = e;
        }
    }
    write_json(&out.join("summary.json"), &summary)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(Outcome::Summary(summary)),
    }
}

/// Directory a run writes into.
pub fn run_dir(cfg: &ScenarioConfig, label: &str) -> PathBuf {
    cfg.output.join(label)
}
