//! Scenario configuration: sectioned `key = value` text or JSON.
//!
//! ```text
//! scenario = dichotomy
//! seed = 7
//!
//! [grid]
//! n = 1024
//!
//! [physics]
//! kappa = 0.5
//!
//! [sweep]
//! recipe = scale 0.9
//! recipe = scale 1.1
//! ```

use crate::error::CliError;
use qnls::evolution::{LinearSolver, Scheme};
use qnls::special::GSign;
use qnls::System;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    GroundState,
    Spectrum,
    Special,
    Evolve,
    Modulate,
    Dichotomy,
    Report,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [Scenario::GroundState, Scenario::Spectrum, Scenario::Special, Scenario::Evolve, Scenario::Modulate, Scenario::Dichotomy, Scenario::Report];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::GroundState => "ground-state",
            Scenario::Spectrum => "spectrum",
            Scenario::Special => "special",
            Scenario::Evolve => "evolve",
            Scenario::Modulate => "modulate",
            Scenario::Dichotomy => "dichotomy",
            Scenario::Report => "report",
        }
    }

    pub fn needs_sweep(self) -> bool {
        matches!(self, Scenario::Evolve | Scenario::Modulate | Scenario::Dichotomy)
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    Sinh,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Harmonic,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridBlock {
    pub n: usize,
    pub r_max: f64,
    pub mapping: MappingKind,
    /// Fine-region radius of the sinh map.
    pub core: f64,
    pub boundary: BoundaryKind,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { n: 2048, r_max: 200.0, mapping: MappingKind::Sinh, core: 2.0, boundary: BoundaryKind::Harmonic }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsBlock {
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionBlock {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub system: System,
    pub linear: LinearSolver,
    pub adapt: bool,
    pub monitor_stride: usize,
    pub blowup_factor: f64,
    pub sponge_start: Option<f64>,
    pub sponge_strength: f64,
    pub virial_r: Option<f64>,
}

impl Default for EvolutionBlock {
    fn default() -> Self {
        EvolutionBlock {
            dt: 1e-3,
            t_end: 10.0,
            scheme: Scheme::Composition4,
            system: System::Original,
            linear: LinearSolver::Cayley,
            adapt: false,
            monitor_stride: 10,
            blowup_factor: 50.0,
            sponge_start: None,
            sponge_strength: 1.0,
            virial_r: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumBlock {
    pub tol: f64,
    pub dense_n: usize,
    pub max_iter: usize,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock { tol: 1e-6, dense_n: 256, max_iter: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecialBlock {
    pub k: usize,
    pub t0_level: f64,
    pub far_level: f64,
    pub dt: f64,
    pub forward: f64,
    /// Length of the backward legs of `𝒢±` from `𝒢±(0)`; 0 skips them.
    pub backward: f64,
}

impl Default for SpecialBlock {
    fn default() -> Self {
        SpecialBlock { k: 3, t0_level: 0.1, far_level: 1e-3, dt: 1e-2, forward: 10.0, backward: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulationBlock {
    pub delta0_fraction: f64,
    pub tol: f64,
}

impl Default for ModulationBlock {
    fn default() -> Self {
        ModulationBlock { delta0_fraction: 0.1, tol: 1e-11 }
    }
}

/// Initial data for one sweep entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Recipe {
    /// `scale · 𝐐_[θ,λ]` plus seeded noise of relative `Ḣ¹` size `noise`.
    Scaled { scale: f64, theta: f64, lambda: f64, noise: f64 },
    Threshold { sign: GSign },
    /// `T⁻¹ W^a` at the start of the shot.
    Special { a: f64 },
    /// Profile CSV on the same grid.
    File { path: PathBuf },
}

impl FromStr for Recipe {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let num = |w: Option<&&str>, what: &str| -> Result<f64, String> {
            let w = w.ok_or_else(|| format!("{what} needs a value"))?;
            w.parse::<f64>().map_err(|_| format!("bad number `{w}` for {what}"))
        };
        match words.first().copied() {
            Some("G+") => Ok(Recipe::Threshold { sign: GSign::Plus }),
            Some("G-") => Ok(Recipe::Threshold { sign: GSign::Minus }),
            Some("W") => Ok(Recipe::Special { a: num(words.get(1), "W")? }),
            Some("file") => {
                let rest = s.trim_start().strip_prefix("file").unwrap_or("").trim();
                if rest.is_empty() {
                    return Err("file needs a path".into());
                }
                Ok(Recipe::File { path: rest.into() })
            }
            Some("scale") => {
                let mut r = Recipe::Scaled { scale: num(words.get(1), "scale")?, theta: 0.0, lambda: 1.0, noise: 0.0 };
                let Recipe::Scaled { theta, lambda, noise, .. } = &mut r else { unreachable!() };
                let mut i = 2;
                while i < words.len() {
                    let v = num(words.get(i + 1), words[i])?;
                    match words[i] {
                        "theta" => *theta = v,
                        "lambda" if v > 0.0 => *lambda = v,
                        "lambda" => return Err("lambda must be positive".into()),
                        "noise" => *noise = v,
                        w => return Err(format!("unknown recipe option `{w}`")),
                    }
                    i += 2;
                }
                Ok(r)
            }
            _ => Err(format!("unknown recipe `{s}`")),
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipe::Scaled { scale, theta, lambda, noise } => {
                write!(f, "scale {scale:?}")?;
                if *theta != 0.0 {
                    write!(f, " theta {theta:?}")?;
                }
                if *lambda != 1.0 {
                    write!(f, " lambda {lambda:?}")?;
                }
                if *noise != 0.0 {
                    write!(f, " noise {noise:?}")?;
                }
                Ok(())
            }
            Recipe::Threshold { sign: GSign::Plus } => f.write_str("G+"),
            Recipe::Threshold { sign: GSign::Minus } => f.write_str("G-"),
            Recipe::Special { a } => write!(f, "W {a:?}"),
            Recipe::File { path } => write!(f, "file {}", path.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads for sweeps; 0 picks the available parallelism.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub grid: GridBlock,
    pub physics: PhysicsBlock,
    #[serde(default)]
    pub evolution: EvolutionBlock,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub special: SpecialBlock,
    #[serde(default)]
    pub modulation: ModulationBlock,
    #[serde(default)]
    pub sweep: Vec<Recipe>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One sweep entry ready to run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunDescriptor {
    pub index: usize,
    pub label: String,
    pub recipe: Recipe,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, kappa: f64) -> Self {
        ScenarioConfig {
            scenario,
            seed: 0,
            output: default_output(),
            workers: 0,
            grid: GridBlock::default(),
            physics: PhysicsBlock { kappa },
            evolution: EvolutionBlock::default(),
            spectrum: SpectrumBlock::default(),
            special: SpecialBlock::default(),
            modulation: ModulationBlock::default(),
            sweep: vec![],
        }
    }

    pub fn runs(&self) -> Vec<RunDescriptor> {
        self.sweep.iter().enumerate().map(|(index, recipe)| RunDescriptor { index, label: format!("run-{index:03}"), recipe: recipe.clone() }).collect()
    }

    /// Checks cross-field invariants; `line` is reported with the error.
    pub fn validate(&self, line: usize) -> Result<(), CliError> {
        let err = |msg: &str| Err(CliError::Config { line, msg: msg.to_string() });
        if !(self.physics.kappa > 0.0 && self.physics.kappa.is_finite()) {
            return err("κ must be positive");
        }
        if self.grid.n < 16 {
            return err("grid.n must be at least 16");
        }
        if !(self.grid.r_max > 0.0) || !(self.grid.core > 0.0) {
            return err("grid.r_max and grid.core must be positive");
        }
        let e = &self.evolution;
        if !(e.dt > 0.0) || !(e.t_end > 0.0) || e.monitor_stride == 0 || !(e.blowup_factor > 1.0) {
            return err("evolution needs dt > 0, t_end > 0, monitor_stride ≥ 1, blowup_factor > 1");
        }
        if !(self.spectrum.tol > 0.0) || self.spectrum.dense_n < 16 {
            return err("spectrum needs tol > 0 and dense_n ≥ 16");
        }
        let s = &self.special;
        if s.k == 0 || !(s.far_level > 0.0 && s.far_level < s.t0_level && s.t0_level < 1.0) || !(s.dt > 0.0) || s.backward < 0.0 {
            return err("special needs k ≥ 1, 0 < far_level < t0_level < 1, dt > 0, backward ≥ 0");
        }
        if !(self.modulation.delta0_fraction > 0.0) {
            return err("modulation.delta0_fraction must be positive");
        }
        if self.scenario.needs_sweep() && self.sweep.is_empty() {
            return err(&format!("missing section [sweep] required by scenario {}", self.scenario));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Text form accepted by [`parse_config`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("scenario", self.scenario.to_string());
        kv("seed", self.seed.to_string());
        kv("output", self.output.display().to_string());
        kv("workers", self.workers.to_string());
        let g = &self.grid;
        s.push_str("\n[grid]\n");
        s.push_str(&format!("n = {}\nr_max = {:?}\nmapping = {}\ncore = {:?}\nboundary = {}\n", g.n, g.r_max, mapping_name(g.mapping), g.core, boundary_name(g.boundary)));
        s.push_str(&format!("\n[physics]\nkappa = {:?}\n", self.physics.kappa));
        let e = &self.evolution;
        s.push_str("\n[evolution]\n");
        s.push_str(&format!(
            "dt = {:?}\nt_end = {:?}\nscheme = {}\nsystem = {}\nlinear = {}\nadapt = {}\nmonitor_stride = {}\nblowup_factor = {:?}\nsponge_strength = {:?}\n",
            e.dt,
            e.t_end,
            scheme_name(e.scheme),
            system_name(e.system),
            linear_name(e.linear),
            e.adapt,
            e.monitor_stride,
            e.blowup_factor,
            e.sponge_strength
        ));
        if let Some(x) = e.sponge_start {
            s.push_str(&format!("sponge_start = {x:?}\n"));
        }
        if let Some(x) = e.virial_r {
            s.push_str(&format!("virial_r = {x:?}\n"));
        }
        let sp = &self.spectrum;
        s.push_str(&format!("\n[spectrum]\ntol = {:?}\ndense_n = {}\nmax_iter = {}\n", sp.tol, sp.dense_n, sp.max_iter));
        let c = &self.special;
        s.push_str(&format!(
            "\n[special]\nk = {}\nt0_level = {:?}\nfar_level = {:?}\ndt = {:?}\nforward = {:?}\nbackward = {:?}\n",
            c.k, c.t0_level, c.far_level, c.dt, c.forward, c.backward
        ));
        s.push_str(&format!("\n[modulation]\ndelta0_fraction = {:?}\ntol = {:?}\n", self.modulation.delta0_fraction, self.modulation.tol));
        if !self.sweep.is_empty() {
            s.push_str("\n[sweep]\n");
            for r in &self.sweep {
                s.push_str(&format!("recipe = {r}\n"));
            }
        }
        s
    }
}

fn mapping_name(m: MappingKind) -> &'static str {
    match m {
        MappingKind::Sinh => "sinh",
        MappingKind::Uniform => "uniform",
    }
}

fn boundary_name(b: BoundaryKind) -> &'static str {
    match b {
        BoundaryKind::Harmonic => "harmonic",
        BoundaryKind::Dirichlet => "dirichlet",
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::StrangSplit => "strang",
        Scheme::Composition4 => "composition4",
        Scheme::CrankNicolson => "crank-nicolson",
    }
}

fn system_name(s: System) -> &'static str {
    match s {
        System::Original => "original",
        System::Transformed => "transformed",
    }
}

fn linear_name(l: LinearSolver) -> &'static str {
    match l {
        LinearSolver::Cayley => "cayley",
        LinearSolver::Eigenbasis => "eigenbasis",
    }
}

fn pick<T: Copy>(v: &str, table: &[(&str, T)]) -> Result<T, String> {
    table.iter().find(|(k, _)| *k == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = table.iter().map(|(k, _)| *k).collect();
        format!("`{v}` is not one of {}", names.join(", "))
    })
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
}

fn flag(v: &str) -> Result<bool, String> {
    pick(v, &[("true", true), ("false", false)])
}

/// Parses text (or JSON when the first non-blank character is `{`).
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    if text.trim_start().starts_with('{') {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| CliError::Config { line: e.line(), msg: e.to_string() })?;
        cfg.validate(0)?;
        return Ok(cfg);
    }
    let mut scenario: Option<Scenario> = None;
    let mut kappa: Option<f64> = None;
    let mut cfg = ScenarioConfig::new(Scenario::GroundState, 1.0);
    let mut section = String::new();
    let mut last = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fail = |msg: String| CliError::Config { line, msg };
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| fail(format!("malformed section header `{content}`")))?.trim();
            if !["grid", "physics", "evolution", "spectrum", "special", "modulation", "sweep"].contains(&name) {
                return Err(fail(format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| fail(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let e = &mut cfg.evolution;
        let res: Result<(), String> = match (section.as_str(), key) {
            ("", "scenario") => value.parse().map(|s| scenario = Some(s)),
            ("", "seed") => num(value).map(|v| cfg.seed = v),
            ("", "output") => {
                cfg.output = value.into();
                Ok(())
            }
            ("", "workers") => num(value).map(|v| cfg.workers = v),
            ("grid", "n") => num(value).map(|v| cfg.grid.n = v),
            ("grid", "r_max") => num(value).map(|v| cfg.grid.r_max = v),
            ("grid", "core") => num(value).map(|v| cfg.grid.core = v),
            ("grid", "mapping") => pick(value, &[("sinh", MappingKind::Sinh), ("uniform", MappingKind::Uniform)]).map(|v| cfg.grid.mapping = v),
            ("grid", "boundary") => pick(value, &[("harmonic", BoundaryKind::Harmonic), ("dirichlet", BoundaryKind::Dirichlet)]).map(|v| cfg.grid.boundary = v),
            ("physics", "kappa") => num::<f64>(value).map(|v| kappa = Some(v)),
            ("evolution", "dt") => num(value).map(|v| e.dt = v),
            ("evolution", "t_end") => num(value).map(|v| e.t_end = v),
            ("evolution", "scheme") => {
                pick(value, &[("strang", Scheme::StrangSplit), ("composition4", Scheme::Composition4), ("crank-nicolson", Scheme::CrankNicolson)]).map(|v| e.scheme = v)
            }
            ("evolution", "system") => pick(value, &[("original", System::Original), ("transformed", System::Transformed)]).map(|v| e.system = v),
            ("evolution", "linear") => pick(value, &[("cayley", LinearSolver::Cayley), ("eigenbasis", LinearSolver::Eigenbasis)]).map(|v| e.linear = v),
            ("evolution", "adapt") => flag(value).map(|v| e.adapt = v),
            ("evolution", "monitor_stride") => num(value).map(|v| e.monitor_stride = v),
            ("evolution", "blowup_factor") => num(value).map(|v| e.blowup_factor = v),
            ("evolution", "sponge_start") => num(value).map(|v| e.sponge_start = Some(v)),
            ("evolution", "sponge_strength") => num(value).map(|v| e.sponge_strength = v),
            ("evolution", "virial_r") => num(value).map(|v| e.virial_r = Some(v)),
            ("spectrum", "tol") => num(value).map(|v| cfg.spectrum.tol = v),
            ("spectrum", "dense_n") => num(value).map(|v| cfg.spectrum.dense_n = v),
            ("spectrum", "max_iter") => num(value).map(|v| cfg.spectrum.max_iter = v),
            ("special", "k") => num(value).map(|v| cfg.special.k = v),
            ("special", "t0_level") => num(value).map(|v| cfg.special.t0_level = v),
            ("special", "far_level") => num(value).map(|v| cfg.special.far_level = v),
            ("special", "dt") => num(value).map(|v| cfg.special.dt = v),
            ("special", "forward") => num(value).map(|v| cfg.special.forward = v),
            ("special", "backward") => num(value).map(|v| cfg.special.backward = v),
            ("modulation", "delta0_fraction") => num(value).map(|v| cfg.modulation.delta0_fraction = v),
            ("modulation", "tol") => num(value).map(|v| cfg.modulation.tol = v),
            ("sweep", "recipe") => value.parse().map(|r| cfg.sweep.push(r)),
            (sec, key) => Err(if sec.is_empty() { format!("unknown key `{key}`") } else { format!("unknown key `{key}` in [{sec}]") }),
        };
        res.map_err(fail)?;
        if key == "kappa" && !kappa.is_some_and(|k| k > 0.0 && k.is_finite()) {
            return Err(fail("κ must be positive".into()));
        }
    }
    let end = last + 1;
    cfg.scenario = scenario.ok_or(CliError::Config { line: end, msg: "missing key `scenario`".into() })?;
    cfg.physics.kappa = kappa.ok_or(CliError::Config { line: end, msg: "missing section [physics] with `kappa`".into() })?;
    cfg.validate(end)?;
    Ok(cfg)
}
