//! Experiment configurations and their runners. Each runner validates its
//! configuration, computes, and returns tables, JSON artifacts and named
//! pass/fail checks; writing them out is left to the caller.

use crate::dtn::{assemble_dtn, box_eigenvalue};
use crate::elliptic::{
    error_norms, fitted_slope, sector_convergence_study, solve_dirichlet_dirichlet, solve_mixed, BoundaryDataTriple,
    DirichletProblem,
};
use crate::energy::material_derivative;
use crate::error::{Error, Result};
use crate::evolution::{dominant_frequency, RunResult, Simulation, SimulationConfig};
use crate::fem;
use crate::geometry::{
    build_beach, build_box, build_sector, build_sector_graded, BeachOptions, CornerDomain, DomainKind, SurfaceProfile,
};
use crate::hydro::{HydroSolver, VelocityField};
use crate::sector_analysis::mellin::{inverse_mellin, mellin, RadialSamples};
use crate::sector_analysis::{pencil_exponents_numeric, singular_exponents, singular_function, BoundaryConditionPair, OperatorPencil};
use crate::vec2::Vec2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::PI;

// ---------------------------------------------------------------- outputs

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Full-precision decimal: 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&format_number(*x)),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|c| c.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Numeric column by name (non-numeric cells become NaN).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[j] {
                    Cell::Num(x) => *x,
                    Cell::Int(i) => *i as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

/// Named comparison `value` against `limit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value < limit }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value >= limit }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub json: Vec<(String, serde_json::Value)>,
    pub checks: Vec<Check>,
    /// Monitor or solver failure that stopped a dynamic run.
    pub halt: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> serde_json::Value {
        json!({ "passed": self.passed(), "halt": self.halt, "checks": self.checks })
    }
}

// ------------------------------------------------------------- tolerances

/// Pass/fail thresholds; any subset can be overridden from a JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub exponent_agreement: f64,
    pub h1_order_window: f64,
    pub dtn_self_adjointness: f64,
    pub dtn_kernel: f64,
    pub dtn_spectrum_floor: f64,
    pub dtn_first_eigenvalue: f64,
    pub dtn_first_five: f64,
    pub hydrostatic_interior: f64,
    pub corner_agreement: f64,
    pub cascade_error: f64,
    pub residual_growth: f64,
    pub dispersion: f64,
    pub energy_drift: f64,
    pub area_drift: f64,
    pub vorticity: f64,
    pub still_water_energy: f64,
    pub translation: f64,
    pub mellin_roundtrip: f64,
    pub mellin_gamma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exponent_agreement: 1e-8,
            h1_order_window: 0.1,
            dtn_self_adjointness: 1e-8,
            dtn_kernel: 1e-9,
            dtn_spectrum_floor: 1e-10,
            dtn_first_eigenvalue: 0.02,
            dtn_first_five: 0.05,
            hydrostatic_interior: 0.01,
            corner_agreement: 0.05,
            cascade_error: 0.05,
            residual_growth: 2.0,
            dispersion: 0.05,
            energy_drift: 0.01,
            area_drift: 1e-3,
            vorticity: 1e-6,
            still_water_energy: 1e-10,
            translation: 1e-9,
            mellin_roundtrip: 1e-6,
            mellin_gamma: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Tolerances = serde_json::from_str(text).map_err(|e| Error::Config(format!("tolerance overrides: {e}")))?;
        let v = serde_json::to_value(&t).expect("serializable");
        for (k, x) in v.as_object().expect("object") {
            if !x.as_f64().is_some_and(|x| x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("tolerance {k} must be positive and finite")));
            }
        }
        Ok(t)
    }
}

// ---------------------------------------------------------------- domains

fn one() -> f64 {
    1.0
}

fn gravity() -> f64 {
    9.81
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Sector {
        omega: f64,
        #[serde(default = "one")]
        radius: f64,
        h: f64,
        /// Defaults to `max(1, 2 / lambda_1)`.
        #[serde(default)]
        grading: Option<f64>,
    },
    Box {
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        depth: f64,
        h: f64,
    },
    Beach {
        omega: f64,
        #[serde(default = "one")]
        half_width: f64,
        h: f64,
        #[serde(default)]
        profile: SurfaceProfile,
    },
}

impl DomainSpec {
    pub fn h(&self) -> f64 {
        match self {
            DomainSpec::Sector { h, .. } | DomainSpec::Box { h, .. } | DomainSpec::Beach { h, .. } => *h,
        }
    }

    pub fn with_h(&self, new_h: f64) -> Self {
        let mut d = self.clone();
        match &mut d {
            DomainSpec::Sector { h, .. } | DomainSpec::Box { h, .. } | DomainSpec::Beach { h, .. } => *h = new_h,
        }
        d
    }

    pub fn label(&self) -> String {
        match self {
            DomainSpec::Sector { omega, .. } => format!("sector(omega={omega})"),
            DomainSpec::Box { width, depth, .. } => format!("box({width}x{depth})"),
            DomainSpec::Beach { omega, .. } => format!("beach(omega={omega})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.h();
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("mesh size must be positive, got {h}")));
        }
        let ok = match self {
            DomainSpec::Sector { omega, radius, grading, .. } => {
                *omega > 0.0 && *omega < PI && *radius >= h && grading.is_none_or(|b| b >= 1.0)
            }
            DomainSpec::Box { width, depth, .. } => *width > 0.0 && *depth > 0.0,
            DomainSpec::Beach { omega, half_width, .. } => *omega > 0.0 && *omega < PI / 2.0 && *half_width > 0.0,
        };
        if !ok {
            return Err(Error::Config(format!("domain parameters rejected: {self:?}")));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<CornerDomain> {
        self.validate()?;
        match self {
            DomainSpec::Sector { omega, radius, h, grading } => match grading {
                Some(b) => build_sector_graded(*omega, *radius, *h, *b),
                None => build_sector(*omega, *radius, *h),
            },
            DomainSpec::Box { width, depth, h } => build_box(*width, *depth, *h),
            DomainSpec::Beach { omega, half_width, h, profile } => {
                build_beach(*omega, profile, *h, &BeachOptions { half_width: *half_width, ..Default::default() })
            }
        }
    }
}

// ---------------------------------------------------------------- configs

fn default_count() -> usize {
    5
}

fn default_bcs() -> Vec<BoundaryConditionPair> {
    BoundaryConditionPair::ALL.to_vec()
}

fn default_gradings() -> Vec<f64> {
    vec![1.0, 1.5]
}

fn default_fit_meshes() -> usize {
    4
}

fn default_margin() -> f64 {
    0.25
}

fn default_true() -> bool {
    true
}

fn default_mode() -> usize {
    1
}

fn default_steps_before() -> usize {
    100
}

fn default_samples() -> usize {
    5
}

fn default_gamma_lambdas() -> Vec<f64> {
    vec![-0.5, -1.0, -1.5, -2.0, -2.5, -3.0]
}

fn default_bumps() -> Vec<LogBump> {
    vec![LogBump { center: 0.0, width: 0.5 }, LogBump { center: 0.5, width: 0.35 }, LogBump { center: -0.7, width: 0.8 }]
}

/// `exp(-((ln r - center) / width)^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogBump {
    pub center: f64,
    pub width: f64,
}

/// Mellin transform checks: `M[e^{-r}](lambda) = Gamma(-lambda)` at
/// negative integer and half-integer `lambda`, and forward/inverse
/// roundtrips of log-Gaussian bumps on the line `Re lambda = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MellinSpec {
    #[serde(default = "default_gamma_lambdas")]
    pub gamma_lambdas: Vec<f64>,
    #[serde(default = "default_bumps")]
    pub bumps: Vec<LogBump>,
}

impl Default for MellinSpec {
    fn default() -> Self {
        MellinSpec { gamma_lambdas: default_gamma_lambdas(), bumps: default_bumps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrostaticSpec {
    pub omega: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    pub hs: Vec<f64>,
    /// Interior of S: nodes at least this far from both contact points.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "gravity")]
    pub g: f64,
    /// Surface at rest; the interior check `a = g` applies to flat water.
    #[serde(default)]
    pub profile: SurfaceProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    pub domain: DomainSpec,
    pub eta: SurfaceProfile,
    /// `[h, dt]` per level, coarse to fine.
    pub levels: Vec<[f64; 2]>,
    pub t_star: f64,
    #[serde(default = "gravity")]
    pub g: f64,
    /// Hold the finest level to the cascade tolerance; when false the
    /// errors are reported and only their decrease is checked.
    #[serde(default = "default_true")]
    pub threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub domain: DomainSpec,
    pub eta: SurfaceProfile,
    /// Surface trace of the velocity potential.
    #[serde(default)]
    pub psi: SurfaceProfile,
    #[serde(default)]
    pub sim: SimulationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualSpec {
    pub domain: DomainSpec,
    pub eta: SurfaceProfile,
    pub hs: Vec<f64>,
    pub dt: f64,
    #[serde(default = "default_steps_before")]
    pub steps_before: usize,
    /// Consecutive states; the residual is evaluated at the inner ones.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub sim: SimulationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    /// DtN eigenmode index (1 is the first sloshing mode).
    #[serde(default = "default_mode")]
    pub mode: usize,
    /// Run length in linear periods; replaces `t_end`.
    #[serde(default = "one")]
    pub periods: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Exponents {
        #[serde(default)]
        omegas: Vec<f64>,
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default = "default_bcs")]
        bcs: Vec<BoundaryConditionPair>,
        #[serde(default)]
        mellin: Option<MellinSpec>,
    },
    Solve {
        domain: DomainSpec,
        bc: BoundaryConditionPair,
        /// Singular function index; defaults to the leading one (0 for dn,
        /// 1 for nn and dd).
        #[serde(default)]
        k: Option<usize>,
    },
    Convergence {
        omega: f64,
        hs: Vec<f64>,
        #[serde(default = "default_gradings")]
        gradings: Vec<f64>,
        /// The fitted order uses this many finest meshes.
        #[serde(default = "default_fit_meshes")]
        fit_meshes: usize,
    },
    Dtn {
        domains: Vec<DomainSpec>,
        #[serde(default = "default_count")]
        modes: usize,
    },
    Taylor {
        #[serde(default)]
        hydrostatic: Option<HydrostaticSpec>,
        #[serde(default)]
        cascade: Option<CascadeSpec>,
    },
    Energy {
        #[serde(default)]
        run: Option<RunSpec>,
        #[serde(default = "default_true")]
        still_water: bool,
        /// Horizontal shift for the translation check.
        #[serde(default)]
        translation: Option<f64>,
        #[serde(default)]
        residual: Option<ResidualSpec>,
    },
    Simulate {
        run: RunSpec,
        #[serde(default)]
        dispersion: Option<DispersionSpec>,
    },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

fn decreasing(name: &str, hs: &[f64], min_len: usize) -> Result<()> {
    if hs.len() < min_len {
        return Err(Error::Config(format!("{name} needs at least {min_len} entries")));
    }
    for &h in hs {
        positive(name, h)?;
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!("{name} must be strictly decreasing")));
    }
    Ok(())
}

fn gamma_reference(lambda: f64) -> Option<f64> {
    // Gamma(m) = (m-1)!, Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
    let x = -lambda;
    if x <= 0.0 || x > 20.0 {
        return None;
    }
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    if x.fract() == 0.0 {
        Some(fact(x as u32 - 1))
    } else if (x - 0.5).fract() == 0.0 {
        let m = (x - 0.5) as u32;
        Some(fact(2 * m) * PI.sqrt() / (4f64.powi(m as i32) * fact(m)))
    } else {
        None
    }
}

impl ExperimentConfig {
    pub fn command(&self) -> &'static str {
        match self {
            ExperimentConfig::Exponents { .. } => "exponents",
            ExperimentConfig::Solve { .. } => "solve",
            ExperimentConfig::Convergence { .. } => "convergence",
            ExperimentConfig::Dtn { .. } => "dtn",
            ExperimentConfig::Taylor { .. } => "taylor",
            ExperimentConfig::Energy { .. } => "energy",
            ExperimentConfig::Simulate { .. } => "simulate",
        }
    }

    /// Schema checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Exponents { omegas, count, bcs, mellin } => {
                if omegas.is_empty() && mellin.is_none() {
                    return Err(Error::Config("exponents needs omegas or a mellin section".into()));
                }
                if !omegas.is_empty() && (*count == 0 || bcs.is_empty()) {
                    return Err(Error::Config("exponents needs count >= 1 and at least one bc".into()));
                }
                for &w in omegas {
                    if !(w > 0.0 && w < PI) {
                        return Err(Error::Config(format!("angle {w} outside (0, pi)")));
                    }
                }
                if let Some(m) = mellin {
                    for &l in &m.gamma_lambdas {
                        if gamma_reference(l).is_none() {
                            return Err(Error::Config(format!(
                                "gamma check needs a negative integer or half-integer lambda >= -20, got {l}"
                            )));
                        }
                    }
                    for b in &m.bumps {
                        positive("bump width", b.width)?;
                        if b.center.abs() > 4.0 || b.width > 1.0 || b.width < 0.2 {
                            return Err(Error::Config("bumps need |center| <= 4 and width in [0.2, 1]".into()));
                        }
                    }
                }
            }
            ExperimentConfig::Solve { domain, .. } => {
                if !matches!(domain, DomainSpec::Sector { .. }) {
                    return Err(Error::Config("solve runs on sector domains".into()));
                }
                domain.validate()?;
            }
            ExperimentConfig::Convergence { omega, hs, gradings, fit_meshes } => {
                if !(*omega > 0.0 && *omega < PI) {
                    return Err(Error::Config(format!("angle {omega} outside (0, pi)")));
                }
                decreasing("hs", hs, 3)?;
                if *fit_meshes < 2 || *fit_meshes > hs.len() {
                    return Err(Error::Config("fit_meshes must lie in [2, len(hs)]".into()));
                }
                if gradings.is_empty() || gradings.iter().any(|b| !(*b >= 1.0)) {
                    return Err(Error::Config("gradings must be >= 1".into()));
                }
            }
            ExperimentConfig::Dtn { domains, modes } => {
                if domains.is_empty() || *modes == 0 {
                    return Err(Error::Config("dtn needs domains and modes >= 1".into()));
                }
                for d in domains {
                    d.validate()?;
                    if matches!(d, DomainSpec::Sector { .. }) {
                        return Err(Error::Config("dtn runs on box and beach domains".into()));
                    }
                }
            }
            ExperimentConfig::Taylor { hydrostatic, cascade } => {
                if hydrostatic.is_none() && cascade.is_none() {
                    return Err(Error::Config("taylor needs a hydrostatic or cascade section".into()));
                }
                if let Some(s) = hydrostatic {
                    decreasing("hydrostatic.hs", &s.hs, 1)?;
                    positive("margin", s.margin)?;
                    positive("g", s.g)?;
                    if !(s.omega > 0.0 && s.omega < PI / 2.0) {
                        return Err(Error::Config(format!("beach angle {} outside (0, pi/2)", s.omega)));
                    }
                }
                if let Some(c) = cascade {
                    c.domain.validate()?;
                    if matches!(c.domain, DomainSpec::Sector { .. }) {
                        return Err(Error::Config("cascade runs on box and beach domains".into()));
                    }
                    if c.levels.len() < 2 {
                        return Err(Error::Config("cascade needs at least two levels".into()));
                    }
                    for [h, dt] in &c.levels {
                        positive("cascade h", *h)?;
                        positive("cascade dt", *dt)?;
                    }
                    positive("t_star", c.t_star)?;
                    for [_, dt] in &c.levels {
                        if c.t_star < 2.0 * dt {
                            return Err(Error::Config("t_star must cover at least two steps".into()));
                        }
                    }
                }
            }
            ExperimentConfig::Energy { run, residual, translation, still_water } => {
                if run.is_none() && residual.is_none() {
                    return Err(Error::Config("energy needs a run or residual section".into()));
                }
                if (*still_water || translation.is_some()) && run.is_none() {
                    return Err(Error::Config("still water and translation checks need a run section".into()));
                }
                if let Some(r) = run {
                    r.validate()?;
                }
                if let Some(r) = residual {
                    r.domain.validate()?;
                    decreasing("residual.hs", &r.hs, 2)?;
                    if r.hs[0] / r.hs[r.hs.len() - 1] < 4.0 - 1e-12 {
                        return Err(Error::Config("residual refinement must span at least a factor 4".into()));
                    }
                    positive("residual.dt", r.dt)?;
                    if r.samples < 3 {
                        return Err(Error::Config("residual needs at least 3 samples".into()));
                    }
                }
            }
            ExperimentConfig::Simulate { run, dispersion } => {
                run.validate()?;
                if let Some(d) = dispersion {
                    positive("periods", d.periods)?;
                    if d.mode == 0 {
                        return Err(Error::Config("dispersion mode must be >= 1".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if matches!(self.domain, DomainSpec::Sector { .. }) {
            return Err(Error::Config("dynamic runs need a box or beach domain".into()));
        }
        let kind = match self.domain {
            DomainSpec::Box { width, depth, .. } => DomainKind::Box { width, depth },
            DomainSpec::Beach { omega, half_width, .. } => DomainKind::Beach { omega, half_width, depth: 0.0 },
            DomainSpec::Sector { omega, radius, .. } => DomainKind::Sector { omega, radius },
        };
        self.sim.validate(&kind).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }

    fn simulation(&self) -> Result<(Simulation, CornerDomain)> {
        let d = self.domain.build()?;
        Ok((Simulation::new(&d, self.sim.clone())?, d))
    }
}

// ---------------------------------------------------------------- runners

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Validates and runs one experiment.
pub fn run(config: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome> {
    config.validate()?;
    match config {
        ExperimentConfig::Exponents { omegas, count, bcs, mellin } => {
            let mut out = exponents(omegas, *count, bcs, tol)?;
            if let Some(m) = mellin {
                let o = mellin_checks(m, tol)?;
                out.tables.extend(o.tables);
                out.checks.extend(o.checks);
            }
            Ok(out)
        }
        ExperimentConfig::Solve { domain, bc, k } => {
            let lead = if *bc == BoundaryConditionPair::DirichletNeumann { 0 } else { 1 };
            solve(domain, *bc, k.unwrap_or(lead))
        }
        ExperimentConfig::Convergence { omega, hs, gradings, fit_meshes } => convergence(*omega, hs, gradings, *fit_meshes, tol),
        ExperimentConfig::Dtn { domains, modes } => dtn(domains, *modes, tol),
        ExperimentConfig::Taylor { hydrostatic, cascade } => {
            let mut out = Outcome::default();
            if let Some(h) = hydrostatic {
                merge(&mut out, hydrostatics(h, tol)?);
            }
            if let Some(c) = cascade {
                merge(&mut out, cascade_study(c, tol)?);
            }
            Ok(out)
        }
        ExperimentConfig::Energy { run, still_water, translation, residual } => {
            let mut out = Outcome::default();
            if let Some(r) = run {
                merge(&mut out, energy_run(r, *still_water, *translation, tol)?);
            }
            if let Some(r) = residual {
                merge(&mut out, residual_study(r, tol)?);
            }
            Ok(out)
        }
        ExperimentConfig::Simulate { run, dispersion } => simulate(run, dispersion.as_ref(), tol),
    }
}

fn merge(out: &mut Outcome, o: Outcome) {
    out.tables.extend(o.tables);
    out.json.extend(o.json);
    out.checks.extend(o.checks);
    if out.halt.is_none() {
        out.halt = o.halt;
    }
}

/// Closed-form exponents against the roots of the pencil determinant.
pub fn exponents(omegas: &[f64], count: usize, bcs: &[BoundaryConditionPair], tol: &Tolerances) -> Result<Outcome> {
    let mut t = Table::new("exponents", &["bc", "omega", "k", "lambda_formula", "lambda_numeric", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for &bc in bcs {
        for &omega in omegas {
            let formula = singular_exponents(bc, omega, count)?;
            let hi = formula[count - 1] + 0.5 * PI / omega;
            let numeric = pencil_exponents_numeric(&OperatorPencil::euclidean(bc, omega), 0.0, hi)?;
            if numeric.len() < count {
                return Err(Error::RootFinding(format!(
                    "{} at omega {omega}: {} roots below {hi}, expected {count}",
                    bc.tag(),
                    numeric.len()
                )));
            }
            for k in 0..count {
                let d = (formula[k] - numeric[k]).abs();
                worst = worst.max(d);
                t.push(vec![bc.tag().into(), omega.into(), k.into(), formula[k].into(), numeric[k].into(), d.into()]);
            }
        }
    }
    let mut out = Outcome { tables: vec![t], ..Default::default() };
    if !omegas.is_empty() {
        out.checks.push(Check::below("exponent_agreement", worst, tol.exponent_agreement));
    }
    Ok(out)
}

/// Gamma values and bump roundtrips of the Mellin pair.
pub fn mellin_checks(spec: &MellinSpec, tol: &Tolerances) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut g = Table::new("mellin_gamma", &["lambda", "mellin", "gamma_reference", "rel_error"]);
    let exp_samples = RadialSamples::geometric(1e-24, 80.0, 6001, |r| (-r).exp())?;
    let mut worst_g: f64 = 0.0;
    for &l in &spec.gamma_lambdas {
        let m = mellin(&exp_samples, Complex64::new(l, 0.0))?;
        let r = gamma_reference(l).expect("validated");
        let e = (m - r).norm() / r;
        worst_g = worst_g.max(e);
        g.push(vec![l.into(), m.re.into(), r.into(), e.into()]);
    }
    let mut rt = Table::new("mellin_roundtrip", &["center", "width", "r", "u_exact", "u_roundtrip", "abs_error"]);
    let mut worst_rt: f64 = 0.0;
    for b in &spec.bumps {
        let u = |r: f64| (-((r.ln() - b.center) / b.width).powi(2)).exp();
        let s = RadialSamples::geometric((b.center - 8.0 * b.width).exp(), (b.center + 8.0 * b.width).exp(), 2001, u)?;
        let z_max = 12.0 / b.width;
        let transform = |lam: Complex64| mellin(&s, lam).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let rs: Vec<f64> = (0..=12).map(|j| (b.center + b.width * (-1.5 + 0.25 * j as f64)).exp()).collect();
        let inv = inverse_mellin(&transform, 0.0, &rs, z_max, 1200)?;
        for (r, v) in rs.iter().zip(&inv.values) {
            let e = (v - u(*r)).abs();
            worst_rt = worst_rt.max(if e.is_nan() { f64::INFINITY } else { e });
            rt.push(vec![b.center.into(), b.width.into(), (*r).into(), u(*r).into(), (*v).into(), e.into()]);
        }
    }
    if !spec.gamma_lambdas.is_empty() {
        out.checks.push(Check::below("mellin_gamma", worst_g, tol.mellin_gamma));
    }
    if !spec.bumps.is_empty() {
        out.checks.push(Check::below("mellin_roundtrip", worst_rt, tol.mellin_roundtrip));
    }
    out.tables.push(g);
    out.tables.push(rt);
    Ok(out)
}

/// Sector problem whose exact solution is the `k`-th singular function,
/// with the matching data imposed on the arc.
pub fn solve(domain: &DomainSpec, bc: BoundaryConditionPair, k: usize) -> Result<Outcome> {
    let DomainSpec::Sector { omega, .. } = *domain else {
        return Err(Error::Config("solve runs on sector domains".into()));
    };
    let d = domain.build()?;
    let mesh = &d.mesh;
    let sf = singular_function(bc, omega, k)?;
    let n = mesh.n_vertices();
    let u = match bc {
        BoundaryConditionPair::DirichletNeumann => {
            solve_mixed(&d, &BoundaryDataTriple::zeros(n).with_aux(mesh, |p| sf.value(p)))?
        }
        BoundaryConditionPair::DirichletDirichlet => {
            solve_dirichlet_dirichlet(&d, &BoundaryDataTriple::zeros(n).with_aux(mesh, |p| sf.value(p)))?
        }
        BoundaryConditionPair::NeumannNeumann => {
            // zero flux on both rays, exact values on the arc
            let values: Vec<f64> = mesh.vertices.iter().map(|&p| sf.value(p)).collect();
            DirichletProblem::new(mesh, mesh.mask(&mesh.aux_nodes))?.solve(&values, &vec![0.0; n])?
        }
    };
    let exact: Vec<f64> = mesh.vertices.iter().map(|&p| sf.value(p)).collect();
    let (l2, h1) = error_norms(mesh, &u,&|p| (sf.value(p), sf.gradient(p)), Vec2::ZERO);
    let mut t = Table::new("errors", &["bc", "omega", "k", "lambda", "h", "vertices", "l2_error", "h1_error"]);
    t.push(vec![bc.tag().into(), omega.into(), k.into(), sf.lambda.into(), mesh.h.into(), n.into(), l2.into(), h1.into()]);
    let field = json!({
        "vertices": mesh.vertices.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        "triangles": mesh.triangles,
        "u": u,
        "exact": exact,
    });
    Ok(Outcome { tables: vec![t], json: vec![("solution".into(), field)], ..Default::default() })
}

/// Observed H1 orders on the Dirichlet-Neumann sector for each grading,
/// checked against `min(1, beta pi / (2 omega))`.
pub fn convergence(omega: f64, hs: &[f64], gradings: &[f64], fit_meshes: usize, tol: &Tolerances) -> Result<Outcome> {
    let studies = par_map(gradings, |&b| sector_convergence_study(omega, hs, b));
    let mut t = Table::new("convergence", &["grading", "h", "vertices", "l2_error", "h1_error", "order_l2", "order_h1"]);
    let mut f = Table::new("convergence_fit", &["grading", "expected_order_h1", "fitted_order_h1", "meshes"]);
    let mut out = Outcome::default();
    let lambda = PI / (2.0 * omega);
    for (b, s) in gradings.iter().zip(studies) {
        let s = s?;
        let opt = |x: Option<f64>| x.map_or(Cell::Text(String::new()), Cell::Num);
        for r in &s.rows {
            t.push(vec![
                (*b).into(),
                r.h.into(),
                r.vertices.into(),
                r.l2_error.into(),
                r.h1_error.into(),
                opt(r.order_l2),
                opt(r.order_h1),
            ]);
        }
        let tail = &s.rows[s.rows.len() - fit_meshes..];
        let h: Vec<f64> = tail.iter().map(|r| r.h).collect();
        let e: Vec<f64> = tail.iter().map(|r| r.h1_error).collect();
        let fitted = fitted_slope(&h, &e);
        let expected = (b * lambda).min(1.0);
        f.push(vec![(*b).into(), expected.into(), fitted.into(), fit_meshes.into()]);
        out.checks.push(Check::at_most(format!("h1_order_grading_{b}"), (fitted - expected).abs(), tol.h1_order_window));
    }
    out.tables.push(t);
    out.tables.push(f);
    Ok(out)
}

/// Structure and low spectrum of the discrete DtN operator.
pub fn dtn(domains: &[DomainSpec], modes: usize, tol: &Tolerances) -> Result<Outcome> {
    let results = par_map(domains, |spec| -> Result<_> {
        let d = spec.build()?;
        let op = assemble_dtn(&d)?;
        let sp = op.spectrum()?;
        let ones = vec![1.0; op.len()];
        let kernel = op.apply(&ones).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((op.len(), op.self_adjointness_defect(), kernel, sp.values))
    });
    let mut s = Table::new("dtn_structure", &["domain", "h", "surface_nodes", "self_adjointness", "kernel", "spectrum_min"]);
    let mut e = Table::new("dtn_spectrum", &["domain", "h", "k", "lambda", "lambda_exact", "rel_error"]);
    let mut out = Outcome::default();
    for (spec, r) in domains.iter().zip(results) {
        let (n, sa, kernel, values) = r?;
        let label = spec.label();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        s.push(vec![label.clone().into(), spec.h().into(), n.into(), sa.into(), kernel.into(), min.into()]);
        let tag = format!("{label}@h={}", spec.h());
        out.checks.push(Check::below(format!("self_adjointness {tag}"), sa, tol.dtn_self_adjointness));
        out.checks.push(Check::below(format!("kernel {tag}"), kernel, tol.dtn_kernel));
        out.checks.push(Check::at_least(format!("spectrum_floor {tag}"), min, -tol.dtn_spectrum_floor));
        let mut worst: f64 = 0.0;
        for k in 1..=modes.min(values.len() - 1) {
            let exact = match spec {
                DomainSpec::Box { width, depth, .. } => Some(box_eigenvalue(k, *width, *depth)),
                _ => None,
            };
            let rel = exact.map(|x| (values[k] - x).abs() / x);
            e.push(vec![
                label.clone().into(),
                spec.h().into(),
                k.into(),
                values[k].into(),
                exact.map_or(Cell::Text(String::new()), Cell::Num),
                rel.map_or(Cell::Text(String::new()), Cell::Num),
            ]);
            if let Some(r) = rel {
                if k == 1 {
                    out.checks.push(Check::below(format!("first_eigenvalue {tag}"), r, tol.dtn_first_eigenvalue));
                }
                worst = worst.max(r);
            }
        }
        if matches!(spec, DomainSpec::Box { .. }) {
            out.checks.push(Check::below(format!("first_{modes}_eigenvalues {tag}"), worst, tol.dtn_first_five));
        }
    }
    out.tables.push(s);
    out.tables.push(e);
    Ok(out)
}

/// Fluid at rest on the beach: interior Taylor coefficient against `g`
/// and the contact-line value from the field solve against the corner
/// formula, per mesh size.
pub fn hydrostatics(spec: &HydrostaticSpec, tol: &Tolerances) -> Result<Outcome> {
    let opts = BeachOptions { half_width: spec.half_width, ..Default::default() };
    let rows = par_map(&spec.hs, |&h| -> Result<_> {
        let d = build_beach(spec.omega, &spec.profile, h, &opts)?;
        let v = VelocityField::zero(d.mesh.n_vertices());
        let solver = HydroSolver::new(d)?;
        let state = solver.pressure(&v, spec.g)?;
        let corners = solver.corner_comparison(&v, &state, spec.g)?;
        let pts = solver.domain.mesh.surface_points();
        let (l, r) = (pts[0], pts[pts.len() - 1]);
        let interior = pts
            .iter()
            .zip(&state.a)
            .filter(|(p, _)| (**p - l).norm() >= spec.margin && (**p - r).norm() >= spec.margin)
            .fold(0.0f64, |m, (_, a)| m.max((a - spec.g).abs() / spec.g));
        Ok((solver.domain.mesh.n_vertices(), interior, corners))
    });
    let mut t = Table::new(
        "hydrostatic",
        &["h", "vertices", "interior_rel_error", "left_field", "left_formula", "right_field", "right_formula", "corner_rel_error"],
    );
    let mut out = Outcome::default();
    let flat = spec.profile == SurfaceProfile::Flat;
    let mut corner_errors = Vec::new();
    for (&h, r) in spec.hs.iter().zip(rows) {
        let (n, interior, c) = r?;
        if c.len() != 2 {
            return Err(Error::Solver(format!("expected two contact points, found {}", c.len())));
        }
        let ce = c.iter().map(|c| (c.field - c.formula).abs() / c.formula.abs()).fold(0.0, f64::max);
        corner_errors.push(ce);
        t.push(vec![
            h.into(),
            n.into(),
            interior.into(),
            c[0].field.into(),
            c[0].formula.into(),
            c[1].field.into(),
            c[1].formula.into(),
            ce.into(),
        ]);
        if flat {
            out.checks.push(Check::below(format!("hydrostatic_interior h={h}"), interior, tol.hydrostatic_interior));
        }
        out.checks.push(Check::below(format!("corner_agreement h={h}"), ce, tol.corner_agreement));
    }
    // finest against coarsest; roundoff-level agreement counts as converged
    if spec.hs.len() > 1 {
        let (first, last) = (corner_errors[0], corner_errors[corner_errors.len() - 1]);
        let name = format!("corner_refinement h={}->{}", spec.hs[0], spec.hs[spec.hs.len() - 1]);
        out.checks.push(Check::at_most(name, last, first.max(1e-10)));
    }
    out.tables.push(t);
    Ok(out)
}

/// Relative L2(S) distance between the cascade `D_t a` and the centered
/// material difference of `a`, both at `t_star`, for one mesh level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CascadeLevel {
    pub h: f64,
    pub dt: f64,
    pub t: f64,
    pub rel_error: f64,
    pub rel_error_alternative: f64,
    pub dt_a_norm: f64,
    pub a_min: f64,
}

pub fn cascade_level(spec: &CascadeSpec, h: f64, dt: f64) -> Result<CascadeLevel> {
    let d = spec.domain.with_h(h).build()?;
    let cfg = SimulationConfig { dt, t_end: spec.t_star, g: spec.g, save_every: 0, energy: false, ..Default::default() };
    let sim = Simulation::new(&d, cfg)?;
    let eta = spec.eta.sample(&d.surface.reference)?;
    let (mut s, mut ev) = sim.at_rest(eta)?;
    let n = ((spec.t_star / dt).round() as usize).saturating_sub(1);
    for _ in 0..n {
        (s, ev) = sim.step_with(&s, &ev, dt)?;
    }
    let d0 = sim.diagnostics(s.t, &ev)?;
    let (s1, ev1) = sim.step_with(&s, &ev, dt)?;
    let d1 = sim.diagnostics(s1.t, &ev1)?;
    let (s2, ev2) = sim.step_with(&s1, &ev1, dt)?;
    let d2 = sim.diagnostics(s2.t, &ev2)?;
    let fd = material_derivative(&d0.snapshot, &d1.snapshot, &d2.snapshot);
    let pts = &d1.snapshot.points;
    let norm = |f: &[f64]| fem::path_inner(pts, f, f).sqrt();
    let diff = |g: &[f64]| -> Vec<f64> { fd.iter().zip(g).map(|(a, b)| a - b).collect() };
    let scale = norm(&fd);
    Ok(CascadeLevel {
        h,
        dt,
        t: s1.t,
        rel_error: norm(&diff(&d1.snapshot.dt_a)) / scale,
        rel_error_alternative: norm(&diff(&d1.cascade.dt_a_alternative)) / scale,
        dt_a_norm: scale,
        a_min: d1.pressure.a_min,
    })
}

pub fn cascade_study(spec: &CascadeSpec, tol: &Tolerances) -> Result<Outcome> {
    let levels = par_map(&spec.levels, |&[h, dt]| cascade_level(spec, h, dt));
    let mut t = Table::new("cascade", &["h", "dt", "t", "rel_error", "rel_error_alternative", "dt_a_norm", "a_min"]);
    let mut errs = Vec::new();
    for l in levels {
        let l = l?;
        errs.push(l.rel_error);
        t.push(vec![l.h.into(), l.dt.into(), l.t.into(), l.rel_error.into(), l.rel_error_alternative.into(), l.dt_a_norm.into(), l.a_min.into()]);
    }
    let mut out = Outcome::default();
    let label = spec.domain.label();
    if spec.threshold {
        out.checks.push(Check::below(format!("cascade_error {label} finest"), errs[errs.len() - 1], tol.cascade_error));
    }
    for (k, w) in errs.windows(2).enumerate() {
        out.checks.push(Check::below(format!("cascade_refinement {label} level {}->{}", k, k + 1), w[1], w[0]));
    }
    out.tables.push(t);
    Ok(out)
}

/// Quasilinear residual `|| D_t^2 a + a N a ||_{H^{s-3/2}}` on consecutive
/// states after `steps_before` steps, for each mesh size at fixed `dt`.
pub fn residual_study(spec: &ResidualSpec, tol: &Tolerances) -> Result<Outcome> {
    let rows = par_map(&spec.hs, |&h| -> Result<Vec<crate::energy::ResidualSample>> {
        let d = spec.domain.with_h(h).build()?;
        let cfg = SimulationConfig { dt: spec.dt, save_every: 0, energy: false, ..spec.sim.clone() };
        let sim = Simulation::new(&d, cfg)?;
        let (mut s, mut ev) = sim.at_rest(spec.eta.sample(&d.surface.reference)?)?;
        for _ in 0..spec.steps_before {
            (s, ev) = sim.step_with(&s, &ev, spec.dt)?;
        }
        let mut snaps = Vec::new();
        let mut ops = Vec::new();
        for j in 0..spec.samples {
            snaps.push(sim.diagnostics(s.t, &ev)?.snapshot);
            ops.push(sim.dtn(&ev)?);
            if j + 1 < spec.samples {
                (s, ev) = sim.step_with(&s, &ev, spec.dt)?;
            }
        }
        crate::energy::residual_series(&snaps, &ops, spec.sim.s)
    });
    let mut t = Table::new("residual", &["h", "t", "residual_norm", "principal_norm"]);
    let mut peaks = Vec::new();
    for (&h, r) in spec.hs.iter().zip(rows) {
        let r = r?;
        let peak = r.iter().map(|x| x.residual_norm).fold(0.0, f64::max);
        peaks.push(peak);
        for x in &r {
            t.push(vec![h.into(), x.t.into(), x.residual_norm.into(), x.principal_norm.into()]);
        }
    }
    let growth = peaks.iter().skip(1).fold(0.0f64, |m, p| m.max(p / peaks[0]));
    let mut out = Outcome { tables: vec![t], ..Default::default() };
    out.checks.push(Check::at_most("residual_growth", growth, tol.residual_growth));
    Ok(out)
}

fn energy_table(res: &RunResult, tol: &Tolerances) -> Table {
    let mut t = Table::new(
        "energy",
        &[
            "t",
            "e1",
            "e2",
            "e3",
            "energy",
            "a_min",
            "omega_left",
            "omega_right",
            "neighborhood_distance",
            "residual_norm",
            "tolerance",
        ],
    );
    for e in &res.energy {
        let resid = res.residual.iter().find(|r| (r.t - e.t).abs() < 1e-12).map_or(Cell::Text(String::new()), |r| Cell::Num(r.residual_norm));
        t.push(vec![
            e.t.into(),
            e.e1.into(),
            e.e2.into(),
            e.e3.into(),
            e.total.into(),
            e.a_min.into(),
            e.omega_left.into(),
            e.omega_right.into(),
            e.neighborhood_distance.into(),
            resid,
            tol.still_water_energy.into(),
        ]);
    }
    t
}

fn gronwall_outcome(out: &mut Outcome, res: &RunResult) {
    out.halt.clone_from(&res.halt);
    if let Some(g) = &res.gronwall {
        out.json.push(("gronwall".into(), serde_json::to_value(g).expect("serializable")));
        out.checks.push(Check { name: "gronwall".into(), value: g.degree as f64, limit: crate::energy::GRONWALL_MAX_DEGREE as f64, passed: g.passed });
    }
}

/// Energy along a monitored run, plus the still-water and translation checks.
pub fn energy_run(spec: &RunSpec, still_water: bool, translation: Option<f64>, tol: &Tolerances) -> Result<Outcome> {
    let d = spec.domain.build()?;
    let cfg = SimulationConfig { energy: true, save_every: spec.sim.save_every.max(1), ..spec.sim.clone() };
    let sim = Simulation::new(&d, cfg)?;
    let r = &d.surface.reference;
    let eta = spec.eta.sample(r)?;
    let psi = spec.psi.sample(r)?;
    let mut out = Outcome::default();
    if still_water {
        let (s, ev) = sim.at_rest(vec![0.0; eta.len()])?;
        let dg = sim.diagnostics(0.0, &ev)?;
        let e = sim.energy(0.0, &s, &ev, &dg)?;
        let worst = [e.e1, e.e2, e.e3].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        out.checks.push(Check::below("still_water_energy", worst, tol.still_water_energy));
        out.json.push(("still_water".into(), serde_json::to_value(&e).expect("serializable")));
    }
    if let Some(dx) = translation {
        let at = |sim: &Simulation| -> Result<f64> {
            let (s, ev) = sim.initial(eta.clone(), psi.clone(), None)?;
            let dg = sim.diagnostics(0.0, &ev)?;
            Ok(sim.energy(0.0, &s, &ev, &dg)?.total)
        };
        let e0 = at(&sim)?;
        let moved = Simulation::new(&d.translated(dx)?, sim.config.clone())?;
        let e1 = at(&moved)?;
        let rel = (e1 - e0).abs() / e0.abs().max(f64::MIN_POSITIVE);
        out.checks.push(Check::below("translation", rel, tol.translation));
        out.json.push(("translation".into(), json!({ "shift": dx, "energy": e0, "energy_translated": e1 })));
    }
    let res = sim.run(sim.initial(eta, psi, None)?);
    out.tables.push(energy_table(&res, tol));
    gronwall_outcome(&mut out, &res);
    Ok(out)
}

/// Time-stepped run with conservation checks and, optionally, the
/// linear dispersion check against `sqrt(g lambda_k)`.
pub fn simulate(spec: &RunSpec, dispersion: Option<&DispersionSpec>, tol: &Tolerances) -> Result<Outcome> {
    let (mut sim, d) = spec.simulation()?;
    let r = &d.surface.reference;
    let eta = spec.eta.sample(r)?;
    let psi = spec.psi.sample(r)?;
    let g = sim.config.g;
    let mut out = Outcome::default();
    let mut fit = None;
    if let Some(ds) = dispersion {
        let sp = assemble_dtn(&d)?.spectrum()?;
        if ds.mode >= sp.len() {
            return Err(Error::Config(format!("mode {} beyond the {} surface modes", ds.mode, sp.len())));
        }
        let omega0 = (g * sp.values[ds.mode]).sqrt();
        sim.config.t_end = ds.periods * 2.0 * PI / omega0;
        fit = Some((ds.mode, omega0, sp));
    }
    let rest = sim.at_rest(vec![0.0; eta.len()])?.1.physical_energy(g);
    let init = sim.initial(eta, psi, None)?;
    let excitation = init.1.physical_energy(g) - rest;
    let res = sim.run(init);
    let mut trace = Table::new("trace", &["t", "energy", "area", "eta_max", "mode_amplitude"]);
    let amplitudes: Vec<f64> = match &fit {
        Some((k, _, sp)) => res.trace.iter().map(|(_, e)| sp.coefficients(e)[*k]).collect(),
        None => vec![f64::NAN; res.trace.len()],
    };
    for (((t, e), (_, en, ar)), amp) in res.trace.iter().zip(&res.invariants).zip(&amplitudes) {
        let m = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        trace.push(vec![(*t).into(), (*en).into(), (*ar).into(), m.into(), (*amp).into()]);
    }
    out.tables.push(trace);
    if sim.config.energy {
        out.tables.push(energy_table(&res, tol));
    }
    // drift relative to the excitation; still water falls back to the rest energy
    let reference = if excitation.abs() > 1e-12 * rest.abs() { excitation } else { rest };
    out.checks.push(Check::below("energy_drift", res.energy_drift(reference), tol.energy_drift));
    out.checks.push(Check::below("area_drift", res.area_drift(), tol.area_drift));
    out.checks.push(Check::below("vorticity", res.vorticity_sup, tol.vorticity));
    if let Some((k, omega0, _)) = &fit {
        let t: Vec<f64> = res.trace.iter().map(|x| x.0).collect();
        let w = dominant_frequency(&t, &amplitudes, *omega0);
        let rel = (w - omega0).abs() / omega0;
        out.checks.push(Check::below(format!("dispersion mode {k}"), rel, tol.dispersion));
        out.json.push(("dispersion".into(), json!({ "mode": k, "omega_linear": omega0, "omega_fit": w, "rel_error": rel })));
    }
    out.json.push((
        "run".into(),
        json!({
            "halt": res.halt,
            "monitor_log": res.monitor_log,
            "excitation_energy": excitation,
            "energy_drift": res.energy_drift(reference),
            "area_drift": res.area_drift(),
            "vorticity_sup": res.vorticity_sup,
        }),
    ));
    if let Some(last) = res.states.last() {
        out.json.push(("final_state".into(), serde_json::to_value(last).expect("serializable")));
    }
    gronwall_outcome(&mut out, &res);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_closed_forms() {
        assert_eq!(gamma_reference(-1.0), Some(1.0));
        assert_eq!(gamma_reference(-4.0), Some(6.0));
        assert!((gamma_reference(-0.5).unwrap() - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_reference(-1.5).unwrap() - 0.5 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_reference(0.5), None);
        assert_eq!(gamma_reference(-0.3), None);
    }

    #[test]
    fn csv_formatting() {
        let mut t = Table::new("x", &["a", "b", "c"]);
        t.push(vec![0.1.into(), 3usize.into(), "p,q".into()]);
        assert_eq!(t.to_csv(), "a,b,c\n1.0000000000000001e-1,3,\"p,q\"\n");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn tolerance_overrides_are_partial_and_strict() {
        let t = Tolerances::from_json(r#"{"dispersion": 0.1}"#).unwrap();
        assert_eq!(t.dispersion, 0.1);
        assert_eq!(t.cascade_error, Tolerances::default().cascade_error);
        assert!(Tolerances::from_json(r#"{"dispersoin": 0.1}"#).is_err());
        assert!(Tolerances::from_json(r#"{"dispersion": -1}"#).is_err());
    }

    #[test]
    fn schema_rejections() {
        let bad = ExperimentConfig::Convergence { omega: 2.0, hs: vec![0.1, 0.2, 0.05], gradings: vec![1.0], fit_meshes: 2 };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ExperimentConfig::Exponents { omegas: vec![4.0], count: 3, bcs: default_bcs(), mellin: None };
        assert!(bad.validate().is_err());
        let beach = RunSpec {
            domain: DomainSpec::Beach { omega: PI / 5.0, half_width: 1.0, h: 0.1, profile: SurfaceProfile::Flat },
            eta: SurfaceProfile::Flat,
            psi: SurfaceProfile::Flat,
            sim: SimulationConfig { s: 1.9, ..Default::default() },
        };
        assert!(ExperimentConfig::Simulate { run: beach, dispersion: None }.validate().is_err());
    }

    #[test]
    fn exponents_example_rows() {
        let o = exponents(&[PI / 4.0], 3, &[BoundaryConditionPair::DirichletNeumann], &Tolerances::default()).unwrap();
        let f = o.tables[0].column("lambda_formula").unwrap();
        for (x, e) in f.iter().zip([2.0, 6.0, 10.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!(o.passed());
    }
}
