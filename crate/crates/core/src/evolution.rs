//! Free-surface Euler time stepper in potential form: the surface graph
//! `eta` over the reference curve and the surface trace `psi` of the
//! velocity potential advance by explicit midpoint steps; each stage
//! rebuilds the moving mesh and solves the harmonic extension.

use crate::dtn::{assemble_dtn, DtnOperator, SpectralDecomposition};
use crate::energy::{assemble_energy, gronwall_check, residual_series, EnergyReport, GronwallFit, ResidualSample, SurfaceSnapshot};
use crate::error::{Error, Result};
use crate::geometry::{AngleBounds, CornerDomain, Deformer, DomainKind, SurfaceGraph};
use crate::hydro::{Cascade, HydroSolver, PressureState, VelocityField, VorticityField};
use crate::sector_analysis::validate_config;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Hypotheses monitored along a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorBounds {
    /// Lower bound on the Taylor coefficient.
    pub a0: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Collar half-width for `eta`.
    pub delta: f64,
}

impl Default for MonitorBounds {
    fn default() -> Self {
        let b = AngleBounds::default();
        MonitorBounds { a0: 1.0, omega_min: b.min, omega_max: std::f64::consts::PI / 5.0, delta: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub g: f64,
    pub s: f64,
    pub monitors: MonitorBounds,
    /// Steps between rebuilds of the mesh connectivity; the moving mesh is
    /// regenerated from the reference every stage, so this only schedules
    /// the consistency check of the reference mesh.
    pub remesh_every: usize,
    /// Steps between saved states and energy evaluations (0 disables).
    pub save_every: usize,
    /// Evaluate the energy at saved states.
    pub energy: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 1e-3,
            t_end: 1.0,
            g: 9.81,
            s: 2.5,
            monitors: MonitorBounds::default(),
            remesh_every: 10,
            save_every: 10,
            energy: true,
        }
    }
}

/// Surface-gravity-wave step bound `0.25 sqrt(h / g)`.
pub fn cfl_limit(h: f64, g: f64) -> f64 {
    0.25 * (h / g).sqrt()
}

impl SimulationConfig {
    /// Checks the step and monitors, and the Sobolev index against the
    /// largest admissible contact angle on domains with sloping contacts.
    pub fn validate(&self, kind: &DomainKind) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.g >= 0.0) {
            return Err(Error::Config("t_end and g must be nonnegative".into()));
        }
        if !(self.monitors.a0 > 0.0) {
            return Err(Error::Config(format!("a0 must be positive, got {}", self.monitors.a0)));
        }
        if !(self.monitors.omega_min < self.monitors.omega_max && self.monitors.delta > 0.0) {
            return Err(Error::Config("monitor bounds are inconsistent".into()));
        }
        if let DomainKind::Beach { .. } | DomainKind::Sector { .. } = kind {
            let r = validate_config(self.s, self.monitors.omega_max, 2);
            if !r.valid {
                return Err(Error::Config(r.message));
            }
        } else {
            log::info!("box basin: vertical walls lie outside the sloping-contact hypotheses; only monitors apply");
        }
        Ok(())
    }
}

/// Eulerian snapshot of the flow.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub eta: Vec<f64>,
    /// Surface trace of the velocity potential.
    pub psi: Vec<f64>,
    /// Velocity on the surface nodes.
    pub surface_velocity: Vec<Vec2>,
    /// Full velocity field, filled at saved states.
    pub v: Option<VelocityField>,
    pub mu: VorticityField,
}

impl FlowState {
    pub fn surface(&self, reference: &SurfaceGraph) -> SurfaceGraph {
        reference.reference.graph(self.eta.clone())
    }
}

/// Fields derived from `(eta, psi)` at one instant.
pub struct Evaluation {
    pub hydro: HydroSolver,
    pub phi: Vec<f64>,
    pub surface_velocity: Vec<Vec2>,
    pub eta_rate: Vec<f64>,
    pub psi_rate: Vec<f64>,
    velocity: std::cell::OnceCell<VelocityField>,
}

impl Evaluation {
    /// Velocity at every vertex (recovered in the interior).
    pub fn velocity(&self) -> &VelocityField {
        self.velocity.get_or_init(|| self.hydro.potential_velocity(&self.phi).expect("potential velocity"))
    }

    pub fn domain(&self) -> &CornerDomain {
        &self.hydro.domain
    }

    /// Energy `int |v|^2 / 2 + g int y`, with the kinetic part `phi^T K phi / 2`.
    pub fn physical_energy(&self, g: f64) -> f64 {
        let kphi = self.hydro.problem.k.matvec(&self.phi);
        0.5 * crate::fem::sparse::dot(&kphi, &self.phi) + g * self.domain().mesh.moment_y()
    }

    pub fn area(&self) -> f64 {
        self.domain().mesh.area()
    }
}

/// Pressure, cascade and surface data at one instant.
pub struct Diagnostics {
    pub pressure: PressureState,
    pub cascade: Cascade,
    pub snapshot: SurfaceSnapshot,
}

/// One run's outputs; `halt` carries the monitor or solver failure that
/// stopped it early.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub states: Vec<FlowState>,
    /// Surface elevation after every step.
    pub trace: Vec<(f64, Vec<f64>)>,
    pub energy: Vec<EnergyReport>,
    /// `(t, physical energy, area)` at every step.
    pub invariants: Vec<(f64, f64, f64)>,
    pub monitor_log: Vec<String>,
    pub halt: Option<String>,
    pub gronwall: Option<GronwallFit>,
    pub vorticity_sup: f64,
    /// Quasilinear residual on consecutive saved states (energy runs only).
    pub residual: Vec<ResidualSample>,
}

pub struct Simulation {
    pub deformer: Deformer,
    pub config: SimulationConfig,
    reference: SurfaceGraph,
}

impl Simulation {
    pub fn new(domain: &CornerDomain, config: SimulationConfig) -> Result<Self> {
        config.validate(&domain.kind)?;
        let h = domain.mesh.h;
        if config.dt > cfl_limit(h, config.g.max(1e-12)) {
            log::warn!("dt {} exceeds the gravity-wave bound {}", config.dt, cfl_limit(h, config.g));
        }
        Ok(Simulation { deformer: Deformer::new(domain)?, config, reference: domain.surface.clone() })
    }

    pub fn reference_domain(&self) -> &CornerDomain {
        self.deformer.reference()
    }

    /// State with surface `eta`, potential trace `psi` and vorticity `mu`.
    /// Nonzero vorticity cannot be represented by the potential form.
    pub fn initial(&self, eta: Vec<f64>, psi: Vec<f64>, mu: Option<Vec<f64>>) -> Result<(FlowState, Evaluation)> {
        if let Some(m) = &mu {
            if m.iter().any(|x| *x != 0.0) {
                return Err(Error::Rotational);
            }
        }
        let ev = self.evaluate(&eta, &psi)?;
        let n = ev.domain().mesh.n_vertices();
        let state = FlowState {
            t: 0.0,
            eta,
            psi,
            surface_velocity: ev.surface_velocity.clone(),
            v: Some(ev.velocity().clone()),
            mu: VorticityField { mu: vec![0.0; n] },
        };
        Ok((state, ev))
    }

    pub fn at_rest(&self, eta: Vec<f64>) -> Result<(FlowState, Evaluation)> {
        let n = eta.len();
        self.initial(eta, vec![0.0; n], None)
    }

    /// Harmonic extension of `psi` on the mesh of `eta` and the evolution
    /// rates of the surface variables.
    pub fn evaluate(&self, eta: &[f64], psi: &[f64]) -> Result<Evaluation> {
        let g = self.config.g;
        let surface = self.reference.reference.graph(eta.to_vec());
        surface.check_collar(self.config.monitors.delta)?;
        let domain = self.deformer.domain(&surface)?;
        let hydro = HydroSolver::new(domain)?;
        let mesh = &hydro.domain.mesh;
        let mut values = vec![0.0; mesh.n_vertices()];
        for (k, &i) in mesh.surface_nodes.iter().enumerate() {
            values[i] = psi[k];
        }
        let phi = hydro.problem.solve(&values, &vec![0.0; mesh.n_vertices()])?;
        let surface_velocity = hydro.surface_velocity(&phi);
        let normals = &hydro.domain.surface_normals;
        let mut eta_rate = Vec::with_capacity(psi.len());
        let mut psi_rate = Vec::with_capacity(psi.len());
        for (k, &i) in mesh.surface_nodes.iter().enumerate() {
            let vel = surface_velocity[k];
            let d = surface.reference.d_eta(k, eta[k]);
            let rate = vel.dot(normals[k]) / d.dot(normals[k]);
            let w = d * rate;
            eta_rate.push(rate);
            psi_rate.push(-0.5 * vel.norm2() - g * mesh.vertices[i].y + w.dot(vel));
        }
        Ok(Evaluation { hydro, phi, surface_velocity, eta_rate, psi_rate, velocity: std::cell::OnceCell::new() })
    }

    /// Explicit midpoint step from `state` whose evaluation is `ev`.
    pub fn step_with(&self, state: &FlowState, ev: &Evaluation, dt: f64) -> Result<(FlowState, Evaluation)> {
        if dt == 0.0 {
            let again = self.evaluate(&state.eta, &state.psi)?;
            return Ok((state.clone(), again));
        }
        let half = |x: &[f64], r: &[f64], h: f64| -> Vec<f64> { x.iter().zip(r).map(|(a, b)| a + h * b).collect() };
        let eta_m = half(&state.eta, &ev.eta_rate, 0.5 * dt);
        let psi_m = half(&state.psi, &ev.psi_rate, 0.5 * dt);
        let mid = self.evaluate(&eta_m, &psi_m)?;
        let eta = half(&state.eta, &mid.eta_rate, dt);
        let psi = half(&state.psi, &mid.psi_rate, dt);
        let next = self.evaluate(&eta, &psi)?;
        let mu = if state.mu.mu.iter().all(|x| *x == 0.0) {
            state.mu.clone()
        } else {
            crate::hydro::vorticity_step(ev.hydro.recovery(), &next.domain().mesh, &state.mu, mid.velocity(), dt)
        };
        let st = FlowState { t: state.t + dt, eta, psi, surface_velocity: next.surface_velocity.clone(), v: None, mu };
        Ok((st, next))
    }

    pub fn step(&self, state: &FlowState) -> Result<FlowState> {
        let ev = self.evaluate(&state.eta, &state.psi)?;
        Ok(self.step_with(state, &ev, self.config.dt)?.0)
    }

    /// Pressure, cascade and the surface snapshot at an evaluated state.
    pub fn diagnostics(&self, t: f64, ev: &Evaluation) -> Result<Diagnostics> {
        let g = self.config.g;
        let pressure = ev.hydro.pressure(ev.velocity(), g)?;
        let cascade = ev.hydro.cascade(ev.velocity(), &pressure, g)?;
        let mesh = &ev.domain().mesh;
        let normals = ev.domain().surface_normals.clone();
        let velocity = ev.surface_velocity.clone();
        let acceleration: Vec<Vec2> =
            normals.iter().zip(&pressure.a).map(|(n, a)| *n * *a - Vec2::new(0.0, g)).collect();
        let snapshot = SurfaceSnapshot {
            t,
            points: mesh.surface_points(),
            normals,
            velocity,
            acceleration,
            a: pressure.a.clone(),
            dt_a: cascade.dt_a.clone(),
        };
        Ok(Diagnostics { pressure, cascade, snapshot })
    }

    /// DtN operator and spectrum at an evaluated state.
    pub fn dtn(&self, ev: &Evaluation) -> Result<(DtnOperator, SpectralDecomposition)> {
        let op = assemble_dtn(ev.domain())?;
        let sp = op.spectrum()?;
        Ok((op, sp))
    }

    pub fn energy(&self, t: f64, state: &FlowState, ev: &Evaluation, diag: &Diagnostics) -> Result<EnergyReport> {
        let (_, sp) = self.dtn(ev)?;
        self.energy_with(t, state, ev, diag, &sp)
    }

    /// Energy with a precomputed DtN spectrum of the current domain.
    pub fn energy_with(
        &self,
        t: f64,
        state: &FlowState,
        ev: &Evaluation,
        diag: &Diagnostics,
        sp: &SpectralDecomposition,
    ) -> Result<EnergyReport> {
        let surface = self.reference.reference.graph(state.eta.clone());
        assemble_energy(t, ev.domain(), &surface, sp, &diag.pressure, &diag.cascade, &state.mu.mu, self.config.s)
    }

    fn check_monitors(&self, ev: &Evaluation, diag: &Diagnostics, t: f64) -> Result<()> {
        let m = &self.config.monitors;
        if diag.pressure.a_min < m.a0 {
            return Err(Error::Monitor { time: t, reason: format!("a_min {} below a0 {}", diag.pressure.a_min, m.a0) });
        }
        if let DomainKind::Beach { .. } = ev.domain().kind {
            let b = AngleBounds { min: m.omega_min, max: m.omega_max };
            if let Err(e) = ev.domain().check_angles(&b) {
                return Err(Error::Monitor { time: t, reason: e.to_string() });
            }
        }
        Ok(())
    }

    /// Runs to `t_end`; failures stop the run and are recorded in `halt`.
    pub fn run(&self, initial: (FlowState, Evaluation)) -> RunResult {
        let cfg = &self.config;
        let steps = (cfg.t_end / cfg.dt).round() as usize;
        let (mut state, mut ev) = initial;
        let mut out = RunResult {
            states: Vec::new(),
            trace: vec![(0.0, state.eta.clone())],
            energy: Vec::new(),
            invariants: vec![(0.0, ev.physical_energy(cfg.g), ev.area())],
            monitor_log: Vec::new(),
            halt: None,
            gronwall: None,
            vorticity_sup: state.mu.sup_norm(),
            residual: Vec::new(),
        };
        let mut snapshots = Vec::new();
        let mut operators = Vec::new();
        for n in 0..=steps {
            if cfg.save_every > 0 && n % cfg.save_every == 0 {
                match self.diagnostics(state.t, &ev).and_then(|d| {
                    self.check_monitors(&ev, &d, state.t)?;
                    if cfg.energy {
                        let op = self.dtn(&ev)?;
                        out.energy.push(self.energy_with(state.t, &state, &ev, &d, &op.1)?);
                        snapshots.push(d.snapshot);
                        operators.push(op);
                    }
                    Ok(())
                }) {
                    Ok(()) => {
                        let mut saved = state.clone();
                        saved.v = Some(ev.velocity().clone());
                        out.states.push(saved);
                    }
                    Err(e) => {
                        out.monitor_log.push(format!("t={}: {e}", state.t));
                        out.halt = Some(e.to_string());
                        break;
                    }
                }
            }
            if n == steps {
                break;
            }
            if cfg.remesh_every > 0 && n % cfg.remesh_every == 0 {
                if let Err(e) = ev.domain().mesh.validate() {
                    out.halt = Some(e.to_string());
                    break;
                }
            }
            match self.step_with(&state, &ev, cfg.dt) {
                Ok((s, e)) => {
                    state = s;
                    ev = e;
                    out.invariants.push((state.t, ev.physical_energy(cfg.g), ev.area()));
                    out.trace.push((state.t, state.eta.clone()));
                    out.vorticity_sup = out.vorticity_sup.max(state.mu.sup_norm());
                }
                Err(e) => {
                    out.monitor_log.push(format!("t={}: {e}", state.t));
                    out.halt = Some(e.to_string());
                    break;
                }
            }
        }
        if cfg.energy && !out.energy.is_empty() {
            let t: Vec<f64> = out.energy.iter().map(|r| r.t).collect();
            let e: Vec<f64> = out.energy.iter().map(|r| r.total).collect();
            out.gronwall = Some(gronwall_check(&t, &e, None, out.halt.as_deref()));
        }
        if snapshots.len() >= 3 {
            out.residual = residual_series(&snapshots, &operators, cfg.s).unwrap_or_default();
        }
        out
    }
}

impl RunResult {
    /// Largest change of the physical energy relative to `reference`.
    pub fn energy_drift(&self, reference: f64) -> f64 {
        let e0 = self.invariants[0].1;
        self.invariants.iter().map(|(_, e, _)| (e - e0).abs()).fold(0.0, f64::max) / reference.abs()
    }

    /// Largest relative change of the fluid area.
    pub fn area_drift(&self) -> f64 {
        let a0 = self.invariants[0].2;
        self.invariants.iter().map(|(_, _, a)| (a - a0).abs()).fold(0.0, f64::max) / a0
    }
}

/// Frequency of the best fit `A cos(w t) + B sin(w t) + C` to a signal,
/// searched by golden section around the initial guess `w0`.
pub fn dominant_frequency(t: &[f64], y: &[f64], w0: f64) -> f64 {
    let residual = |w: f64| -> f64 {
        // 3x3 normal equations of the linear fit
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for (ti, yi) in t.iter().zip(y) {
            let f = [(w * ti).cos(), (w * ti).sin(), 1.0];
            for i in 0..3 {
                b[i] += f[i] * yi;
                for j in 0..3 {
                    a[i][j] += f[i] * f[j];
                }
            }
        }
        let m = solve3(a, b);
        t.iter()
            .zip(y)
            .map(|(ti, yi)| {
                let r = yi - m[0] * (w * ti).cos() - m[1] * (w * ti).sin() - m[2];
                r * r
            })
            .sum()
    };
    // coarse scan then golden section
    let (lo, hi) = (0.5 * w0, 1.5 * w0);
    let mut best = lo;
    let mut best_r = f64::INFINITY;
    for k in 0..=200 {
        let w = lo + (hi - lo) * k as f64 / 200.0;
        let r = residual(w);
        if r < best_r {
            best_r = r;
            best = w;
        }
    }
    let step = (hi - lo) / 200.0;
    let (mut a, mut b) = (best - step, best + step);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        if residual(c) < residual(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][k] = b[i];
        }
        *xk = det(m) / d;
    }
    x
}

/// Mode-1 coefficient of a surface displacement on the box: the
/// mass-weighted projection onto `cos(pi (x - x_left) / width)`.
pub fn mode_amplitude(points: &[Vec2], eta: &[f64], k: usize) -> f64 {
    let x0 = points[0].x;
    let w = points[points.len() - 1].x - x0;
    let c: Vec<f64> = points.iter().map(|p| (k as f64 * std::f64::consts::PI * (p.x - x0) / w).cos()).collect();
    crate::fem::path_inner(points, eta, &c) / crate::fem::path_inner(points, &c, &c)
}
