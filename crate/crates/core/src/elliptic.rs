//! Variational P1 solvers for the mixed problems on corner domains:
//! Dirichlet on S with Neumann on B, Neumann-Neumann modulo constants and
//! Dirichlet-Dirichlet, plus the harmonic extension and a convergence
//! harness.

use crate::error::{Error, Result};
use crate::fem::quadrature::duffy_rule;
use crate::fem::solver::tridiagonal_solve;
use crate::fem::{self, CsrMatrix, LuSolver, SpdSolver};
use crate::geometry::{BoundaryTag, CornerDomain, Mesh};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Right-hand side `(f, g, h)` of the mixed problem, every field indexed by
/// vertex. `f` lives on S, `h` on B (and on the auxiliary arc when that arc
/// carries Neumann data), `g` in the volume. `aux` holds Dirichlet values on
/// the auxiliary arc of model sectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryDataTriple {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    #[serde(default)]
    pub aux: Option<Vec<f64>>,
}

impl BoundaryDataTriple {
    pub fn zeros(n: usize) -> Self {
        BoundaryDataTriple { f: vec![0.0; n], g: vec![0.0; n], h: vec![0.0; n], aux: None }
    }

    /// Samples the three fields at the vertices.
    pub fn from_fns(mesh: &Mesh, f: impl Fn(Vec2) -> f64, g: impl Fn(Vec2) -> f64, h: impl Fn(Vec2) -> f64) -> Self {
        let v = &mesh.vertices;
        BoundaryDataTriple {
            f: v.iter().map(|&p| f(p)).collect(),
            g: v.iter().map(|&p| g(p)).collect(),
            h: v.iter().map(|&p| h(p)).collect(),
            aux: None,
        }
    }

    pub fn with_aux(mut self, mesh: &Mesh, a: impl Fn(Vec2) -> f64) -> Self {
        self.aux = Some(mesh.vertices.iter().map(|&p| a(p)).collect());
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        let ok = self.f.len() == n && self.g.len() == n && self.h.len() == n && self.aux.as_ref().is_none_or(|a| a.len() == n);
        if !ok {
            return Err(Error::InvalidInput(format!("boundary data must have one value per vertex ({n})")));
        }
        let fin = self.f.iter().chain(&self.g).chain(&self.h).chain(self.aux.iter().flatten()).all(|x| x.is_finite());
        if !fin {
            return Err(Error::InvalidInput("boundary data contains non-finite values".into()));
        }
        Ok(())
    }

    /// `int g - int_S f - int_B h` (with the auxiliary arc counted as B),
    /// and the sum of the magnitudes for scaling.
    pub fn compatibility_residual(&self, mesh: &Mesh) -> (f64, f64) {
        let ig: f64 = fem::volume_load(mesh, &self.g).iter().sum();
        let is: f64 = fem::boundary_load(mesh, BoundaryTag::Surface, &self.f).iter().sum();
        let ib: f64 = fem::boundary_load(mesh, BoundaryTag::Bottom, &self.h).iter().sum::<f64>()
            + fem::boundary_load(mesh, BoundaryTag::Auxiliary, &self.h).iter().sum::<f64>();
        (ig - is - ib, ig.abs() + is.abs() + ib.abs())
    }
}

/// Load vector `-int g phi + int_B h phi` of the weak form of `Lap u = g`,
/// `d_nu u = h` on B.
pub fn mixed_load(mesh: &Mesh, g: &[f64], h: &[f64]) -> Vec<f64> {
    let mut b = fem::volume_load(mesh, g);
    for x in &mut b {
        *x = -*x;
    }
    for (x, y) in b.iter_mut().zip(fem::boundary_load(mesh, BoundaryTag::Bottom, h)) {
        *x += y;
    }
    b
}

/// Stiffness system with eliminated Dirichlet nodes, factorized once and
/// reusable for many right-hand sides on the same mesh.
pub struct DirichletProblem {
    pub mesh: Mesh,
    pub k: CsrMatrix,
    pub dirichlet: Vec<bool>,
    local: Vec<usize>,
    solver: SpdSolver,
}

impl DirichletProblem {
    pub fn new(mesh: &Mesh, dirichlet: Vec<bool>) -> Result<Self> {
        let k = fem::stiffness(mesh);
        Self::with_stiffness(mesh, k, dirichlet)
    }

    pub fn with_stiffness(mesh: &Mesh, k: CsrMatrix, dirichlet: Vec<bool>) -> Result<Self> {
        if !dirichlet.iter().any(|&d| d) {
            return Err(Error::InvalidInput("Dirichlet set is empty".into()));
        }
        let free: Vec<bool> = dirichlet.iter().map(|d| !d).collect();
        let (kff, local) = k.principal(&free);
        let solver = SpdSolver::new(&kff).map_err(|e| Error::Solver(format!("constrained stiffness not definite: {e}")))?;
        Ok(DirichletProblem { mesh: mesh.clone(), k, dirichlet, local, solver })
    }

    /// Dirichlet on S and on the auxiliary arc, Neumann on B.
    pub fn mixed(mesh: &Mesh) -> Result<Self> {
        let mut d = mesh.surface_mask();
        for &i in &mesh.aux_nodes {
            d[i] = true;
        }
        Self::new(mesh, d)
    }

    /// Solves `K u = load` on free rows with `u = values` on Dirichlet nodes.
    pub fn solve(&self, values: &[f64], load: &[f64]) -> Result<Vec<f64>> {
        let n = self.mesh.n_vertices();
        let mut rhs = vec![0.0; self.solver.n()];
        for i in 0..n {
            if self.dirichlet[i] {
                continue;
            }
            let mut r = load[i];
            for (j, a) in self.k.row(i) {
                if self.dirichlet[j] {
                    r -= a * values[j];
                }
            }
            rhs[self.local[i]] = r;
        }
        let x = self.solver.solve(&rhs)?;
        Ok((0..n).map(|i| if self.dirichlet[i] { values[i] } else { x[self.local[i]] }).collect())
    }

    /// Solves with several right-hand sides sharing the same Dirichlet values (zero).
    pub fn solve_homogeneous_many(&self, loads: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.mesh.n_vertices();
        let cols: Vec<Vec<f64>> = loads
            .iter()
            .map(|l| {
                let mut rhs = vec![0.0; self.solver.n()];
                for i in 0..n {
                    if !self.dirichlet[i] {
                        rhs[self.local[i]] = l[i];
                    }
                }
                rhs
            })
            .collect();
        let xs = self.solver.solve_columns(&cols)?;
        Ok(xs.into_iter().map(|x| (0..n).map(|i| if self.dirichlet[i] { 0.0 } else { x[self.local[i]] }).collect()).collect())
    }

    /// `K u - load` at every vertex.
    pub fn residual(&self, u: &[f64], load: &[f64]) -> Vec<f64> {
        self.k.matvec(u).iter().zip(load).map(|(a, b)| a - b).collect()
    }

    /// Largest weak-form residual over free rows relative to the load scale.
    pub fn galerkin_defect(&self, u: &[f64], load: &[f64]) -> f64 {
        let r = self.residual(u, load);
        let scale = load.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(
            self.k.values.iter().fold(0.0f64, |m, x| m.max(x.abs())) * u.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        );
        let m = r.iter().zip(&self.dirichlet).filter(|(_, d)| !**d).fold(0.0f64, |m, (x, _)| m.max(x.abs()));
        if scale == 0.0 {
            m
        } else {
            m / scale
        }
    }

    /// `int_S d_N u phi_i` for each surface node (path order), from the
    /// variational identity.
    pub fn weak_flux(&self, u: &[f64], load: &[f64]) -> Vec<f64> {
        let r = self.residual(u, load);
        self.mesh.surface_nodes.iter().map(|&i| r[i]).collect()
    }

    /// Nodal normal derivative on S: the weak flux divided by the surface mass.
    pub fn normal_derivative(&self, u: &[f64], load: &[f64]) -> Vec<f64> {
        surface_mass_solve(&self.mesh, &self.weak_flux(u, load))
    }
}

/// Solves `M_S x = b` with the consistent surface mass matrix.
pub fn surface_mass_solve(mesh: &Mesh, b: &[f64]) -> Vec<f64> {
    let (sub, diag, sup) = fem::path_mass(&mesh.surface_points());
    tridiagonal_solve(&sub, &diag, &sup, b)
}

fn dirichlet_values(mesh: &Mesh, data: &BoundaryDataTriple) -> Vec<f64> {
    let mut v = data.f.clone();
    if let Some(a) = &data.aux {
        for &i in &mesh.aux_nodes {
            v[i] = a[i];
        }
    }
    v
}

/// `Lap u = g`, `u = f` on S (and aux data on the arc), `d_nu u = h` on B.
pub fn solve_mixed(domain: &CornerDomain, data: &BoundaryDataTriple) -> Result<Vec<f64>> {
    let mesh = &domain.mesh;
    data.check(mesh.n_vertices())?;
    let p = DirichletProblem::mixed(mesh)?;
    p.solve(&dirichlet_values(mesh, data), &mixed_load(mesh, &data.g, &data.h))
}

/// Harmonic extension with zero Neumann data on B. `f` is given per surface
/// node in path order.
pub fn harmonic_extension(domain: &CornerDomain, f: &[f64]) -> Result<Vec<f64>> {
    let mesh = &domain.mesh;
    if f.len() != mesh.surface_nodes.len() {
        return Err(Error::InvalidInput("surface data length differs from surface node count".into()));
    }
    let mut values = vec![0.0; mesh.n_vertices()];
    for (k, &i) in mesh.surface_nodes.iter().enumerate() {
        values[i] = f[k];
    }
    let p = DirichletProblem::mixed(mesh)?;
    p.solve(&values, &vec![0.0; mesh.n_vertices()])
}

/// `Lap u = g`, `u = 0` on S, `d_nu u = h` on B.
pub fn poisson_dirichlet(domain: &CornerDomain, g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let n = domain.mesh.n_vertices();
    let data = BoundaryDataTriple { f: vec![0.0; n], g: g.to_vec(), h: h.to_vec(), aux: None };
    solve_mixed(domain, &data)
}

/// Default relative tolerance on the Neumann compatibility residual.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-2;

/// Solution of a pure Neumann problem (`d_N u = f` on S, `d_nu u = h` on B
/// and on the auxiliary arc) with zero mean.
#[derive(Clone, Debug)]
pub struct NeumannSolution {
    pub u: Vec<f64>,
    pub compatibility_residual: f64,
    pub multiplier: f64,
}

pub fn solve_neumann_neumann(domain: &CornerDomain, data: &BoundaryDataTriple, tol: f64) -> Result<NeumannSolution> {
    let mesh = &domain.mesh;
    let n = mesh.n_vertices();
    data.check(n)?;
    let (res, scale) = data.compatibility_residual(mesh);
    if res.abs() > tol * scale.max(f64::MIN_POSITIVE) && res.abs() > 1e-12 {
        return Err(Error::Incompatible { residual: res });
    }
    let k = fem::stiffness(mesh);
    let c: Vec<f64> = fem::volume_load(mesh, &vec![1.0; n]);
    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(k.nnz() + 2 * n);
    for i in 0..n {
        for (j, a) in k.row(i) {
            t.push((i, j, a));
        }
        t.push((i, n, c[i]));
        t.push((n, i, c[i]));
    }
    let a = CsrMatrix::from_triplets(n + 1, t);
    let mut b = mixed_load(mesh, &data.g, &data.h);
    for (x, y) in b.iter_mut().zip(fem::boundary_load(mesh, BoundaryTag::Surface, &data.f)) {
        *x += y;
    }
    for (x, y) in b.iter_mut().zip(fem::boundary_load(mesh, BoundaryTag::Auxiliary, &data.h)) {
        *x += y;
    }
    b.push(0.0);
    let x = LuSolver::new(&a)?.solve(&b)?;
    Ok(NeumannSolution { u: x[..n].to_vec(), compatibility_residual: res, multiplier: x[n] })
}

/// `Lap u = g` with `u = f` on S and `u = h` on B and the auxiliary arc.
pub fn solve_dirichlet_dirichlet(domain: &CornerDomain, data: &BoundaryDataTriple) -> Result<Vec<f64>> {
    let mesh = &domain.mesh;
    data.check(mesh.n_vertices())?;
    let d = mesh.boundary_mask();
    let mut values = data.h.clone();
    for &i in &mesh.surface_nodes {
        values[i] = data.f[i];
    }
    if let Some(a) = &data.aux {
        for &i in &mesh.aux_nodes {
            values[i] = a[i];
        }
    }
    let mut load = fem::volume_load(mesh, &data.g);
    for x in &mut load {
        *x = -*x;
    }
    DirichletProblem::new(mesh, d)?.solve(&values, &load)
}

/// Errors of a P1 field against an exact solution, `(L2, H1 seminorm)`.
/// Elements are integrated with collapsed Gauss rules anchored at the
/// vertex nearest to `singular_point`, which resolves integrable gradient
/// singularities there.
pub fn error_norms(mesh: &Mesh, uh: &[f64], exact: &dyn Fn(Vec2) -> (f64, Vec2), singular_point: Vec2) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangles[t];
        let p = tri.map(|i| mesh.vertices[i]);
        let (area, g) = fem::gradients(mesh, t);
        let grad_h = g[0] * uh[tri[0]] + g[1] * uh[tri[1]] + g[2] * uh[tri[2]];
        let k = (0..3).min_by(|&a, &b| (p[a] - singular_point).norm().total_cmp(&(p[b] - singular_point).norm())).unwrap();
        let touches = (p[k] - singular_point).norm() < 1e-12;
        let order = if touches { 14 } else { 5 };
        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        for (q, w) in duffy_rule(a, b, c, order) {
            // barycentric value of the P1 field
            let l1 = (p[1] - q).cross(p[2] - q) / (2.0 * area);
            let l2b = (p[2] - q).cross(p[0] - q) / (2.0 * area);
            let l3 = 1.0 - l1 - l2b;
            let vh = l1 * uh[tri[0]] + l2b * uh[tri[1]] + l3 * uh[tri[2]];
            let (u, du) = exact(q);
            l2 += w * (u - vh).powi(2);
            h1 += w * (du - grad_h).norm2();
        }
    }
    (l2.sqrt(), h1.sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub vertices: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub order_l2: Option<f64>,
    pub order_h1: Option<f64>,
}

/// Refinement study with observed orders from consecutive meshes and a
/// least-squares fit over the whole sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub grading: f64,
    pub fitted_order_l2: f64,
    pub fitted_order_h1: f64,
    /// False when some error fails to decrease under refinement.
    pub monotone: bool,
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fitted_slope(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs a study over `hs` (strictly decreasing, at least three meshes).
/// `build` produces the domain for a mesh size, `exact` the exact solution
/// and its gradient, `solve` the discrete solution.
pub fn convergence_study_with(
    hs: &[f64],
    grading: f64,
    singular_point: Vec2,
    build: &dyn Fn(f64) -> Result<CornerDomain>,
    solve: &dyn Fn(&CornerDomain) -> Result<Vec<f64>>,
    exact: &dyn Fn(Vec2) -> (f64, Vec2),
) -> Result<ConvergenceStudy> {
    if hs.len() < 3 {
        return Err(Error::InvalidInput("convergence study needs at least 3 meshes".into()));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("mesh sizes must be strictly decreasing".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &h in hs {
        let d = build(h)?;
        let u = solve(&d)?;
        let (l2, h1) = error_norms(&d.mesh, &u, exact, singular_point);
        let (order_l2, order_h1) = match rows.last() {
            Some(prev) => {
                let r = (prev.h / h).ln();
                (Some((prev.l2_error / l2).ln() / r), Some((prev.h1_error / h1).ln() / r))
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow { h, vertices: d.mesh.n_vertices(), l2_error: l2, h1_error: h1, order_l2, order_h1 });
    }
    let monotone = rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error && w[1].h1_error < w[0].h1_error);
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let fitted_order_l2 = fitted_slope(&h, &rows.iter().map(|r| r.l2_error).collect::<Vec<_>>());
    let fitted_order_h1 = fitted_slope(&h, &rows.iter().map(|r| r.h1_error).collect::<Vec<_>>());
    Ok(ConvergenceStudy { rows, grading, fitted_order_l2, fitted_order_h1, monotone })
}

/// Study on the unit Dirichlet-Neumann sector of angle `omega` with the
/// exact solution `r^{pi/(2 omega)} sin(pi theta / (2 omega))`, imposed on
/// the arc.
pub fn sector_convergence_study(omega: f64, hs: &[f64], grading: f64) -> Result<ConvergenceStudy> {
    let sf = crate::sector_analysis::singular_function(crate::sector_analysis::BoundaryConditionPair::DirichletNeumann, omega, 0)?;
    let exact = |p: Vec2| (sf.value(p), sf.gradient(p));
    convergence_study_with(
        hs,
        grading,
        Vec2::ZERO,
        &|h| crate::geometry::build_sector_graded(omega, 1.0, h, grading),
        &|d| {
            let data = BoundaryDataTriple::zeros(d.mesh.n_vertices()).with_aux(&d.mesh, |p| sf.value(p));
            solve_mixed(d, &data)
        },
        &exact,
    )
}
