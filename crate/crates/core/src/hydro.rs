//! Pressure, Taylor coefficient, Hodge and div-curl solvers, the material
//! derivative cascade of the pressure gradient, and vorticity transport.

use crate::elliptic::{mixed_load, surface_mass_solve, DirichletProblem};
use crate::error::{Error, Result};
use crate::fem::{self, Recovery};
use crate::geometry::{curvature, cumulative_length, derivative_along, BoundaryTag, CornerDomain, Mesh};
use crate::vec2::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// Default degree of the patch polynomials used for nodal derivatives.
pub const RECOVERY_DEGREE: usize = 3;

/// Nodal velocity with its recovered Jacobian `J[i][j] = d_j v_i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VelocityField {
    pub values: Vec<Vec2>,
    pub jacobian: Vec<Mat2>,
    /// `max |div v| / max |Dv|` over the vertices.
    pub divergence_residual: f64,
}

fn max_norm(m: &Mat2) -> f64 {
    m.0.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()))
}

impl VelocityField {
    pub fn new(values: Vec<Vec2>, jacobian: Vec<Mat2>) -> Self {
        let scale = jacobian.iter().map(max_norm).fold(0.0f64, f64::max);
        let div = jacobian.iter().map(|j| j.trace().abs()).fold(0.0f64, f64::max);
        let divergence_residual = if scale > 0.0 { div / scale } else { div };
        VelocityField { values, jacobian, divergence_residual }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![Vec2::ZERO; n], vec![Mat2::ZERO; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Samples an analytic field and its Jacobian.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> (Vec2, Mat2)) -> Self {
        let (values, jacobian) = mesh.vertices.iter().map(|&p| f(p)).unzip();
        Self::new(values, jacobian)
    }

    /// Nodal field with Jacobian rows recovered from each component.
    pub fn from_nodal(recovery: &Recovery, values: Vec<Vec2>) -> Self {
        let vx: Vec<f64> = values.iter().map(|v| v.x).collect();
        let vy: Vec<f64> = values.iter().map(|v| v.y).collect();
        let gx = recovery.gradient(&vx);
        let gy = recovery.gradient(&vy);
        let jacobian = gx.iter().zip(&gy).map(|(a, b)| Mat2::from_rows(*a, *b)).collect();
        Self::new(values, jacobian)
    }

    /// `v = grad phi` with a symmetric recovered Jacobian.
    pub fn from_gradient(recovery: &Recovery, phi: &[f64]) -> Self {
        let jets = recovery.jets(phi);
        Self::new(jets.iter().map(|j| j.grad).collect(), jets.iter().map(|j| j.hess).collect())
    }

    pub fn components(&self) -> (Vec<f64>, Vec<f64>) {
        (self.values.iter().map(|v| v.x).collect(), self.values.iter().map(|v| v.y).collect())
    }

    /// Scalar vorticity `d_x v_y - d_y v_x`.
    pub fn vorticity(&self) -> Vec<f64> {
        self.jacobian.iter().map(|j| j.0[1][0] - j.0[0][1]).collect()
    }

    /// Largest `|<v, nu>|` over bottom nodes.
    pub fn bottom_normal_defect(&self, domain: &CornerDomain) -> f64 {
        domain
            .mesh
            .bottom_nodes
            .iter()
            .zip(&domain.bottom_normals)
            .map(|(&i, n)| self.values[i].dot(*n).abs())
            .fold(0.0, f64::max)
    }

    pub fn kinetic_energy(&self, mesh: &Mesh) -> f64 {
        let e: Vec<f64> = self.values.iter().map(|v| 0.5 * v.norm2()).collect();
        fem::volume_load(mesh, &e).iter().sum()
    }
}

/// Pressure with the Taylor coefficient `a = -d_N p` on the surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PressureState {
    pub p: Vec<f64>,
    /// Elementwise gradient of the P1 pressure.
    pub grad_p: Vec<Vec2>,
    /// Recovered nodal gradient and Hessian.
    pub nodal_grad: Vec<Vec2>,
    pub hessian: Vec<Mat2>,
    /// Taylor coefficient per surface node (path order).
    pub a: Vec<f64>,
    pub a_min: f64,
}

/// Taylor coefficient at each contact point from the two code paths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CornerComparison {
    pub point: Vec2,
    pub field: f64,
    pub formula: f64,
}

/// Material derivative data of the pressure gradient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cascade {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub dt_grad_p: Vec<Vec2>,
    /// `D_t a` per surface node (path order).
    pub dt_a: Vec<f64>,
    /// `D_t a` with the bottom gravity term of beta weighted by the
    /// alternative coefficient (diagnostic).
    pub dt_a_alternative: Vec<f64>,
    /// Largest magnitude of the Neumann datum of beta.
    pub beta_neumann_max: f64,
}

/// Coefficient of `g (grad_v nu)^n` in the Neumann datum of beta obtained by
/// differentiating the bottom condition of the pressure along the flow.
pub const BETA_GRAVITY_COEFFICIENT: f64 = 3.0;
/// Coefficient carried by the alternative form of the datum.
pub const BETA_GRAVITY_ALTERNATIVE: f64 = 1.0;

/// Hodge splitting `X = w + grad phi` of an elementwise vector field.
#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    pub phi: Vec<f64>,
    pub w: Vec<Vec2>,
    pub grad_phi: Vec<Vec2>,
    /// `|(w, grad phi)| / (|w| |grad phi|)` in L2.
    pub orthogonality_defect: f64,
}

/// Reusable factorization and recovery operators for one mesh.
pub struct HydroSolver {
    pub domain: CornerDomain,
    pub problem: DirichletProblem,
    recovery: std::cell::OnceCell<Recovery>,
}

fn surface_tangent_normal(domain: &CornerDomain) -> (Vec<Vec2>, Vec<Vec2>) {
    let n = domain.surface_normals.clone();
    let t = n.iter().map(|v| Vec2::new(v.y, -v.x)).collect();
    (t, n)
}

impl HydroSolver {
    pub fn new(domain: CornerDomain) -> Result<Self> {
        Ok(HydroSolver { problem: DirichletProblem::mixed(&domain.mesh)?, recovery: std::cell::OnceCell::new(), domain })
    }

    /// Patch recovery operators, built on first use.
    pub fn recovery(&self) -> &Recovery {
        self.recovery.get_or_init(|| Recovery::new(&self.domain.mesh, RECOVERY_DEGREE).expect("recovery degree in range"))
    }

    /// Velocity on the surface nodes (path order): tangential derivative
    /// of the trace plus the weak normal flux.
    pub fn surface_velocity(&self, phi: &[f64]) -> Vec<Vec2> {
        let mesh = self.mesh();
        let zero = vec![0.0; mesh.n_vertices()];
        let dn = self.problem.normal_derivative(phi, &zero);
        let pts = mesh.surface_points();
        let s = cumulative_length(&pts);
        let trace: Vec<f64> = mesh.surface_nodes.iter().map(|&i| phi[i]).collect();
        let ds = derivative_along(&s, &trace);
        let (t, n) = surface_tangent_normal(&self.domain);
        (0..pts.len()).map(|k| t[k] * ds[k] + n[k] * dn[k]).collect()
    }

    fn mesh(&self) -> &Mesh {
        &self.domain.mesh
    }

    /// Velocity of a potential. Surface nodes take the tangential derivative
    /// of the trace and the weak normal flux; other nodes the recovered
    /// gradient.
    pub fn potential_velocity(&self, phi: &[f64]) -> Result<VelocityField> {
        let mesh = self.mesh();
        let mut v = VelocityField::from_gradient(self.recovery(), phi);
        let zero = vec![0.0; mesh.n_vertices()];
        let dn = self.problem.normal_derivative(phi, &zero);
        let pts = mesh.surface_points();
        let s = cumulative_length(&pts);
        let trace: Vec<f64> = mesh.surface_nodes.iter().map(|&i| phi[i]).collect();
        let ds = derivative_along(&s, &trace);
        let (t, n) = surface_tangent_normal(&self.domain);
        for (k, &i) in mesh.surface_nodes.iter().enumerate() {
            v.values[i] = t[k] * ds[k] + n[k] * dn[k];
        }
        Ok(v)
    }

    pub fn pressure(&self, v: &VelocityField, g: f64) -> Result<PressureState> {
        let mesh = self.mesh();
        if v.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput("velocity length differs from vertex count".into()));
        }
        let src: Vec<f64> = v.jacobian.iter().map(|j| -j.mul(j).trace()).collect();
        let mut load = mixed_load(mesh, &src, &vec![0.0; mesh.n_vertices()]);
        let bottom = &self.domain.bottom;
        let edge = fem::edge_constant_load(mesh, BoundaryTag::Bottom, |[a, b], nu| {
            let vm = (v.values[a] + v.values[b]) * 0.5;
            let mid = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
            let fr = bottom.frame(mid);
            let vt = vm.dot(fr.tangent);
            // -Pi_M(v, v) - g nu^n with Pi_M(v, w) = -k v_t w_t
            fr.curvature * vt * vt - g * nu.y
        });
        for (x, y) in load.iter_mut().zip(edge) {
            *x += y;
        }
        let p = self.problem.solve(&vec![0.0; mesh.n_vertices()], &load)?;
        let dn = self.problem.normal_derivative(&p, &load);
        let a: Vec<f64> = dn.iter().map(|x| -x).collect();
        let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
        let jets = self.recovery().jets(&p);
        Ok(PressureState {
            grad_p: fem::element_gradients(mesh, &p),
            nodal_grad: jets.iter().map(|j| j.grad).collect(),
            hessian: jets.iter().map(|j| j.hess).collect(),
            p,
            a,
            a_min,
        })
    }

    /// Contact-line Taylor coefficient from the field solve and from the
    /// corner formula.
    pub fn corner_comparison(&self, v: &VelocityField, state: &PressureState, g: f64) -> Result<Vec<CornerComparison>> {
        let formula = taylor_corner(v, &self.domain, g)?;
        let mesh = self.mesh();
        Ok(mesh
            .contact_nodes
            .iter()
            .zip(formula)
            .map(|(&c, f)| {
                let k = mesh.surface_nodes.iter().position(|&i| i == c).unwrap();
                CornerComparison { point: mesh.vertices[c], field: state.a[k], formula: f }
            })
            .collect())
    }

    pub fn cascade(&self, v: &VelocityField, state: &PressureState, g: f64) -> Result<Cascade> {
        let mesh = self.mesh();
        let n = mesh.n_vertices();
        let bottom = &self.domain.bottom;
        let gp = &state.nodal_grad;
        let zero = vec![0.0; n];

        // alpha: Lap alpha = <Lap v, grad p>, d_nu alpha = <grad_nu v, grad p>
        let mu = v.vorticity();
        let dmu = self.recovery().gradient(&mu);
        let src_a: Vec<f64> = (0..n).map(|i| Vec2::new(-dmu[i].y, dmu[i].x).dot(gp[i])).collect();
        let mut load_a = mixed_load(mesh, &src_a, &zero);
        let edge_a = fem::edge_constant_load(mesh, BoundaryTag::Bottom, |[a, b], nu| {
            let j = v.jacobian[a].add(&v.jacobian[b]).scale(0.5);
            let q = (gp[a] + gp[b]) * 0.5;
            j.apply(nu).dot(q)
        });
        for (x, y) in load_a.iter_mut().zip(edge_a) {
            *x += y;
        }

        // beta: Lap beta = 4 tr(D2p Dv) + 2 tr(Dv^3),
        // d_nu beta = 3 Pi_M(grad_T p, v) + <D2nu(v, v), v> - c g (grad_v nu)^n
        let src_b: Vec<f64> = (0..n)
            .map(|i| {
                let j = &v.jacobian[i];
                4.0 * state.hessian[i].mul(j).trace() + 2.0 * j.mul(j).mul(j).trace()
            })
            .collect();
        let beta_datum = |coef: f64| {
            move |[a, b]: [usize; 2], _nu: Vec2| {
                let mid = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
                let fr = bottom.frame(mid);
                let vt = ((v.values[a] + v.values[b]) * 0.5).dot(fr.tangent);
                let pt = ((gp[a] + gp[b]) * 0.5).dot(fr.tangent);
                let k = fr.curvature;
                -3.0 * k * pt * vt + vt * vt * vt * fr.dcurvature - coef * g * k * vt * fr.tangent.y
            }
        };
        let mut beta_neumann_max: f64 = 0.0;
        for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Bottom) {
            beta_neumann_max = beta_neumann_max.max(beta_datum(BETA_GRAVITY_COEFFICIENT)(e.nodes, Vec2::ZERO).abs());
        }
        let mut load_b = mixed_load(mesh, &src_b, &zero);
        let mut load_b_alt = load_b.clone();
        for (x, y) in load_b.iter_mut().zip(fem::edge_constant_load(mesh, BoundaryTag::Bottom, beta_datum(BETA_GRAVITY_COEFFICIENT))) {
            *x += y;
        }
        for (x, y) in load_b_alt.iter_mut().zip(fem::edge_constant_load(mesh, BoundaryTag::Bottom, beta_datum(BETA_GRAVITY_ALTERNATIVE))) {
            *x += y;
        }
        let sols = self.problem.solve_homogeneous_many(&[load_a.clone(), load_b.clone(), load_b_alt.clone()])?;
        let (alpha, beta, beta_alt) = (sols[0].clone(), sols[1].clone(), sols[2].clone());
        let dn_a = self.problem.normal_derivative(&alpha, &load_a);
        let dn_b = self.problem.normal_derivative(&beta, &load_b);
        let dn_b_alt = self.problem.normal_derivative(&beta_alt, &load_b_alt);

        // <N, Dv N> = -d_s v_t - kappa v_N on the surface
        let pts = mesh.surface_points();
        let s = cumulative_length(&pts);
        let kappa = curvature(&pts)?;
        let (t, nn) = surface_tangent_normal(&self.domain);
        let vt: Vec<f64> = mesh.surface_nodes.iter().zip(&t).map(|(&i, t)| v.values[i].dot(*t)).collect();
        let dvt = derivative_along(&s, &vt);
        let ndn: Vec<f64> =
            (0..pts.len()).map(|k| -dvt[k] - kappa[k] * v.values[mesh.surface_nodes[k]].dot(nn[k])).collect();

        let ga = self.recovery().gradient(&alpha);
        let gb = self.recovery().gradient(&beta);
        let mut dt_grad_p: Vec<Vec2> = (0..n).map(|i| -v.jacobian[i].transpose().apply(gp[i]) + ga[i] + gb[i]).collect();
        let mut dt_a = Vec::with_capacity(pts.len());
        let mut dt_a_alternative = Vec::with_capacity(pts.len());
        for (k, &i) in mesh.surface_nodes.iter().enumerate() {
            let a = state.a[k];
            // grad p = -a N on S, so <(Dv)^T grad p, N> = -a <N, Dv N>
            let val = -a * ndn[k] - dn_a[k] - dn_b[k];
            dt_grad_p[i] = nn[k] * (-val) + t[k] * (-v.jacobian[i].transpose().apply(nn[k] * -a).dot(t[k]));
            dt_a.push(-dt_grad_p[i].dot(nn[k]));
            dt_a_alternative.push(-a * ndn[k] - dn_a[k] - dn_b_alt[k]);
        }
        Ok(Cascade { alpha, beta, dt_grad_p, dt_a, dt_a_alternative, beta_neumann_max })
    }
}

pub fn solve_pressure(domain: &CornerDomain, v: &VelocityField, g: f64) -> Result<PressureState> {
    HydroSolver::new(domain.clone())?.pressure(v, g)
}

pub fn cascade(domain: &CornerDomain, v: &VelocityField, state: &PressureState, g: f64) -> Result<Cascade> {
    HydroSolver::new(domain.clone())?.cascade(v, state, g)
}

/// `a = (g nu^n + <nu, grad_v v>) / <nu, N>` at each contact point.
pub fn taylor_corner(v: &VelocityField, domain: &CornerDomain, g: f64) -> Result<Vec<f64>> {
    let mesh = &domain.mesh;
    let mut out = Vec::with_capacity(mesh.contact_nodes.len());
    for &c in &mesh.contact_nodes {
        let k = mesh.surface_nodes.iter().position(|&i| i == c).expect("contact node on surface");
        let nu = domain.bottom.frame(mesh.vertices[c]).normal;
        let big_n = domain.surface_normals[k];
        let d = nu.dot(big_n);
        if d.abs() < 1e-3 {
            return Err(Error::InvalidInput(format!("bottom and surface normals nearly orthogonal at contact ({d:.3e})")));
        }
        let acc = v.jacobian[c].apply(v.values[c]);
        out.push((g * nu.y + nu.dot(acc)) / d);
    }
    Ok(out)
}

/// Averages a nodal vector field over each triangle (exact mean of P1).
pub fn element_average(mesh: &Mesh, nodal: &[Vec2]) -> Vec<Vec2> {
    mesh.triangles.iter().map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0).collect()
}

/// Galerkin Hodge splitting with `phi = 0` on S; `w` is L2-orthogonal to
/// every discrete gradient vanishing on S.
pub fn hodge_project(domain: &CornerDomain, x: &[Vec2]) -> Result<HodgeDecomposition> {
    let mesh = &domain.mesh;
    if x.len() != mesh.triangles.len() {
        return Err(Error::InvalidInput("hodge_project expects one vector per triangle".into()));
    }
    if x.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::InvalidInput("vector field contains non-finite values".into()));
    }
    let n = mesh.n_vertices();
    let mut load = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (area, g) = fem::gradients(mesh, t);
        for k in 0..3 {
            load[tri[k]] += area * x[t].dot(g[k]);
        }
    }
    let problem = DirichletProblem::new(mesh, mesh.surface_mask())?;
    let phi = problem.solve(&vec![0.0; n], &load)?;
    let grad_phi = fem::element_gradients(mesh, &phi);
    let w: Vec<Vec2> = x.iter().zip(&grad_phi).map(|(a, b)| *a - *b).collect();
    let (mut ip, mut nw, mut ng) = (0.0, 0.0, 0.0);
    for t in 0..mesh.triangles.len() {
        let area = mesh.signed_area(t);
        ip += area * w[t].dot(grad_phi[t]);
        nw += area * w[t].norm2();
        ng += area * grad_phi[t].norm2();
    }
    let denom = (nw * ng).sqrt();
    let orthogonality_defect = if denom > 0.0 { ip.abs() / denom } else { 0.0 };
    Ok(HodgeDecomposition { phi, w, grad_phi, orthogonality_defect })
}

/// Maximum fixed-point sweeps in `div_curl_solve`.
pub const DIV_CURL_SWEEPS: usize = 60;

/// Velocity with prescribed divergence `g`, vorticity `mu`, bottom flux
/// `<v, nu> = h_b(edge midpoint, edge normal)` and surface datum
/// `<d_s v, N> = f_s` (per surface node), as `v = grad phi + perp grad psi`.
pub fn div_curl_solve(
    domain: &CornerDomain,
    g: &[f64],
    mu: &[f64],
    f_s: &[f64],
    h_b: &dyn Fn(Vec2, Vec2) -> f64,
) -> Result<VelocityField> {
    let mesh = &domain.mesh;
    let n = mesh.n_vertices();
    let ns = mesh.surface_nodes.len();
    if g.len() != n || mu.len() != n || f_s.len() != ns {
        return Err(Error::InvalidInput("div-curl data lengths do not match the mesh".into()));
    }
    let recovery = Recovery::new(mesh, RECOVERY_DEGREE)?;
    let zero = vec![0.0; n];

    // stream function: Lap psi = mu, psi = 0 on the whole boundary
    let psi_problem = DirichletProblem::new(mesh, mesh.boundary_mask())?;
    let psi = psi_problem.solve(&zero, &mixed_load(mesh, mu, &zero))?;
    let psi_jets = recovery.jets(&psi);

    // Neumann loads on B and the auxiliary arc
    let mut base = mixed_load(mesh, g, &zero);
    for tag in [BoundaryTag::Bottom, BoundaryTag::Auxiliary] {
        let e = fem::edge_constant_load(mesh, tag, |[a, b], nu| h_b((mesh.vertices[a] + mesh.vertices[b]) * 0.5, nu));
        for (x, y) in base.iter_mut().zip(e) {
            *x += y;
        }
    }
    let int_g: f64 = fem::volume_load(mesh, g).iter().sum();
    let mut flux_b = 0.0;
    for tag in [BoundaryTag::Bottom, BoundaryTag::Auxiliary] {
        flux_b += fem::edge_constant_load(mesh, tag, |[a, b], nu| h_b((mesh.vertices[a] + mesh.vertices[b]) * 0.5, nu)).iter().sum::<f64>();
    }

    let k = fem::stiffness(mesh);
    let c = fem::volume_load(mesh, &vec![1.0; n]);
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(k.nnz() + 2 * n);
    for i in 0..n {
        for (j, a) in k.row(i) {
            trip.push((i, j, a));
        }
        trip.push((i, n, c[i]));
        trip.push((n, i, c[i]));
    }
    let lu = fem::LuSolver::new(&fem::CsrMatrix::from_triplets(n + 1, trip))?;

    let pts = mesh.surface_points();
    let s = cumulative_length(&pts);
    let kappa = curvature(&pts)?;
    let (t, nn) = surface_tangent_normal(domain);
    let length = *s.last().unwrap();
    let mut vt = vec![0.0; ns];
    let mut field = VelocityField::zero(n);
    for sweep in 0..DIV_CURL_SWEEPS {
        // v_N = int (f + kappa v_t) ds + C
        let integrand: Vec<f64> = (0..ns).map(|i| f_s[i] + kappa[i] * vt[i]).collect();
        let mut q = vec![0.0; ns];
        for i in 1..ns {
            q[i] = q[i - 1] + 0.5 * (integrand[i] + integrand[i - 1]) * (s[i] - s[i - 1]);
        }
        let iq = fem::path_integral(&pts, &q);
        let shift = (int_g - flux_b - iq) / length;
        for x in &mut q {
            *x += shift;
        }
        let mut load = base.clone();
        for (k, x) in fem::path_mass_apply(&pts, &q).into_iter().enumerate() {
            load[mesh.surface_nodes[k]] += x;
        }
        load.push(0.0);
        let sol = lu.solve(&load)?;
        let phi = &sol[..n];
        let phi_jets = recovery.jets(phi);
        let values: Vec<Vec2> =
            (0..n).map(|i| phi_jets[i].grad + Vec2::new(-psi_jets[i].grad.y, psi_jets[i].grad.x)).collect();
        let jac: Vec<Mat2> = (0..n)
            .map(|i| {
                let hp = psi_jets[i].hess;
                phi_jets[i].hess.add(&Mat2::new(-hp.0[1][0], -hp.0[1][1], hp.0[0][0], hp.0[0][1]))
            })
            .collect();
        field = VelocityField::new(values, jac);
        let new_vt: Vec<f64> = mesh.surface_nodes.iter().zip(&t).map(|(&i, t)| field.values[i].dot(*t)).collect();
        let change = new_vt.iter().zip(&vt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = new_vt.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        vt = new_vt;
        if change <= 1e-13 * scale || kappa.iter().all(|k| *k == 0.0) {
            log::debug!("div-curl converged after {} sweeps", sweep + 1);
            break;
        }
    }
    let _ = nn;
    Ok(field)
}

/// Scalar vorticity carried by the flow (2D form of the matrix equation
/// `D_t mu = -(Dv)^T mu - mu Dv`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VorticityField {
    pub mu: Vec<f64>,
}

impl VorticityField {
    pub fn sup_norm(&self) -> f64 {
        self.mu.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Semi-Lagrangian transport: midpoint backtrace of each vertex and
/// evaluation of the local patch polynomial at the foot.
pub fn vorticity_step(recovery: &Recovery, mesh: &Mesh, mu: &VorticityField, v: &VelocityField, dt: f64) -> VorticityField {
    if dt == 0.0 || mu.mu.iter().all(|x| *x == 0.0) || v.values.iter().all(|u| u.norm2() == 0.0) {
        return mu.clone();
    }
    let (vx, vy) = v.components();
    let h = mesh.max_diameter();
    let mut clamped = 0usize;
    let out = (0..mesh.n_vertices())
        .map(|i| {
            let x = mesh.vertices[i];
            let mid = x - v.values[i] * (0.5 * dt);
            let vm = Vec2::new(recovery.eval(i, &vx, mid), recovery.eval(i, &vy, mid));
            let mut foot = x - vm * dt;
            if (foot - x).norm() > 2.0 * h {
                clamped += 1;
                foot = x + (foot - x).normalized() * (2.0 * h);
            }
            recovery.eval(i, &mu.mu, foot)
        })
        .collect();
    if clamped > 0 {
        log::warn!("vorticity backtrace clamped at {clamped} vertices");
    }
    VorticityField { mu: out }
}

/// Surface nodal values of `<d_s v, N>` for a nodal field.
pub fn surface_condition_datum(domain: &CornerDomain, v: &VelocityField) -> Vec<f64> {
    let (t, n) = surface_tangent_normal(domain);
    domain.mesh.surface_nodes.iter().enumerate().map(|(k, &i)| v.jacobian[i].apply(t[k]).dot(n[k])).collect()
}

/// Surface mass solve re-exported for callers that hold weak fluxes.
pub fn nodal_from_weak(mesh: &Mesh, flux: &[f64]) -> Vec<f64> {
    surface_mass_solve(mesh, flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_beach, build_box, BeachOptions, SurfaceProfile};
    use std::f64::consts::PI;

    #[test]
    fn still_water_is_hydrostatic() {
        let d = build_beach(PI / 5.0, &SurfaceProfile::Flat, 0.05, &BeachOptions::default()).unwrap();
        let hs = HydroSolver::new(d.clone()).unwrap();
        let v = VelocityField::zero(d.mesh.n_vertices());
        let st = hs.pressure(&v, 9.81).unwrap();
        for (p, q) in d.mesh.vertices.iter().zip(&st.p) {
            assert!((q + 9.81 * p.y).abs() < 1e-10);
        }
        for a in &st.a {
            assert!((a - 9.81).abs() < 1e-8);
        }
        for c in hs.corner_comparison(&v, &st, 9.81).unwrap() {
            assert!((c.formula - 9.81).abs() < 1e-12);
        }
        let cas = hs.cascade(&v, &st, 9.81).unwrap();
        assert!(cas.dt_a.iter().all(|x| x.abs() < 1e-8));
        assert!(cas.alpha.iter().chain(&cas.beta).all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn taylor_degeneracy() {
        let d = build_beach(PI / 5.0, &SurfaceProfile::Flat, 0.1, &BeachOptions::default()).unwrap();
        let g = 9.81;
        let n = d.mesh.n_vertices();
        let mut v = VelocityField::zero(n);
        // constant acceleration -g e_n through a linear field at the contact
        for (k, &c) in d.mesh.contact_nodes.iter().enumerate() {
            let nu = d.bottom.frame(d.mesh.vertices[c]).normal;
            let _ = k;
            v.values[c] = nu.perp();
            let want = -g * nu.y;
            // J v = s nu with <nu, J v> = want
            let j = Mat2::new(nu.x * nu.perp().x, nu.x * nu.perp().y, nu.y * nu.perp().x, nu.y * nu.perp().y).scale(want);
            v.jacobian[c] = j;
        }
        for a in taylor_corner(&v, &d, g).unwrap() {
            assert!(a.abs() < 1e-12);
        }
    }

    #[test]
    fn flat_bottom_kills_beta_datum() {
        let d = build_box(1.0, 1.0, 0.1).unwrap();
        let hs = HydroSolver::new(d.clone()).unwrap();
        let v = VelocityField::from_fn(&d.mesh, |p| (Vec2::new(p.y, p.x), Mat2::new(0.0, 1.0, 1.0, 0.0)));
        let st = hs.pressure(&v, 9.81).unwrap();
        let c = hs.cascade(&v, &st, 9.81).unwrap();
        assert_eq!(c.beta_neumann_max, 0.0);
    }

    #[test]
    fn hodge_splits_orthogonally() {
        let d = build_box(1.0, 1.0, 0.1).unwrap();
        let m = &d.mesh;
        let x: Vec<Vec2> = m.vertices.iter().map(|p| Vec2::new(p.y, p.x * p.x)).collect();
        let h = hodge_project(&d, &element_average(m, &x)).unwrap();
        assert!(h.orthogonality_defect < 1e-8);
        let again = hodge_project(&d, &h.w).unwrap();
        assert!(again.grad_phi.iter().all(|g| g.norm() < 1e-10));
        // pure gradient with psi = 0 on S
        let psi: Vec<f64> = m.vertices.iter().map(|p| p.y * (p.y + 1.0) * p.x).collect();
        let g = fem::element_gradients(m, &psi);
        let h = hodge_project(&d, &g).unwrap();
        assert!(h.w.iter().all(|w| w.norm() < 1e-10));
    }

    #[test]
    fn div_curl_recovers_constant_and_potential_flows() {
        let d = build_box(1.0, 1.0, 0.05).unwrap();
        let m = &d.mesh;
        let n = m.n_vertices();
        let ns = m.surface_nodes.len();
        let v = div_curl_solve(&d, &vec![0.0; n], &vec![0.0; n], &vec![0.0; ns], &|_, nu| nu.x).unwrap();
        assert!(v.values.iter().all(|u| (*u - Vec2::new(1.0, 0.0)).norm() < 1e-8));
        let v = div_curl_solve(&d, &vec![0.0; n], &vec![0.0; n], &vec![0.0; ns], &|p, nu| Vec2::new(2.0 * p.x, -2.0 * p.y).dot(nu)).unwrap();
        let err = m.vertices.iter().zip(&v.values).map(|(p, u)| (*u - Vec2::new(2.0 * p.x, -2.0 * p.y)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn vorticity_constant_is_transported_unchanged() {
        let d = build_box(1.0, 1.0, 0.1).unwrap();
        let rec = Recovery::new(&d.mesh, 3).unwrap();
        let v = VelocityField::from_fn(&d.mesh, |p| (Vec2::new(-p.y, p.x), Mat2::new(0.0, -1.0, 1.0, 0.0)));
        let mu = VorticityField { mu: vec![2.0; d.mesh.n_vertices()] };
        let out = vorticity_step(&rec, &d.mesh, &mu, &v, 0.01);
        assert!(out.mu.iter().all(|x| (x - 2.0).abs() < 1e-10));
        let still = vorticity_step(&rec, &d.mesh, &mu, &VelocityField::zero(d.mesh.n_vertices()), 0.01);
        assert_eq!(still.mu, mu.mu);
    }
}
