//! Energy functional, quasilinear residual of the Taylor coefficient and
//! the Gronwall envelope check.

use crate::dtn::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::fem::{self, SpdSolver};
use crate::geometry::{neighborhood_distance, CornerDomain, Mesh, SurfaceGraph};
use crate::hydro::{Cascade, PressureState};
use crate::sector_analysis::validate_config;
use crate::vec2::Vec2;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

/// Sobolev index of the energy, checked against the corner angle bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex {
    pub s: f64,
}

impl SobolevIndex {
    pub const DEFAULT: f64 = 2.5;

    pub fn new(s: f64, omega_max: f64) -> Result<Self> {
        let r = validate_config(s, omega_max, 2);
        if !r.valid {
            return Err(Error::Config(r.message));
        }
        Ok(SobolevIndex { s })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
    pub a_min: f64,
    pub omega_left: f64,
    pub omega_right: f64,
    pub neighborhood_distance: f64,
    pub taylor_violation: bool,
}

/// `int_e (P1 a)(P1 u)^2` summed over the segments (Simpson, exact for cubics).
pub fn weighted_square(points: &[Vec2], a: &[f64], u: &[f64]) -> f64 {
    (0..points.len() - 1)
        .map(|i| {
            let l = (points[i + 1] - points[i]).norm();
            let am = 0.5 * (a[i] + a[i + 1]);
            let um = 0.5 * (u[i] + u[i + 1]);
            l / 6.0 * (a[i] * u[i] * u[i] + 4.0 * am * um * um + a[i + 1] * u[i + 1] * u[i + 1])
        })
        .sum()
}

/// Largest mesh size handled by the dense volume eigensolver.
pub const DENSE_VOLUME_LIMIT: usize = 1200;
/// Krylov dimension of the Lanczos volume norm.
pub const LANCZOS_STEPS: usize = 150;

fn dense(a: &fem::CsrMatrix) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.n, a.n);
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            m[(i, j)] = v;
        }
    }
    m
}

/// `|| (I + Lap_N)^{sigma} mu ||^2_{L2}` from the full generalized
/// eigendecomposition of the Neumann Laplacian.
pub fn volume_sobolev_norm_dense(mesh: &Mesh, mu: &[f64], sigma: f64) -> Result<f64> {
    let k = dense(&fem::stiffness(mesh));
    let m = dense(&fem::mass(mesh));
    let n = m.nrows();
    let llt = m.llt(Side::Lower).map_err(|e| Error::Solver(format!("mass not definite: {e:?}")))?;
    let l = llt.L().to_owned();
    let mut c = k.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
    let mut ct = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), ct.as_mut(), faer::Par::Seq);
    let eig = ct.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver(format!("{e:?}")))?;
    // coefficients in the orthonormal basis: y = U^T L^T mu
    let mut lt_mu = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            lt_mu[i] += l[(j, i)] * mu[j];
        }
    }
    let u = eig.U();
    let mut total = 0.0;
    for q in 0..n {
        let lam = eig.S().column_vector()[q].max(0.0);
        let y: f64 = (0..n).map(|i| u[(i, q)] * lt_mu[i]).sum();
        total += y * y * (1.0 + lam).powf(2.0 * sigma);
    }
    Ok(total)
}

/// Same quantity by Lanczos on `M^{-1} K` in the mass inner product.
pub fn volume_sobolev_norm_lanczos(mesh: &Mesh, mu: &[f64], sigma: f64, steps: usize) -> Result<f64> {
    let k = fem::stiffness(mesh);
    let m = fem::mass(mesh);
    let msolve = SpdSolver::new(&m)?;
    let mu_m = m.matvec(mu);
    let nrm2: f64 = mu_m.iter().zip(mu).map(|(a, b)| a * b).sum();
    if nrm2 == 0.0 {
        return Ok(0.0);
    }
    let steps = steps.min(mu.len());
    let mut q: Vec<Vec<f64>> = vec![mu.iter().map(|x| x / nrm2.sqrt()).collect()];
    let mut mq: Vec<Vec<f64>> = vec![m.matvec(&q[0])];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..steps {
        let kq = k.matvec(&q[j]);
        let mut w = msolve.solve(&kq)?;
        let a = fem::sparse::dot(&kq, &q[j]);
        alpha.push(a);
        // full reorthogonalization in the mass inner product (twice)
        for _ in 0..2 {
            for (qi, mqi) in q.iter().zip(&mq) {
                let c = fem::sparse::dot(&w, mqi);
                for (x, y) in w.iter_mut().zip(qi) {
                    *x -= c * y;
                }
            }
        }
        let mw = m.matvec(&w);
        let b = fem::sparse::dot(&w, &mw).max(0.0).sqrt();
        if j + 1 == steps || b < 1e-12 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
        mq.push(mw.iter().map(|x| x / b).collect());
    }
    let r = alpha.len();
    let mut t = Mat::<f64>::zeros(r, r);
    for i in 0..r {
        t[(i, i)] = alpha[i];
        if i + 1 < r {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver(format!("{e:?}")))?;
    let u = eig.U();
    let mut total = 0.0;
    for k in 0..r {
        let th = eig.S().column_vector()[k].max(0.0);
        total += u[(0, k)] * u[(0, k)] * (1.0 + th).powf(2.0 * sigma);
    }
    Ok(nrm2 * total)
}

/// `|| (I + Lap_N)^{sigma} mu ||^2_{L2(Omega)}`, dense below
/// `DENSE_VOLUME_LIMIT` vertices and Lanczos above.
pub fn volume_sobolev_norm(mesh: &Mesh, mu: &[f64], sigma: f64) -> Result<f64> {
    if mu.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    if mesh.n_vertices() <= DENSE_VOLUME_LIMIT {
        volume_sobolev_norm_dense(mesh, mu, sigma)
    } else {
        volume_sobolev_norm_lanczos(mesh, mu, sigma, LANCZOS_STEPS)
    }
}

/// Energy at one instant. `spectrum` is the DtN decomposition of `domain`.
pub fn assemble_energy(
    t: f64,
    domain: &CornerDomain,
    surface: &SurfaceGraph,
    spectrum: &SpectralDecomposition,
    pressure: &PressureState,
    cascade: &Cascade,
    mu: &[f64],
    s: f64,
) -> Result<EnergyReport> {
    let pts = domain.mesh.surface_points();
    let u1 = spectrum.fractional_power(s - 1.5, &cascade.dt_a)?;
    let e1 = fem::path_inner(&pts, &u1, &u1).max(0.0);
    let u2 = spectrum.fractional_power(s - 1.0, &pressure.a)?;
    let e2 = weighted_square(&pts, &pressure.a, &u2);
    let e3 = volume_sobolev_norm(&domain.mesh, mu, 0.5 * (s - 1.0))?;
    let angles = &domain.contact_angles;
    Ok(EnergyReport {
        t,
        e1,
        e2,
        e3,
        total: e1 + e2 + e3,
        a_min: pressure.a_min,
        omega_left: angles.first().copied().unwrap_or(f64::NAN),
        omega_right: angles.last().copied().unwrap_or(f64::NAN),
        neighborhood_distance: neighborhood_distance(surface, s - 0.5),
        taylor_violation: pressure.a_min <= 0.0,
    })
}

/// Surface data of one saved instant used by the material finite differences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceSnapshot {
    pub t: f64,
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub velocity: Vec<Vec2>,
    /// `D_t v = -grad p - g e_n` on the surface.
    pub acceleration: Vec<Vec2>,
    pub a: Vec<f64>,
    pub dt_a: Vec<f64>,
}

/// Value at `x` of the nodal field `f` on the polyline `points`: nearest
/// point projection followed by cubic Lagrange interpolation in arclength.
pub fn interpolate_on_curve(points: &[Vec2], f: &[f64], x: Vec2) -> f64 {
    let n = points.len();
    let s = crate::geometry::cumulative_length(points);
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n - 1 {
        let d = points[i + 1] - points[i];
        let t = ((x - points[i]).dot(d) / d.norm2()).clamp(0.0, 1.0);
        let q = points[i] + d * t;
        let dist = (x - q).norm();
        if dist < best.0 {
            best = (dist, s[i] + t * (s[i + 1] - s[i]));
        }
    }
    let sx = best.1;
    let seg = s.partition_point(|v| *v <= sx).clamp(1, n - 1) - 1;
    let start = seg.saturating_sub(1).min(n.saturating_sub(4));
    let idx: Vec<usize> = (start..(start + 4).min(n)).collect();
    idx.iter()
        .map(|&j| {
            let w: f64 = idx.iter().filter(|&&k| k != j).map(|&k| (sx - s[k]) / (s[j] - s[k])).product();
            w * f[j]
        })
        .sum()
}

fn particle_values(prev: &SurfaceSnapshot, cur: &SurfaceSnapshot, next: &SurfaceSnapshot) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let dm = cur.t - prev.t;
    let dp = next.t - cur.t;
    let n = cur.points.len();
    let mut am = Vec::with_capacity(n);
    let mut ap = Vec::with_capacity(n);
    for k in 0..n {
        let x = cur.points[k];
        let v = cur.velocity[k];
        let acc = cur.acceleration[k];
        let xp = x + v * dp + acc * (0.5 * dp * dp);
        let xm = x - v * dm + acc * (0.5 * dm * dm);
        ap.push(interpolate_on_curve(&next.points, &next.a, xp));
        am.push(interpolate_on_curve(&prev.points, &prev.a, xm));
    }
    (am, ap, dm, dp)
}

/// Centered material derivative of `a` along particle paths at `cur`.
pub fn material_derivative(prev: &SurfaceSnapshot, cur: &SurfaceSnapshot, next: &SurfaceSnapshot) -> Vec<f64> {
    let (am, ap, dm, dp) = particle_values(prev, cur, next);
    am.iter().zip(&ap).map(|(m, p)| (p - m) / (dm + dp)).collect()
}

/// Three-point second material derivative of `a` at `cur`.
pub fn material_second_derivative(prev: &SurfaceSnapshot, cur: &SurfaceSnapshot, next: &SurfaceSnapshot) -> Vec<f64> {
    let (am, ap, dm, dp) = particle_values(prev, cur, next);
    (0..cur.a.len())
        .map(|k| 2.0 * (ap[k] / (dp * (dm + dp)) - cur.a[k] / (dm * dp) + am[k] / (dm * (dm + dp))))
        .collect()
}

/// Residual `D_t^2 a + a N a` at one instant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualSample {
    pub t: f64,
    /// Norm of the residual in the discrete H^{s-3/2}(S) norm.
    pub residual_norm: f64,
    /// Norm of the principal part `a N a` in the same norm.
    pub principal_norm: f64,
}

/// `|| D_t^2 a + a N a ||_{H^{s-3/2}}` at `cur`; `apply_dtn` is the nodal
/// DtN operator and `spectrum` its decomposition at `cur`.
pub fn quasilinear_residual(
    prev: &SurfaceSnapshot,
    cur: &SurfaceSnapshot,
    next: &SurfaceSnapshot,
    apply_dtn: &dyn Fn(&[f64]) -> Vec<f64>,
    spectrum: &SpectralDecomposition,
    s: f64,
) -> ResidualSample {
    let d2 = material_second_derivative(prev, cur, next);
    let na = apply_dtn(&cur.a);
    let principal: Vec<f64> = cur.a.iter().zip(&na).map(|(a, n)| a * n).collect();
    let r: Vec<f64> = d2.iter().zip(&principal).map(|(a, b)| a + b).collect();
    ResidualSample {
        t: cur.t,
        residual_norm: spectrum.sobolev_norm(&r, s - 1.5),
        principal_norm: spectrum.sobolev_norm(&principal, s - 1.5),
    }
}

/// Residual over every interior sample of a snapshot series.
pub fn residual_series(
    snaps: &[SurfaceSnapshot],
    operators: &[(crate::dtn::DtnOperator, SpectralDecomposition)],
    s: f64,
) -> Result<Vec<ResidualSample>> {
    if snaps.len() < 3 || operators.len() != snaps.len() {
        return Err(Error::InvalidInput("residual needs at least 3 states with their DtN operators".into()));
    }
    Ok((1..snaps.len() - 1)
        .map(|k| {
            let (op, sp) = &operators[k];
            quasilinear_residual(&snaps[k - 1], &snaps[k], &snaps[k + 1], &|f| op.apply(f), sp, s)
        })
        .collect())
}

/// Outcome of the envelope fit `E(t) <= E(0) + int_0^t c E^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallFit {
    pub passed: bool,
    /// Smallest feasible degree; 0 means `F = 0` suffices.
    pub degree: usize,
    pub coefficient: f64,
    pub skipped: Option<String>,
}

/// Largest degree of the monomial dictionary.
pub const GRONWALL_MAX_DEGREE: usize = 6;

/// Looks for an increasing `F(E) = c E^k`, `k <= 6`, with
/// `E(t_j) <= E(t_0) + int_{t_0}^{t_j} F(E)` at every sample of the window.
pub fn gronwall_check(times: &[f64], energy: &[f64], window: Option<(f64, f64)>, monitor_violation: Option<&str>) -> GronwallFit {
    if let Some(m) = monitor_violation {
        return GronwallFit { passed: false, degree: 0, coefficient: 0.0, skipped: Some(m.to_string()) };
    }
    let sel: Vec<(f64, f64)> = times
        .iter()
        .zip(energy)
        .filter(|(t, _)| window.is_none_or(|(a, b)| **t >= a && **t <= b))
        .map(|(t, e)| (*t, *e))
        .collect();
    if sel.len() < 2 {
        return GronwallFit { passed: true, degree: 0, coefficient: 0.0, skipped: None };
    }
    let e0 = sel[0].1;
    let tol = 1e-12 * sel.iter().fold(0.0f64, |m, (_, e)| m.max(e.abs())).max(1e-300);
    if sel.iter().all(|(_, e)| *e <= e0 + tol) {
        return GronwallFit { passed: true, degree: 0, coefficient: 0.0, skipped: None };
    }
    for k in 1..=GRONWALL_MAX_DEGREE {
        let mut integral = 0.0;
        let mut c: f64 = 0.0;
        let mut feasible = true;
        for j in 1..sel.len() {
            let (t0, a) = sel[j - 1];
            let (t1, b) = sel[j];
            integral += 0.5 * (t1 - t0) * (a.max(0.0).powi(k as i32) + b.max(0.0).powi(k as i32));
            let excess = b - e0;
            if excess > tol {
                if integral <= 0.0 {
                    feasible = false;
                    break;
                }
                c = c.max(excess / integral);
            }
        }
        if feasible && c.is_finite() {
            return GronwallFit { passed: true, degree: k, coefficient: c, skipped: None };
        }
    }
    GronwallFit { passed: false, degree: 0, coefficient: f64::INFINITY, skipped: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_box;

    #[test]
    fn gronwall_trivial_cases() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let f = gronwall_check(&t, &vec![2.0; 10], None, None);
        assert!(f.passed && f.degree == 0 && f.coefficient == 0.0);
        let e: Vec<f64> = t.iter().map(|x| 1.0 + x).collect();
        let f = gronwall_check(&t, &e, None, None);
        assert!(f.passed && f.degree == 1);
        let f = gronwall_check(&t, &e, None, Some("a_min below a0"));
        assert!(!f.passed && f.skipped.is_some());
    }

    #[test]
    fn lanczos_matches_dense_volume_norm() {
        let d = build_box(1.0, 1.0, 0.1).unwrap();
        let m = &d.mesh;
        let mu: Vec<f64> = m.vertices.iter().map(|p| (-20.0 * ((p.x - 0.1).powi(2) + (p.y + 0.4).powi(2))).exp()).collect();
        let a = volume_sobolev_norm_dense(m, &mu, 0.75).unwrap();
        let b = volume_sobolev_norm_lanczos(m, &mu, 0.75, 80).unwrap();
        assert!((a - b).abs() < 1e-8 * a, "{a} {b}");
        let l2: f64 = fem::mass(m).matvec(&mu).iter().zip(&mu).map(|(x, y)| x * y).sum::<f64>();
        assert!((volume_sobolev_norm_dense(m, &mu, 0.0).unwrap() - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn weighted_square_bounds() {
        let p: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64 * 0.25, 0.0)).collect();
        let a = [1.0, 2.0, 0.5, 3.0, 1.0];
        let u = [0.3, -1.0, 2.0, 0.1, 0.7];
        let lhs = weighted_square(&p, &a, &u);
        assert!(lhs >= 0.5 * fem::path_inner(&p, &u, &u));
    }

    #[test]
    fn curve_interpolation_is_cubic_exact() {
        let p: Vec<Vec2> = (0..8).map(|i| Vec2::new(i as f64 * 0.1, 0.0)).collect();
        let f: Vec<f64> = p.iter().map(|q| q.x.powi(3) - q.x).collect();
        let x = Vec2::new(0.337, 0.01);
        assert!((interpolate_on_curve(&p, &f, x) - (0.337f64.powi(3) - 0.337)).abs() < 1e-13);
    }
}
