//! Dirichlet-to-Neumann operator on the free surface, assembled as the
//! energy form of discrete harmonic extensions, with its spectral calculus.

use crate::elliptic::DirichletProblem;
use crate::error::{Error, Result};
use crate::fem;
use crate::geometry::CornerDomain;
use faer::{Mat, Side};

/// Discrete DtN operator. `schur` is the Schur complement of the stiffness
/// matrix onto the surface nodes (the weak form `M K`), `mass` the surface
/// mass matrix; the nodal operator is `K = M^{-1} schur`.
#[derive(Clone, Debug)]
pub struct DtnOperator {
    pub schur: Mat<f64>,
    pub mass: Mat<f64>,
    pub nodes: Vec<usize>,
    bands: (Vec<f64>, Vec<f64>, Vec<f64>),
}

/// Generalized eigenpairs of `schur phi = lambda mass phi`, ascending and
/// mass-orthonormal. Column `k` of `vectors` is `phi_k`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
    mass: Mat<f64>,
}

fn max_abs(m: &Mat<f64>) -> f64 {
    let mut r: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            r = r.max(m[(i, j)].abs());
        }
    }
    r
}

fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// Harmonic extensions of the surface hat functions, then their energy
/// pairings; non-surface boundary nodes carry the natural Neumann condition.
pub fn assemble_dtn(domain: &CornerDomain) -> Result<DtnOperator> {
    let mesh = &domain.mesh;
    let n = mesh.n_vertices();
    let nodes = mesh.surface_nodes.clone();
    let ns = nodes.len();
    let problem = DirichletProblem::new(mesh, mesh.surface_mask())?;
    // columns of K_IS with the sign of the lifted right-hand side
    let loads: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&j| {
            let mut l = vec![0.0; n];
            for (i, a) in problem.k.row(j) {
                if !problem.dirichlet[i] {
                    l[i] = -a;
                }
            }
            l
        })
        .collect();
    let interior = problem.solve_homogeneous_many(&loads)?;
    let mut schur = Mat::<f64>::zeros(ns, ns);
    for (c, (&j, mut u)) in nodes.iter().zip(interior).enumerate() {
        u[j] = 1.0;
        let ku = problem.k.matvec(&u);
        for (r, &i) in nodes.iter().enumerate() {
            schur[(r, c)] = ku[i];
        }
    }
    let bands = fem::path_mass(&mesh.surface_points());
    let (sub, diag, sup) = &bands;
    let mut mass = Mat::<f64>::zeros(ns, ns);
    for i in 0..ns {
        mass[(i, i)] = diag[i];
        if i + 1 < ns {
            mass[(i, i + 1)] = sup[i];
            mass[(i + 1, i)] = sub[i];
        }
    }
    Ok(DtnOperator { schur, mass, nodes, bands })
}

impl DtnOperator {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodal normal derivative of the harmonic extension of `f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.inverse_mass(&mat_vec(&self.schur, f))
    }

    pub fn inverse_mass(&self, w: &[f64]) -> Vec<f64> {
        let (sub, diag, sup) = &self.bands;
        fem::solver::tridiagonal_solve(sub, diag, sup, w)
    }

    /// `|| M K - (M K)^T || / || M K ||` in the max norm.
    pub fn self_adjointness_defect(&self) -> f64 {
        let n = self.len();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                d = d.max((self.schur[(i, j)] - self.schur[(j, i)]).abs());
            }
        }
        d / max_abs(&self.schur)
    }

    /// Dense nodal matrix `K = M^{-1} schur`.
    pub fn matrix(&self) -> Mat<f64> {
        let n = self.len();
        let mut k = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| self.schur[(i, j)]).collect();
            for (i, v) in self.inverse_mass(&col).into_iter().enumerate() {
                k[(i, j)] = v;
            }
        }
        k
    }

    /// Solves the symmetric pencil through the Cholesky factor of the mass.
    pub fn spectrum(&self) -> Result<SpectralDecomposition> {
        let n = self.len();
        let llt = self.mass.llt(Side::Lower).map_err(|e| Error::Solver(format!("surface mass not definite: {e:?}")))?;
        let l = llt.L().to_owned();
        // C = L^{-1} S L^{-T}
        let mut c = self.schur.clone();
        // symmetrize the roundoff so the eigensolver sees an exactly symmetric pencil
        for i in 0..n {
            for j in 0..i {
                let a = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = a;
                c[(j, i)] = a;
            }
        }
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
        let mut ct = c.transpose().to_owned();
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), ct.as_mut(), faer::Par::Seq);
        let eig = ct.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver(format!("eigensolver failed: {e:?}")))?;
        let values: Vec<f64> = (0..n).map(|k| eig.S().column_vector()[k]).collect();
        let mut vectors = eig.U().to_owned();
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), faer::Par::Seq);
        Ok(SpectralDecomposition { values, vectors, mass: self.mass.clone() })
    }
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// Mass-weighted coefficients `<f, phi_k>_M`.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let mf = mat_vec(&self.mass, f);
        (0..self.len()).map(|k| (0..mf.len()).map(|i| self.vectors[(i, k)] * mf[i]).sum()).collect()
    }

    fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| c.iter().enumerate().map(|(k, ck)| ck * self.vectors[(i, k)]).sum()).collect()
    }

    /// `sum_k lambda_k^sigma <f, phi_k>_M phi_k`; the roundoff-level
    /// negative part of the spectrum is clipped to zero.
    pub fn fractional_power(&self, sigma: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("fractional power {sigma} must be nonnegative")));
        }
        let c: Vec<f64> = self
            .coefficients(f)
            .iter()
            .zip(&self.values)
            .map(|(c, l)| if sigma == 0.0 { *c } else { c * l.max(0.0).powf(sigma) })
            .collect();
        Ok(self.synthesize(&c))
    }

    /// `|| (I + N)^sigma f ||_{L2(S)}`.
    pub fn sobolev_norm(&self, f: &[f64], sigma: f64) -> f64 {
        self.coefficients(f)
            .iter()
            .zip(&self.values)
            .map(|(c, l)| (c * (1.0 + l.max(0.0)).powf(sigma)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry of `Phi^T M Phi - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let mut d: f64 = 0.0;
        for a in 0..n {
            let pa = self.eigenvector(a);
            let mp = mat_vec(&self.mass, &pa);
            for b in 0..=a {
                let s: f64 = (0..n).map(|i| self.vectors[(i, b)] * mp[i]).sum();
                d = d.max((s - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        d
    }
}

/// `|| (I + N)^sigma f ||_{L2(S)}` on the spectral basis of `op`.
pub fn surface_sobolev_norm(spectrum: &SpectralDecomposition, f: &[f64], sigma: f64) -> f64 {
    spectrum.sobolev_norm(f, sigma)
}

/// Separation-of-variables eigenvalue `(k pi / L) tanh(k pi d / L)` of the
/// rectangular basin with Neumann walls.
pub fn box_eigenvalue(k: usize, width: f64, depth: f64) -> f64 {
    let q = k as f64 * std::f64::consts::PI / width;
    q * (q * depth).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_box;

    #[test]
    fn box_structure_and_spectrum() {
        let d = build_box(1.0, 1.0, 0.05).unwrap();
        let op = assemble_dtn(&d).unwrap();
        assert!(op.self_adjointness_defect() < 1e-10);
        let one = vec![1.0; op.len()];
        assert!(op.apply(&one).iter().all(|v| v.abs() < 1e-9));
        let sp = op.spectrum().unwrap();
        assert!(sp.values[0].abs() < 1e-10);
        assert!(sp.orthonormality_defect() < 1e-10);
        for k in 1..=2 {
            let rel = (sp.values[k] - box_eigenvalue(k, 1.0, 1.0)).abs() / box_eigenvalue(k, 1.0, 1.0);
            assert!(rel < 0.05, "k={k} rel={rel}");
        }
    }

    #[test]
    fn fractional_semigroup() {
        let d = build_box(1.0, 0.5, 0.1).unwrap();
        let op = assemble_dtn(&d).unwrap();
        let sp = op.spectrum().unwrap();
        let f: Vec<f64> = d.mesh.surface_points().iter().map(|p| (3.0 * p.x).sin() + p.x * p.x).collect();
        let half = sp.fractional_power(0.5, &f).unwrap();
        let twice = sp.fractional_power(0.5, &half).unwrap();
        let once = sp.fractional_power(1.0, &f).unwrap();
        let direct = op.apply(&f);
        let scale = once.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..f.len() {
            assert!((twice[i] - once[i]).abs() < 1e-8 * scale);
            assert!((direct[i] - once[i]).abs() < 1e-8 * scale);
        }
        let id = sp.fractional_power(0.0, &f).unwrap();
        for i in 0..f.len() {
            assert!((id[i] - f[i]).abs() < 1e-10);
        }
        assert_eq!(sp.sobolev_norm(&vec![0.0; f.len()], 1.0), 0.0);
    }
}
