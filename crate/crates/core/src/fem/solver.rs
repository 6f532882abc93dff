use super::sparse::{dot, norm, CsrMatrix};
use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Side};

/// Systems larger than this use preconditioned conjugate gradients.
pub const DIRECT_LIMIT: usize = 400_000;

/// Relative residual target of the iterative path.
pub const CG_TOLERANCE: f64 = 1e-10;

enum Backend {
    Direct(Llt<usize, f64>),
    Iterative { a: CsrMatrix, inv_diag: Vec<f64> },
}

/// Solver for a symmetric positive definite sparse system.
pub struct SpdSolver {
    n: usize,
    backend: Backend,
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::with_limit(a, DIRECT_LIMIT)
    }

    pub fn with_limit(a: &CsrMatrix, limit: usize) -> Result<Self> {
        if a.n == 0 {
            return Ok(SpdSolver { n: 0, backend: Backend::Iterative { a: a.clone(), inv_diag: vec![] } });
        }
        let backend = if a.n <= limit {
            let llt = a
                .to_faer()
                .sp_cholesky(Side::Lower)
                .map_err(|e| Error::Solver(format!("sparse Cholesky failed: {e:?}")))?;
            Backend::Direct(llt)
        } else {
            let d = a.diagonal();
            if d.iter().any(|&x| x <= 0.0) {
                return Err(Error::Solver("non-positive diagonal".into()));
            }
            Backend::Iterative { a: a.clone(), inv_diag: d.iter().map(|x| 1.0 / x).collect() }
        };
        Ok(SpdSolver { n: a.n, backend })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Ok(vec![]);
        }
        match &self.backend {
            Backend::Direct(llt) => {
                let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
                llt.solve_in_place(x.as_mut());
                let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Solver("non-finite solution".into()));
                }
                Ok(out)
            }
            Backend::Iterative { a, inv_diag } => conjugate_gradient(a, inv_diag, b, CG_TOLERANCE, 20 * self.n + 100),
        }
    }

    /// Solves for several right-hand sides stored as columns.
    pub fn solve_columns(&self, cols: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match &self.backend {
            Backend::Direct(llt) if self.n > 0 => {
                let mut x = Mat::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
                llt.solve_in_place(x.as_mut());
                Ok((0..cols.len()).map(|j| (0..self.n).map(|i| x[(i, j)]).collect()).collect())
            }
            _ => cols.iter().map(|c| self.solve(c)).collect(),
        }
    }
}

/// Jacobi preconditioned conjugate gradients.
pub fn conjugate_gradient(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bn {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!("conjugate gradients did not reach {tol} in {max_iter} iterations")))
}

/// Sparse LU for indefinite systems.
pub struct LuSolver {
    n: usize,
    lu: Lu<usize, f64>,
}

impl LuSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let lu = a.to_faer().sp_lu().map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
        Ok(LuSolver { n: a.n, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("singular saddle-point system".into()));
        }
        Ok(out)
    }
}

/// Solves a symmetric tridiagonal system (Thomas algorithm).
pub fn tridiagonal_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = sup[i] / m;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
