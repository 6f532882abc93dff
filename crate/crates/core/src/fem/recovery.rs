use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::vec2::{Mat2, Vec2};

fn n_coef(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

fn monomials(degree: usize, x: f64, y: f64, out: &mut [f64]) {
    let mut k = 0;
    for d in 0..=degree {
        for j in 0..=d {
            out[k] = x.powi((d - j) as i32) * y.powi(j as i32);
            k += 1;
        }
    }
}

/// Local polynomial data at a vertex: value, gradient and Hessian.
#[derive(Clone, Copy, Debug, Default)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Mat2,
}

/// Least-squares polynomial recovery of derivatives on vertex patches.
///
/// Each vertex owns the smallest k-ring patch that makes the fit
/// overdetermined by half; the fitting operator is precomputed so every
/// field costs one small matrix-vector product per vertex.
pub struct Recovery {
    pub degree: usize,
    centers: Vec<Vec2>,
    scales: Vec<f64>,
    patches: Vec<Vec<usize>>,
    ops: Vec<Vec<f64>>,
}

impl Recovery {
    pub fn new(mesh: &Mesh, degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidInput(format!("recovery degree {degree} not in 1..=3")));
        }
        let adj = mesh.adjacency();
        let nc = n_coef(degree);
        let target = nc + nc.div_ceil(2);
        let n = mesh.n_vertices();
        let mut centers = Vec::with_capacity(n);
        let mut scales = Vec::with_capacity(n);
        let mut patches = Vec::with_capacity(n);
        let mut ops = Vec::with_capacity(n);
        let mut mark = vec![usize::MAX; n];
        for i in 0..n {
            let mut patch = vec![i];
            mark[i] = i;
            let mut frontier = vec![i];
            let mut op = None;
            for _ring in 0..8 {
                let mut next = Vec::new();
                for &f in &frontier {
                    for &j in &adj[f] {
                        if mark[j] != i {
                            mark[j] = i;
                            next.push(j);
                        }
                    }
                }
                if next.is_empty() && patch.len() < nc {
                    break;
                }
                patch.extend_from_slice(&next);
                frontier = next;
                if patch.len() >= target {
                    if let Some(o) = fit_operator(mesh, i, &patch, degree) {
                        op = Some(o);
                        break;
                    }
                }
            }
            let (scale, o) = op.ok_or_else(|| Error::Solver(format!("degenerate recovery patch at vertex {i}")))?;
            centers.push(mesh.vertices[i]);
            scales.push(scale);
            patches.push(patch);
            ops.push(o);
        }
        Ok(Recovery { degree, centers, scales, patches, ops })
    }

    /// Polynomial coefficients in scaled local coordinates.
    pub fn coefficients(&self, i: usize, f: &[f64]) -> [f64; 10] {
        let nc = n_coef(self.degree);
        let patch = &self.patches[i];
        let op = &self.ops[i];
        let mut c = [0.0; 10];
        for (k, ck) in c.iter_mut().enumerate().take(nc) {
            let row = &op[k * patch.len()..(k + 1) * patch.len()];
            *ck = row.iter().zip(patch).map(|(w, &j)| w * f[j]).sum();
        }
        c
    }

    pub fn jet(&self, i: usize, f: &[f64]) -> Jet {
        let c = self.coefficients(i, f);
        let r = self.scales[i];
        let grad = Vec2::new(c[1], c[2]) / r;
        let hess = if self.degree >= 2 {
            Mat2::new(2.0 * c[3], c[4], c[4], 2.0 * c[5]).scale(1.0 / (r * r))
        } else {
            Mat2::ZERO
        };
        Jet { value: c[0], grad, hess }
    }

    pub fn jets(&self, f: &[f64]) -> Vec<Jet> {
        (0..self.centers.len()).map(|i| self.jet(i, f)).collect()
    }

    pub fn gradient(&self, f: &[f64]) -> Vec<Vec2> {
        (0..self.centers.len()).map(|i| self.jet(i, f).grad).collect()
    }

    pub fn hessian(&self, f: &[f64]) -> Vec<Mat2> {
        (0..self.centers.len()).map(|i| self.jet(i, f).hess).collect()
    }

    /// Third derivatives `[f_xxx, f_xxy, f_xyy, f_yyy]` (cubic fits only).
    pub fn third(&self, i: usize, f: &[f64]) -> [f64; 4] {
        if self.degree < 3 {
            return [0.0; 4];
        }
        let c = self.coefficients(i, f);
        let r3 = self.scales[i].powi(3);
        [6.0 * c[6] / r3, 2.0 * c[7] / r3, 2.0 * c[8] / r3, 6.0 * c[9] / r3]
    }

    /// Evaluates the patch polynomial of vertex `i` at `p`.
    pub fn eval(&self, i: usize, f: &[f64], p: Vec2) -> f64 {
        let c = self.coefficients(i, f);
        let d = (p - self.centers[i]) / self.scales[i];
        let mut m = [0.0; 10];
        monomials(self.degree, d.x, d.y, &mut m);
        c.iter().zip(&m).take(n_coef(self.degree)).map(|(a, b)| a * b).sum()
    }
}

/// Returns (scale, operator) with operator rows mapping patch values to
/// coefficients, or None when the normal matrix is numerically singular.
fn fit_operator(mesh: &Mesh, i: usize, patch: &[usize], degree: usize) -> Option<(f64, Vec<f64>)> {
    let nc = n_coef(degree);
    let np = patch.len();
    let c = mesh.vertices[i];
    let scale = patch.iter().map(|&j| (mesh.vertices[j] - c).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut a = vec![0.0; np * nc];
    for (r, &j) in patch.iter().enumerate() {
        let d = (mesh.vertices[j] - c) / scale;
        monomials(degree, d.x, d.y, &mut a[r * nc..(r + 1) * nc]);
    }
    // normal matrix and its Cholesky factor
    let mut g = vec![0.0; nc * nc];
    for r in 0..np {
        let row = &a[r * nc..(r + 1) * nc];
        for p in 0..nc {
            for q in 0..nc {
                g[p * nc + q] += row[p] * row[q];
            }
        }
    }
    let mut l = vec![0.0; nc * nc];
    let gmax = (0..nc).map(|p| g[p * nc + p]).fold(0.0, f64::max);
    for p in 0..nc {
        for q in 0..=p {
            let mut s = g[p * nc + q];
            for k in 0..q {
                s -= l[p * nc + k] * l[q * nc + k];
            }
            if p == q {
                if s <= 1e-10 * gmax {
                    return None;
                }
                l[p * nc + p] = s.sqrt();
            } else {
                l[p * nc + q] = s / l[q * nc + q];
            }
        }
    }
    // op = G^{-1} A^T, column by column
    let mut op = vec![0.0; nc * np];
    let mut y = vec![0.0; nc];
    for r in 0..np {
        for p in 0..nc {
            let mut s = a[r * nc + p];
            for k in 0..p {
                s -= l[p * nc + k] * y[k];
            }
            y[p] = s / l[p * nc + p];
        }
        for p in (0..nc).rev() {
            let mut s = y[p];
            for k in p + 1..nc {
                s -= l[k * nc + p] * y[k];
            }
            y[p] = s / l[p * nc + p];
        }
        for p in 0..nc {
            op[p * np + r] = y[p];
        }
    }
    Some((scale, op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesher::box_mesh;

    #[test]
    fn reproduces_polynomials_of_its_degree() {
        let m = box_mesh(1.0, 1.0, 0.1);
        let f: Vec<f64> = m.vertices.iter().map(|p| p.x * p.x * p.y - 2.0 * p.y * p.y * p.y + p.x).collect();
        let r = Recovery::new(&m, 3).unwrap();
        for (i, p) in m.vertices.iter().enumerate() {
            let j = r.jet(i, &f);
            assert!((j.grad.x - (2.0 * p.x * p.y + 1.0)).abs() < 1e-9);
            assert!((j.grad.y - (p.x * p.x - 6.0 * p.y * p.y)).abs() < 1e-9);
            assert!((j.hess.0[0][1] - 2.0 * p.x).abs() < 1e-8);
            assert!((j.hess.0[1][1] + 12.0 * p.y).abs() < 1e-8);
            let t = r.third(i, &f);
            assert!((t[3] + 12.0).abs() < 1e-6 && (t[1] - 2.0).abs() < 1e-6);
        }
    }
}
