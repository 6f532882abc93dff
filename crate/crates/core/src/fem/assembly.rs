use super::sparse::CsrMatrix;
use crate::geometry::{BoundaryTag, Mesh};
use crate::vec2::Vec2;
use std::collections::HashMap;

/// Area and basis gradients of a triangle.
pub fn gradients(mesh: &Mesh, t: usize) -> (f64, [Vec2; 3]) {
    let tri = mesh.triangles[t];
    let p = tri.map(|i| mesh.vertices[i]);
    let a2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let g = |j: usize, k: usize| Vec2::new(p[j].y - p[k].y, p[k].x - p[j].x) / a2;
    (0.5 * a2, [g(1, 2), g(2, 0), g(0, 1)])
}

fn element_triplets<F>(mesh: &Mesh, local: F) -> Vec<(usize, usize, f64)>
where
    F: Fn(usize) -> [[f64; 3]; 3] + Sync,
{
    let emit = |t: usize, out: &mut Vec<(usize, usize, f64)>| {
        let k = local(t);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                out.push((tri[a], tri[b], k[a][b]));
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let chunk = 4096;
        let nt = mesh.triangles.len();
        let parts: Vec<Vec<(usize, usize, f64)>> = (0..nt.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut out = Vec::with_capacity(9 * chunk);
                for t in c * chunk..((c + 1) * chunk).min(nt) {
                    emit(t, &mut out);
                }
                out
            })
            .collect();
        parts.concat()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut out = Vec::with_capacity(9 * mesh.triangles.len());
        for t in 0..mesh.triangles.len() {
            emit(t, &mut out);
        }
        out
    }
}

/// Stiffness matrix of the form `int grad u . grad v`.
pub fn stiffness(mesh: &Mesh) -> CsrMatrix {
    let t = element_triplets(mesh, |t| {
        let (area, g) = gradients(mesh, t);
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] = area * g[a].dot(g[b]);
            }
        }
        k
    });
    CsrMatrix::from_triplets(mesh.n_vertices(), t)
}

/// Consistent P1 mass matrix.
pub fn mass(mesh: &Mesh) -> CsrMatrix {
    let t = element_triplets(mesh, |t| {
        let a = mesh.signed_area(t) / 12.0;
        let mut k = [[a; 3]; 3];
        for (i, row) in k.iter_mut().enumerate() {
            row[i] = 2.0 * a;
        }
        k
    });
    CsrMatrix::from_triplets(mesh.n_vertices(), t)
}

/// `int g phi_i` for a P1 field `g`.
pub fn volume_load(mesh: &Mesh, g: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.signed_area(t) / 12.0;
        let s: f64 = tri.iter().map(|&i| g[i]).sum();
        for &i in tri {
            b[i] += a * (s + g[i]);
        }
    }
    b
}

/// `int g phi_i` for an elementwise constant `g`.
pub fn volume_load_p0(mesh: &Mesh, g: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.signed_area(t) / 3.0 * g[t];
        for &i in tri {
            b[i] += a;
        }
    }
    b
}

/// Outward unit normal of each tagged boundary edge, in `mesh.boundary` order.
pub fn edge_normals(mesh: &Mesh) -> Vec<Vec2> {
    let mut opposite: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            opposite.insert((a.min(b), a.max(b)), tri[(k + 2) % 3]);
        }
    }
    mesh.boundary
        .iter()
        .map(|e| {
            let [a, b] = e.nodes;
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let c = mesh.vertices[opposite[&(a.min(b), a.max(b))]];
            let n = (pb - pa).perp().normalized();
            if n.dot(c - pa) > 0.0 {
                -n
            } else {
                n
            }
        })
        .collect()
}

/// `int_{edges with tag} h phi_i` for P1 boundary data `h` (indexed by vertex).
pub fn boundary_load(mesh: &Mesh, tag: BoundaryTag, h: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for [a, c] in mesh.edges_with(tag) {
        let l = (mesh.vertices[c] - mesh.vertices[a]).norm() / 6.0;
        b[a] += l * (2.0 * h[a] + h[c]);
        b[c] += l * (h[a] + 2.0 * h[c]);
    }
    b
}

/// `int_{edges with tag} q_e phi_i` where `q_e = f(edge nodes, outward normal)`
/// is constant on each edge.
pub fn edge_constant_load(mesh: &Mesh, tag: BoundaryTag, f: impl Fn([usize; 2], Vec2) -> f64) -> Vec<f64> {
    let normals = edge_normals(mesh);
    let mut b = vec![0.0; mesh.n_vertices()];
    for (e, n) in mesh.boundary.iter().zip(normals) {
        if e.tag != tag {
            continue;
        }
        let [a, c] = e.nodes;
        let l = 0.5 * (mesh.vertices[c] - mesh.vertices[a]).norm() * f(e.nodes, n);
        b[a] += l;
        b[c] += l;
    }
    b
}

/// Elementwise gradient of a P1 field.
pub fn element_gradients(mesh: &Mesh, u: &[f64]) -> Vec<Vec2> {
    (0..mesh.triangles.len())
        .map(|t| {
            let (_, g) = gradients(mesh, t);
            let tri = mesh.triangles[t];
            g[0] * u[tri[0]] + g[1] * u[tri[1]] + g[2] * u[tri[2]]
        })
        .collect()
}

/// Tridiagonal consistent mass matrix of a polyline: (sub, diag, sup).
pub fn path_mass(points: &[Vec2]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = points.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let l = (points[i + 1] - points[i]).norm();
        diag[i] += l / 3.0;
        diag[i + 1] += l / 3.0;
        off[i] = l / 6.0;
    }
    (off.clone(), diag, off)
}

/// Applies the path mass matrix.
pub fn path_mass_apply(points: &[Vec2], f: &[f64]) -> Vec<f64> {
    let (sub, diag, sup) = path_mass(points);
    let n = f.len();
    (0..n)
        .map(|i| {
            let mut r = diag[i] * f[i];
            if i > 0 {
                r += sub[i - 1] * f[i - 1];
            }
            if i + 1 < n {
                r += sup[i] * f[i + 1];
            }
            r
        })
        .collect()
}

/// Exact integral of the product of two P1 functions along a polyline.
pub fn path_inner(points: &[Vec2], f: &[f64], g: &[f64]) -> f64 {
    path_mass_apply(points, f).iter().zip(g).map(|(a, b)| a * b).sum()
}

/// Integral of a P1 function along a polyline.
pub fn path_integral(points: &[Vec2], f: &[f64]) -> f64 {
    (0..points.len() - 1).map(|i| 0.5 * (points[i + 1] - points[i]).norm() * (f[i] + f[i + 1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesher::box_mesh;

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let m = box_mesh(1.0, 1.0, 0.1);
        let k = stiffness(&m);
        assert!(k.symmetry_defect() < 1e-14);
        for r in k.matvec(&vec![1.0; m.n_vertices()]) {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn mass_integrates_linear_functions() {
        let m = box_mesh(2.0, 1.0, 0.25);
        let ms = mass(&m);
        let one = vec![1.0; m.n_vertices()];
        let y: Vec<f64> = m.vertices.iter().map(|p| p.y).collect();
        let s: f64 = ms.matvec(&y).iter().sum();
        assert!((s - (-1.0)).abs() < 1e-12);
        let a: f64 = ms.matvec(&one).iter().sum();
        assert!((a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn edge_normals_point_outward() {
        let m = box_mesh(1.0, 1.0, 0.25);
        let n = edge_normals(&m);
        for (e, nn) in m.boundary.iter().zip(n) {
            let mid = (m.vertices[e.nodes[0]] + m.vertices[e.nodes[1]]) / 2.0;
            let probe = mid + nn * 0.01;
            assert!(probe.x.abs() > 0.5 || probe.y > 0.0 || probe.y < -1.0);
        }
    }
}
