use super::mesh::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::vec2::Vec2;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
use std::collections::HashSet;

fn ccw(v: &[Vec2], t: [usize; 3]) -> [usize; 3] {
    let [a, b, c] = t;
    if (v[b] - v[a]).cross(v[c] - v[a]) < 0.0 {
        [a, c, b]
    } else {
        t
    }
}

fn path_edges(path: &[usize], tag: BoundaryTag) -> impl Iterator<Item = BoundaryEdge> + '_ {
    path.windows(2).map(move |w| BoundaryEdge { nodes: [w[0], w[1]], tag })
}

/// Polar mesh of the sector `0 < theta < omega`, `r < radius`, with rings
/// `r_j = radius (j/n)^beta` and angular counts growing with the radius.
///
/// S is the edge `theta = 0` (listed from the arc to the corner), B the
/// edge `theta = omega` (corner outward) and the arc is auxiliary.
pub fn sector_mesh(omega: f64, radius: f64, h: f64, beta: f64) -> Mesh {
    let n = ((beta * radius / h).ceil() as usize).max(2);
    let r: Vec<f64> = (0..=n).map(|j| radius * (j as f64 / n as f64).powf(beta)).collect();
    let m_min = ((omega / (std::f64::consts::PI / 3.0)).ceil() as usize).max(1);
    let mut counts = vec![0usize; n + 1];
    for j in 1..=n {
        let dr = r[j] - r[j - 1];
        let m = ((omega * r[j] / dr).round() as usize).max(m_min);
        counts[j] = m.max(counts[j - 1]);
    }
    let mut vertices = vec![Vec2::ZERO];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    let mut angles: Vec<Vec<f64>> = vec![vec![0.0]];
    for j in 1..=n {
        let m = counts[j];
        let mut ids = Vec::with_capacity(m + 1);
        let mut th = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let t = omega * k as f64 / m as f64;
            ids.push(vertices.len());
            th.push(t);
            vertices.push(Vec2::polar(r[j], t));
        }
        rings.push(ids);
        angles.push(th);
    }
    let mut triangles = Vec::new();
    for k in 0..counts[1] {
        triangles.push(ccw(&vertices, [0, rings[1][k], rings[1][k + 1]]));
    }
    for j in 1..n {
        let (a, b) = (&rings[j], &rings[j + 1]);
        let (ta, tb) = (&angles[j], &angles[j + 1]);
        let (mut i, mut k) = (0, 0);
        while i + 1 < a.len() || k + 1 < b.len() {
            let adv_inner = if i + 1 == a.len() {
                false
            } else if k + 1 == b.len() {
                true
            } else {
                ta[i + 1] <= tb[k + 1]
            };
            if adv_inner {
                triangles.push(ccw(&vertices, [a[i], a[i + 1], b[k]]));
                i += 1;
            } else {
                triangles.push(ccw(&vertices, [a[i], b[k + 1], b[k]]));
                k += 1;
            }
        }
    }
    let surface_nodes: Vec<usize> = (0..=n).rev().map(|j| rings[j][0]).collect();
    let bottom_nodes: Vec<usize> = (0..=n).map(|j| *rings[j].last().unwrap()).collect();
    let aux_nodes = rings[n].clone();
    let mut boundary: Vec<BoundaryEdge> = path_edges(&surface_nodes, BoundaryTag::Surface).collect();
    boundary.extend(path_edges(&bottom_nodes, BoundaryTag::Bottom));
    boundary.extend(path_edges(&aux_nodes, BoundaryTag::Auxiliary));
    Mesh {
        vertices,
        triangles,
        boundary,
        surface_nodes,
        bottom_nodes,
        aux_nodes,
        contact_nodes: vec![0],
        grading: beta,
        h,
    }
}

/// Structured criss-cross mesh of `[-width/2, width/2] x [-depth, 0]`:
/// each cell is split into four triangles by its center. Grid vertex
/// `(i, j)` has index `j (nx + 1) + i`; cell centers follow the grid.
pub fn box_mesh(width: f64, depth: f64, h: f64) -> Mesh {
    let nx = ((width / h).round() as usize).max(2);
    let ny = ((depth / h).round() as usize).max(2);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let center = |i: usize, j: usize| (nx + 1) * (ny + 1) + j * nx + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    let at = |x: f64, y: f64| Vec2::new(-width / 2.0 + width * x / nx as f64, -depth + depth * y / ny as f64);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(at(i as f64, j as f64));
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(at(i as f64 + 0.5, j as f64 + 0.5));
        }
    }
    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d, m) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1), center(i, j));
            triangles.extend([[a, b, m], [b, c, m], [c, d, m], [d, a, m]]);
        }
    }
    let surface_nodes: Vec<usize> = (0..=nx).map(|i| id(i, ny)).collect();
    let mut bottom_nodes: Vec<usize> = (0..=ny).rev().map(|j| id(0, j)).collect();
    bottom_nodes.extend((1..=nx).map(|i| id(i, 0)));
    bottom_nodes.extend((1..=ny).map(|j| id(nx, j)));
    let mut boundary: Vec<BoundaryEdge> = path_edges(&surface_nodes, BoundaryTag::Surface).collect();
    boundary.extend(path_edges(&bottom_nodes, BoundaryTag::Bottom));
    Mesh {
        vertices,
        triangles,
        boundary,
        contact_nodes: vec![surface_nodes[0], *surface_nodes.last().unwrap()],
        surface_nodes,
        bottom_nodes,
        aux_nodes: vec![],
        grading: 1.0,
        h,
    }
}

/// Quality Delaunay mesh of the region bounded by the surface path
/// (left contact to right contact) and the bottom path (left contact to
/// right contact, endpoints shared). Boundary nodes are kept exactly.
pub fn polygon_mesh(surface: &[Vec2], bottom: &[Vec2], h: f64) -> Result<Mesh> {
    let ns = surface.len();
    let nb = bottom.len();
    if ns < 3 || nb < 3 {
        return Err(Error::InvalidInput("polygon mesher needs at least 3 nodes per side".into()));
    }
    // boundary loop: surface left to right, then bottom right to left
    let mut lp: Vec<Vec2> = surface.to_vec();
    lp.extend(bottom[1..nb - 1].iter().rev());
    let nl = lp.len();
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(nl);
    for p in &lp {
        let h = cdt
            .insert(spade::mitigate_underflow(Point2::new(p.x, p.y)))
            .map_err(|e| Error::InvalidInput(format!("mesher rejected vertex: {e:?}")))?;
        handles.push(h);
    }
    for k in 0..nl {
        let (a, b) = (handles[k], handles[(k + 1) % nl]);
        if !cdt.can_add_constraint(a, b) {
            return Err(Error::InvalidInput("boundary polygon self-intersects".into()));
        }
        cdt.add_constraint(a, b);
    }
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .keep_constraint_edges()
        .with_angle_limit(AngleLimit::from_deg(28.0))
        .with_max_allowed_area(0.5 * h * h)
        .with_max_additional_vertices(200 * (nl + 10) + (40.0 / (h * h)) as usize);
    let result = cdt.refine(params);
    let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();
    let mut index_of = vec![usize::MAX; cdt.num_vertices()];
    let mut vertices = Vec::with_capacity(cdt.num_vertices());
    for (k, h) in handles.iter().enumerate() {
        index_of[h.index()] = k;
        vertices.push(lp[k]);
    }
    for v in cdt.vertices() {
        if index_of[v.fix().index()] == usize::MAX {
            index_of[v.fix().index()] = vertices.len();
            let p = v.position();
            vertices.push(Vec2::new(p.x, p.y));
        }
    }
    let mut triangles = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let vs = f.vertices().map(|v| index_of[v.fix().index()]);
        triangles.push(ccw(&vertices, vs));
    }
    let surface_nodes: Vec<usize> = (0..ns).collect();
    let mut bottom_nodes = vec![0];
    bottom_nodes.extend((ns..nl).rev());
    bottom_nodes.push(ns - 1);
    let mut boundary: Vec<BoundaryEdge> = path_edges(&surface_nodes, BoundaryTag::Surface).collect();
    boundary.extend(path_edges(&bottom_nodes, BoundaryTag::Bottom));
    let mesh = Mesh {
        vertices,
        triangles,
        boundary,
        contact_nodes: vec![0, ns - 1],
        surface_nodes,
        bottom_nodes,
        aux_nodes: vec![],
        grading: 1.0,
        h,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sector_mesh_is_valid() {
        for (w, b) in [(PI / 8.0, 1.0), (3.0 * PI / 4.0, 1.5), (PI / 2.0, 3.0)] {
            let m = sector_mesh(w, 1.0, 0.1, b);
            m.validate().unwrap();
            assert!((m.area() - 0.5 * w).abs() < 0.02 * w);
        }
    }

    #[test]
    fn box_mesh_is_valid() {
        let m = box_mesh(2.0, 1.0, 0.1);
        m.validate().unwrap();
        assert!((m.area() - 2.0).abs() < 1e-12);
        assert!((m.boundary_length() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_mesh_keeps_boundary() {
        let s: Vec<Vec2> = (0..=10).map(|i| Vec2::new(-1.0 + 0.2 * i as f64, 0.0)).collect();
        let b: Vec<Vec2> = (0..=10)
            .map(|i| {
                let x = -1.0 + 0.2 * i as f64;
                Vec2::new(x, -0.5 * (PI * x / 2.0).cos())
            })
            .collect();
        let m = polygon_mesh(&s, &b, 0.2).unwrap();
        for (k, p) in s.iter().enumerate() {
            assert_eq!(m.vertices[k], *p);
        }
        assert_eq!(m.bottom_nodes.len(), b.len());
        for (k, &i) in m.bottom_nodes.iter().enumerate() {
            assert!((m.vertices[i] - b[k]).norm() < 1e-15);
        }
    }
}
