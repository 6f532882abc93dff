use super::{BottomShape, CornerDomain, Mesh, SurfaceGraph};
use crate::error::Result;
use crate::fem::{stiffness, CsrMatrix, SpdSolver};
use crate::vec2::Vec2;

/// Fraction of the bottom length over which contact point motion decays.
const SLIDE_FRACTION: f64 = 0.25;

enum Mode {
    /// Columns stretched linearly from the floor (box basins); each vertex
    /// reads the surface height interpolated at its abscissa.
    Vertical { floor: f64, rest: f64, weights: Vec<(usize, f64)> },
    /// Harmonic extension of the boundary displacement.
    Harmonic { solver: SpdSolver, k: CsrMatrix, local: Vec<usize>, fixed: Vec<bool>, slide_left: Vec<f64>, slide_right: Vec<f64> },
}

/// Maps surface graphs to meshes of the corresponding fluid region by
/// moving the vertices of a fixed reference mesh.
pub struct Deformer {
    reference: CornerDomain,
    mode: Mode,
}

impl Deformer {
    pub fn new(reference: &CornerDomain) -> Result<Self> {
        let mesh = &reference.mesh;
        let mode = match reference.bottom.shape {
            BottomShape::Box { depth, .. } => {
                let xs: Vec<f64> = mesh.surface_nodes.iter().map(|&i| mesh.vertices[i].x).collect();
                let weights = mesh
                    .vertices
                    .iter()
                    .map(|p| {
                        let k = xs.partition_point(|&x| x <= p.x).clamp(1, xs.len() - 1) - 1;
                        (k, (p.x - xs[k]) / (xs[k + 1] - xs[k]))
                    })
                    .collect();
                let floor = reference.bottom.offset.y - depth;
                Mode::Vertical { floor, rest: floor + depth, weights }
            }
            _ => {
                let fixed = mesh.boundary_mask();
                let k = stiffness(mesh);
                let free: Vec<bool> = fixed.iter().map(|f| !f).collect();
                let (kff, local) = k.principal(&free);
                let solver = SpdSolver::new(&kff)?;
                let pts: Vec<Vec2> = mesh.bottom_nodes.iter().map(|&i| mesh.vertices[i]).collect();
                let s = super::cumulative_length(&pts);
                let total = *s.last().unwrap();
                let l = SLIDE_FRACTION * total;
                let slide_left = s.iter().map(|d| (1.0 - d / l).max(0.0)).collect();
                let slide_right = s.iter().map(|d| (1.0 - (total - d) / l).max(0.0)).collect();
                Mode::Harmonic { solver, k, local, fixed, slide_left, slide_right }
            }
        };
        Ok(Deformer { reference: reference.clone(), mode })
    }

    pub fn reference(&self) -> &CornerDomain {
        &self.reference
    }

    /// Deformed mesh whose surface nodes follow `surface`.
    pub fn mesh(&self, surface: &SurfaceGraph) -> Result<Mesh> {
        let m0 = &self.reference.mesh;
        let curve = surface.curve();
        let mut v = m0.vertices.clone();
        match &self.mode {
            Mode::Vertical { floor, rest, weights } => {
                for (i, p) in v.iter_mut().enumerate() {
                    let (k, w) = weights[i];
                    let top = (1.0 - w) * curve[k].y + w * curve[k + 1].y;
                    let frac = (m0.vertices[i].y - floor) / (rest - floor);
                    p.y = floor + frac * (top - floor);
                }
            }
            Mode::Harmonic { solver, k, local, fixed, slide_left, slide_right } => {
                let n = m0.n_vertices();
                let mut d = vec![Vec2::ZERO; n];
                let b = &self.reference.bottom;
                if matches!(b.shape, BottomShape::Cosine { .. }) {
                    let nb = m0.bottom_nodes.len();
                    let dl = curve[0].x - m0.vertices[m0.bottom_nodes[0]].x;
                    let dr = curve[curve.len() - 1].x - m0.vertices[m0.bottom_nodes[nb - 1]].x;
                    for (k, &i) in m0.bottom_nodes.iter().enumerate() {
                        let x = m0.vertices[i].x + dl * slide_left[k] + dr * slide_right[k];
                        d[i] = Vec2::new(x, b.height(x)) - m0.vertices[i];
                    }
                }
                for (k, &i) in m0.surface_nodes.iter().enumerate() {
                    d[i] = curve[k] - m0.vertices[i];
                }
                for comp in 0..2 {
                    let get = |p: Vec2| if comp == 0 { p.x } else { p.y };
                    let mut rhs = vec![0.0; solver.n()];
                    for i in 0..n {
                        if fixed[i] {
                            continue;
                        }
                        rhs[local[i]] = -k.row(i).filter(|&(j, _)| fixed[j]).map(|(j, a)| a * get(d[j])).sum::<f64>();
                    }
                    let x = solver.solve(&rhs)?;
                    for i in 0..n {
                        if !fixed[i] {
                            if comp == 0 {
                                d[i].x = x[local[i]];
                            } else {
                                d[i].y = x[local[i]];
                            }
                        }
                    }
                }
                for (p, dd) in v.iter_mut().zip(&d) {
                    *p += *dd;
                }
            }
        }
        let mesh = m0.with_vertices(v);
        mesh.validate()?;
        Ok(mesh)
    }

    /// Domain for a surface graph on the reference curve.
    pub fn domain(&self, surface: &SurfaceGraph) -> Result<CornerDomain> {
        let mesh = self.mesh(surface)?;
        let r = &self.reference;
        CornerDomain::assemble(r.kind, r.bottom.clone(), surface.clone(), mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_beach, build_box, BeachOptions, SurfaceProfile};
    use std::f64::consts::PI;

    #[test]
    fn box_columns_follow_surface() {
        let d = build_box(1.0, 1.0, 0.1).unwrap();
        let def = Deformer::new(&d).unwrap();
        let eta: Vec<f64> = (0..d.surface.eta.len()).map(|i| 0.05 * (i as f64).sin()).collect();
        let s = d.surface.reference.graph(eta.clone());
        let m = def.mesh(&s).unwrap();
        for (k, &i) in m.surface_nodes.iter().enumerate() {
            assert!((m.vertices[i].y - eta[k]).abs() < 1e-14);
        }
        let area: f64 = m.area();
        let sp = m.surface_points();
        let mean: f64 = sp.windows(2).zip(eta.windows(2)).map(|(p, e)| (p[1].x - p[0].x).abs() * 0.5 * (e[0] + e[1])).sum();
        assert!((area - 1.0 - mean).abs() < 1e-12);
    }

    #[test]
    fn beach_contact_slides_on_bottom() {
        let d = build_beach(PI / 5.0, &SurfaceProfile::Flat, 0.1, &BeachOptions::default()).unwrap();
        let def = Deformer::new(&d).unwrap();
        let n = d.surface.eta.len();
        let eta: Vec<f64> = (0..n).map(|i| 0.02 * (PI * i as f64 / (n - 1) as f64).cos()).collect();
        let s = d.surface.reference.graph(eta);
        let m = def.mesh(&s).unwrap();
        for &i in &m.bottom_nodes {
            let p = m.vertices[i];
            assert!((p.y - d.bottom.height(p.x)).abs() < 1e-12);
        }
    }
}
