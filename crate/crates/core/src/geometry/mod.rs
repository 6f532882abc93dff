//! Corner domains: sectors, boxes and beaches, their meshes, normals and
//! the graph representation of the free surface over a reference curve.

pub mod bottom;
pub mod deform;
pub mod mesh;
pub mod mesher;
pub mod surface;

pub use bottom::{Bottom, BottomFrame, BottomShape};
pub use deform::Deformer;
pub use mesh::{BoundaryEdge, BoundaryTag, Mesh, MeshJson};
pub use surface::{
    advect_surface, curvature, cumulative_length, derivative_along, neighborhood_distance, polyline_frame,
    ContactEnd, ReferenceSurface, SurfaceGraph,
};

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

/// Admissible contact angle band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for AngleBounds {
    fn default() -> Self {
        AngleBounds { min: PI / 16.0, max: PI / 3.0 }
    }
}

impl AngleBounds {
    pub fn check(&self, measured: f64) -> Result<()> {
        if measured < self.min || measured > self.max || !measured.is_finite() {
            return Err(Error::AngleBounds { measured, min: self.min, max: self.max });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainKind {
    Sector { omega: f64, radius: f64 },
    Box { width: f64, depth: f64 },
    Beach { omega: f64, half_width: f64, depth: f64 },
}

/// Initial shape of the free surface relative to the reference curve.
/// `u` is the normalized arclength in [0, 1].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SurfaceProfile {
    #[default]
    Flat,
    /// `amplitude cos(k pi u)`.
    Mode { k: usize, amplitude: f64 },
    /// `amplitude cos^2(pi (u - center) / (2 width))` on `|u - center| < width`.
    Bump { amplitude: f64, center: f64, width: f64 },
    /// Values per reference node.
    Nodal { values: Vec<f64> },
}

impl SurfaceProfile {
    pub fn sample(&self, reference: &ReferenceSurface) -> Result<Vec<f64>> {
        let len = reference.length();
        let u: Vec<f64> = reference.arclength.iter().map(|s| s / len).collect();
        Ok(match self {
            SurfaceProfile::Flat => vec![0.0; u.len()],
            SurfaceProfile::Mode { k, amplitude } => u.iter().map(|u| amplitude * (*k as f64 * PI * u).cos()).collect(),
            SurfaceProfile::Bump { amplitude, center, width } => u
                .iter()
                .map(|u| {
                    let d = (u - center) / width;
                    if d.abs() < 1.0 {
                        amplitude * (FRAC_PI_2 * d).cos().powi(2)
                    } else {
                        0.0
                    }
                })
                .collect(),
            SurfaceProfile::Nodal { values } => {
                if values.len() != u.len() {
                    return Err(Error::InvalidInput(format!(
                        "nodal profile has {} values, surface has {} nodes",
                        values.len(),
                        u.len()
                    )));
                }
                values.clone()
            }
        })
    }
}

/// Fluid region with its tagged mesh, boundary normals and contact data.
#[derive(Clone, Debug)]
pub struct CornerDomain {
    pub kind: DomainKind,
    pub bottom: Bottom,
    pub surface: SurfaceGraph,
    pub mesh: Mesh,
    pub contact_points: Vec<Vec2>,
    pub contact_angles: Vec<f64>,
    /// Outward normal N per surface node, in `mesh.surface_nodes` order.
    pub surface_normals: Vec<Vec2>,
    /// Outward normal nu per bottom node (analytic), in `mesh.bottom_nodes` order.
    pub bottom_normals: Vec<Vec2>,
}

impl CornerDomain {
    /// Assembles normals and contact data for a mesh that matches `surface`.
    pub fn assemble(kind: DomainKind, bottom: Bottom, surface: SurfaceGraph, mesh: Mesh) -> Result<Self> {
        mesh.validate()?;
        let pts = mesh.surface_points();
        let (_, surface_normals) = polyline_frame(&pts)?;
        let bottom_normals = mesh.bottom_nodes.iter().map(|&i| bottom.frame(mesh.vertices[i]).normal).collect();
        let mut contact_points = Vec::new();
        let mut contact_angles = Vec::new();
        for &c in &mesh.contact_nodes {
            let k = mesh.surface_nodes.iter().position(|&i| i == c).expect("contact node on surface");
            let p = mesh.vertices[c];
            let nu = bottom.frame(p).normal;
            contact_points.push(p);
            contact_angles.push((-nu.dot(surface_normals[k])).clamp(-1.0, 1.0).acos());
        }
        Ok(CornerDomain { kind, bottom, surface, mesh, contact_points, contact_angles, surface_normals, bottom_normals })
    }

    /// `<nu, N>` at each contact point.
    pub fn contact_cosines(&self) -> Vec<f64> {
        self.contact_angles.iter().map(|w| -w.cos()).collect()
    }

    /// Position of each surface node within `mesh.surface_nodes`, indexed by vertex.
    pub fn surface_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.mesh.n_vertices()];
        for (k, &i) in self.mesh.surface_nodes.iter().enumerate() {
            idx[i] = Some(k);
        }
        idx
    }

    pub fn check_angles(&self, bounds: &AngleBounds) -> Result<()> {
        for &w in &self.contact_angles {
            bounds.check(w)?;
        }
        Ok(())
    }

    /// Same configuration moved horizontally by `dx`.
    pub fn translated(&self, dx: f64) -> Result<Self> {
        let d = Vec2::new(dx, 0.0);
        let r = &self.surface.reference;
        let shift = |c: Option<ContactEnd>| c.map(|c| ContactEnd { point: c.point + d, tangent: c.tangent });
        let bottom = self.bottom.translated(d);
        let reference = Arc::new(ReferenceSurface::new(
            r.nodes.iter().map(|&p| p + d).collect(),
            bottom.clone(),
            shift(r.left),
            shift(r.right),
        )?);
        let surface = reference.graph(self.surface.eta.clone());
        let kind = self.kind;
        CornerDomain::assemble(kind, bottom, surface, self.mesh.translated(d))
    }

    /// Serializable summary.
    pub fn to_json(&self) -> MeshJson {
        MeshJson {
            vertices: self.mesh.vertices.clone(),
            triangles: self.mesh.triangles.clone(),
            boundary_tags: self.mesh.boundary.clone(),
            contact_points: self.contact_points.clone(),
            angles: self.contact_angles.clone(),
        }
    }

    /// Analytic outward normal of the bottom at an arbitrary point of B.
    pub fn bottom_frame(&self, p: Vec2) -> BottomFrame {
        self.bottom.frame(p)
    }
}

/// First Dirichlet-Neumann singular exponent pi / (2 omega).
pub fn first_dn_exponent(omega: f64) -> f64 {
    PI / (2.0 * omega)
}

/// Default grading exponent max(1, 2 / lambda_1).
pub fn default_grading(omega: f64) -> f64 {
    (2.0 / first_dn_exponent(omega)).max(1.0)
}

/// Model sector with the default grading.
pub fn build_sector(omega: f64, radius: f64, h: f64) -> Result<CornerDomain> {
    build_sector_graded(omega, radius, h, default_grading(omega))
}

/// Sector `0 < theta < omega`, `r < radius`: Dirichlet edge S at
/// `theta = 0`, Neumann edge B at `theta = omega`, auxiliary arc.
pub fn build_sector_graded(omega: f64, radius: f64, h: f64, beta: f64) -> Result<CornerDomain> {
    if !(omega > 0.0 && omega < PI) {
        return Err(Error::InvalidInput(format!("sector angle {omega} outside (0, pi)")));
    }
    if !(radius > 0.0 && h > 0.0 && h <= radius && beta >= 1.0) {
        return Err(Error::InvalidInput(format!("sector radius {radius}, h {h}, grading {beta} rejected")));
    }
    let mesh = mesher::sector_mesh(omega, radius, h, beta);
    let bottom = Bottom::ray(omega);
    let nodes = mesh.surface_points();
    let corner = ContactEnd { point: Vec2::ZERO, tangent: Vec2::polar(1.0, omega) };
    let reference = Arc::new(ReferenceSurface::new(nodes, bottom.clone(), None, Some(corner))?);
    let surface = reference.flat();
    CornerDomain::assemble(DomainKind::Sector { omega, radius }, bottom, surface, mesh)
}

/// Rectangular basin `[-width/2, width/2] x [-depth, 0]`.
pub fn build_box(width: f64, depth: f64, h: f64) -> Result<CornerDomain> {
    if !(width > 0.0 && depth > 0.0 && h > 0.0) {
        return Err(Error::InvalidInput(format!("box {width} x {depth} with h {h} rejected")));
    }
    let mesh = mesher::box_mesh(width, depth, h);
    let bottom = Bottom::rect(width, depth);
    let up = Vec2::new(0.0, 1.0);
    let nodes = mesh.surface_points();
    let left = ContactEnd { point: nodes[0], tangent: up };
    let right = ContactEnd { point: *nodes.last().unwrap(), tangent: up };
    let reference = Arc::new(ReferenceSurface::new(nodes, bottom.clone(), Some(left), Some(right))?);
    let surface = reference.flat();
    CornerDomain::assemble(DomainKind::Box { width, depth }, bottom, surface, mesh)
}

/// Beach options.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeachOptions {
    pub half_width: f64,
    pub bounds: AngleBounds,
}

impl Default for BeachOptions {
    fn default() -> Self {
        BeachOptions { half_width: 1.0, bounds: AngleBounds::default() }
    }
}

/// Reference curve of the cosine basin: the still water line.
pub fn beach_reference(omega: f64, h: f64, opts: &BeachOptions) -> Result<Arc<ReferenceSurface>> {
    let l = opts.half_width;
    let bottom = Bottom::cosine_for_angle(omega, l);
    let n = ((2.0 * l / h).round() as usize).max(4);
    let nodes: Vec<Vec2> = (0..=n).map(|i| Vec2::new(-l + 2.0 * l * i as f64 / n as f64, 0.0)).collect();
    let left = ContactEnd { point: nodes[0], tangent: Vec2::new(-omega.cos(), omega.sin()) };
    let right = ContactEnd { point: nodes[n], tangent: Vec2::new(omega.cos(), omega.sin()) };
    Ok(Arc::new(ReferenceSurface::new(nodes, bottom, Some(left), Some(right))?))
}

/// Nodes of the bottom graph between two contact points at arclength spacing about `h`.
pub fn bottom_path(bottom: &Bottom, left: Vec2, right: Vec2, h: f64) -> Vec<Vec2> {
    let samples = 4000;
    let xs: Vec<f64> = (0..=samples).map(|k| left.x + (right.x - left.x) * k as f64 / samples as f64).collect();
    let pts: Vec<Vec2> = xs.iter().map(|&x| Vec2::new(x, bottom.height(x))).collect();
    let s = cumulative_length(&pts);
    let total = *s.last().unwrap();
    let nb = ((total / h).round() as usize).max(4);
    let mut out = vec![left];
    let mut k = 0;
    for j in 1..nb {
        let target = total * j as f64 / nb as f64;
        while s[k + 1] < target {
            k += 1;
        }
        let t = (target - s[k]) / (s[k + 1] - s[k]);
        let x = xs[k] + t * (xs[k + 1] - xs[k]);
        out.push(Vec2::new(x, bottom.height(x)));
    }
    out.push(right);
    out
}

/// Cosine basin with contact angle `omega` at both water lines and the
/// free surface given by `profile` over the still water line.
pub fn build_beach(omega: f64, profile: &SurfaceProfile, h: f64, opts: &BeachOptions) -> Result<CornerDomain> {
    if !(omega > 0.0 && omega < FRAC_PI_2) {
        return Err(Error::InvalidInput(format!("beach angle {omega} outside (0, pi/2)")));
    }
    if !(h > 0.0 && opts.half_width > 0.0) {
        return Err(Error::InvalidInput("beach dimensions must be positive".into()));
    }
    let reference = beach_reference(omega, h, opts)?;
    let eta = profile.sample(&reference)?;
    let surface = reference.graph(eta);
    let curve = surface.curve();
    let bottom = reference.bottom.clone();
    for p in &curve[1..curve.len() - 1] {
        if bottom.clearance(*p) <= 0.0 {
            return Err(Error::InvalidInput("free surface touches the bottom".into()));
        }
    }
    let bpath = bottom_path(&bottom, curve[0], *curve.last().unwrap(), h);
    let mesh = mesher::polygon_mesh(&curve, &bpath, h)?;
    let depth = match bottom.shape {
        BottomShape::Cosine { depth, .. } => depth,
        _ => unreachable!(),
    };
    let d = CornerDomain::assemble(DomainKind::Beach { omega, half_width: opts.half_width, depth }, bottom, surface, mesh)?;
    d.check_angles(&opts.bounds)?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_reports_input_angle() {
        let d = build_sector(FRAC_PI_2, 1.0, 0.1).unwrap();
        assert!((d.contact_angles[0] - FRAC_PI_2).abs() < 1e-12);
        let d = build_sector(PI / 5.0, 1.0, 0.05).unwrap();
        assert!((d.contact_cosines()[0] + (PI / 5.0).cos()).abs() < 1e-12);
        assert!((d.contact_cosines()[0] + 0.8090).abs() < 1e-4);
        assert!(build_sector(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn box_facts() {
        let d = build_box(1.0, 1.0, 0.05).unwrap();
        for w in &d.contact_angles {
            assert!((w - FRAC_PI_2).abs() < 1e-12);
        }
        assert!((d.mesh.boundary_length() - 4.0).abs() < 1e-12);
        let d = build_box(2.0, 1.0, 0.1).unwrap();
        assert!((d.mesh.area() - 2.0).abs() < 1e-12);
        assert!(build_box(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn flat_beach_angles() {
        let d = build_beach(PI / 5.0, &SurfaceProfile::Flat, 0.05, &BeachOptions::default()).unwrap();
        for w in &d.contact_angles {
            assert!((w - PI / 5.0).abs() < 1e-3);
        }
        let d = build_beach(PI / 8.0, &SurfaceProfile::Flat, 0.05, &BeachOptions::default()).unwrap();
        for c in d.contact_cosines() {
            assert!((c + 0.9239).abs() < 1e-3);
        }
    }

    #[test]
    fn steep_bump_near_contact_violates_bounds() {
        let w = PI / 5.0;
        let depth = 2.0 * w.tan() / PI;
        let bump = SurfaceProfile::Bump { amplitude: 0.4 * depth, center: 0.97, width: 0.06 };
        let err = build_beach(w, &bump, 0.02, &BeachOptions::default()).unwrap_err();
        assert!(matches!(err, Error::AngleBounds { .. }), "{err}");
    }
}
