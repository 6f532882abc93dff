use crate::error::{Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    /// Free surface S.
    Surface,
    /// Bottom B.
    Bottom,
    /// Truncation boundary of model sectors, Dirichlet with auxiliary data.
    Auxiliary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming P1 triangulation with tagged boundary.
///
/// `surface_nodes` runs along S with the fluid on the right, so the outward
/// normal is the counter-clockwise rotation of the tangent. `bottom_nodes`
/// is an ordered path along B.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub surface_nodes: Vec<usize>,
    pub bottom_nodes: Vec<usize>,
    pub aux_nodes: Vec<usize>,
    pub contact_nodes: Vec<usize>,
    pub grading: f64,
    pub h: f64,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(pc - pa)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Exact integral of `y` over the polygonal domain.
    pub fn moment_y(&self) -> f64 {
        self.triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| self.signed_area(t) * tri.iter().map(|&i| self.vertices[i].y).sum::<f64>() / 3.0)
            .sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary.iter().map(|e| (self.vertices[e.nodes[1]] - self.vertices[e.nodes[0]]).norm()).sum()
    }

    pub fn mask(&self, nodes: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.n_vertices()];
        for &i in nodes {
            m[i] = true;
        }
        m
    }

    pub fn surface_mask(&self) -> Vec<bool> {
        self.mask(&self.surface_nodes)
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_vertices()];
        for e in &self.boundary {
            m[e.nodes[0]] = true;
            m[e.nodes[1]] = true;
        }
        m
    }

    pub fn edges_with(&self, tag: BoundaryTag) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.boundary.iter().filter(move |e| e.tag == tag).map(|e| e.nodes)
    }

    /// Surface vertex positions in path order.
    pub fn surface_points(&self) -> Vec<Vec2> {
        self.surface_nodes.iter().map(|&i| self.vertices[i]).collect()
    }

    /// Largest element diameter.
    pub fn max_diameter(&self) -> f64 {
        self.triangles.iter().map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn diameter(&self, t: &[usize; 3]) -> f64 {
        let p = t.map(|i| self.vertices[i]);
        (p[0] - p[1]).norm().max((p[1] - p[2]).norm()).max((p[2] - p[0]).norm())
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Structural checks: orientation, conformity, boundary consistency.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let a = self.signed_area(t);
            if a <= 0.0 || !a.is_finite() {
                return Err(Error::InvertedElement { index: t, area: a });
            }
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary_count = 0;
        for (e, c) in &count {
            match c {
                1 => boundary_count += 1,
                2 => {}
                _ => return Err(Error::InvalidInput(format!("non-conforming edge {:?} shared by {c} triangles", e))),
            }
        }
        if boundary_count != self.boundary.len() {
            return Err(Error::InvalidInput(format!(
                "boundary tags cover {} edges, triangulation has {boundary_count}",
                self.boundary.len()
            )));
        }
        for e in &self.boundary {
            let (a, b) = (e.nodes[0], e.nodes[1]);
            if count.get(&(a.min(b), a.max(b))) != Some(&1) {
                return Err(Error::InvalidInput(format!("tagged edge {:?} is not a boundary edge", e.nodes)));
            }
        }
        Ok(())
    }

    /// Vertex to vertex adjacency, sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Vertex to incident triangles.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &i in t {
                vt[i].push(k);
            }
        }
        vt
    }

    /// Copy of the mesh with vertices moved.
    pub fn with_vertices(&self, vertices: Vec<Vec2>) -> Mesh {
        Mesh { vertices, ..self.clone() }
    }

    pub fn translated(&self, d: Vec2) -> Mesh {
        self.with_vertices(self.vertices.iter().map(|&p| p + d).collect())
    }
}

/// Interchange format for domains and meshes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshJson {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_tags: Vec<BoundaryEdge>,
    pub contact_points: Vec<Vec2>,
    pub angles: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh {
        Mesh {
            vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            boundary: vec![
                BoundaryEdge { nodes: [3, 2], tag: BoundaryTag::Surface },
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::Bottom },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Bottom },
                BoundaryEdge { nodes: [3, 0], tag: BoundaryTag::Bottom },
            ],
            surface_nodes: vec![3, 2],
            bottom_nodes: vec![3, 0, 1, 2],
            aux_nodes: vec![],
            contact_nodes: vec![3, 2],
            grading: 1.0,
            h: 1.0,
        }
    }

    #[test]
    fn valid_square() {
        let m = square();
        m.validate().unwrap();
        assert_eq!(m.area(), 1.0);
        assert_eq!(m.boundary_length(), 4.0);
        assert!((m.moment_y() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn detects_inversion() {
        let mut m = square();
        m.triangles[0] = [0, 2, 1];
        assert!(matches!(m.validate(), Err(Error::InvertedElement { index: 0, .. })));
    }

    #[test]
    fn detects_missing_tag() {
        let mut m = square();
        m.boundary.pop();
        assert!(m.validate().is_err());
    }
}
