use super::bottom::Bottom;
use crate::error::{Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Fraction of the surface length over which the transversal field turns
/// from the normal into the bottom tangent.
pub const BLEND_FRACTION: f64 = 0.1;

/// Contact point of the reference curve together with the unit tangent of
/// M pointing away from the fluid.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContactEnd {
    pub point: Vec2,
    pub tangent: Vec2,
}

/// Reference curve S_* with its transversal field X.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceSurface {
    pub nodes: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub transversal: Vec<Vec2>,
    pub arclength: Vec<f64>,
    pub left: Option<ContactEnd>,
    pub right: Option<ContactEnd>,
    pub blend_left: Vec<f64>,
    pub blend_right: Vec<f64>,
    pub bottom: Bottom,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

impl ReferenceSurface {
    /// Builds X by gluing the outward normal with the bottom tangents at the
    /// contact ends through a quintic partition of unity.
    pub fn new(nodes: Vec<Vec2>, bottom: Bottom, left: Option<ContactEnd>, right: Option<ContactEnd>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidInput("reference surface needs at least 3 nodes".into()));
        }
        let (_, normals) = polyline_frame(&nodes)?;
        let arclength = cumulative_length(&nodes);
        let total = *arclength.last().unwrap();
        let width = BLEND_FRACTION * total;
        let blend_left: Vec<f64> = arclength
            .iter()
            .map(|&s| if left.is_some() { smoothstep(1.0 - s / width) } else { 0.0 })
            .collect();
        let blend_right: Vec<f64> = arclength
            .iter()
            .map(|&s| if right.is_some() { smoothstep(1.0 - (total - s) / width) } else { 0.0 })
            .collect();
        let tl = left.map(|c| c.tangent).unwrap_or_default();
        let tr = right.map(|c| c.tangent).unwrap_or_default();
        let transversal = normals
            .iter()
            .zip(blend_left.iter().zip(&blend_right))
            .map(|(&n, (&cl, &cr))| (n * (1.0 - cl - cr) + tl * cl + tr * cr).normalized())
            .collect();
        let r = ReferenceSurface { nodes, normals, transversal, arclength, left, right, blend_left, blend_right, bottom };
        r.check_transversal()?;
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap()
    }

    fn check_transversal(&self) -> Result<()> {
        let (tangents, _) = polyline_frame(&self.nodes)?;
        for (i, (x, t)) in self.transversal.iter().zip(&tangents).enumerate() {
            if x.dot(*t).abs() >= 1.0 - 1e-6 {
                return Err(Error::CollarOverflow(format!("transversal field tangent to S_* at node {i}")));
            }
        }
        Ok(())
    }

    /// Chart phi(p_i, eta).
    pub fn point(&self, i: usize, eta: f64) -> Vec2 {
        let mut p = self.nodes[i] + self.transversal[i] * eta;
        let ends = [(self.left, self.blend_left[i]), (self.right, self.blend_right[i])];
        for (end, chi) in ends {
            if let (Some(c), true) = (end, chi > 0.0) {
                let g = self.bottom.slide(c.point, c.tangent, eta);
                p += (g - c.point - c.tangent * eta) * chi;
            }
        }
        p
    }

    /// d phi / d eta at node i.
    pub fn d_eta(&self, i: usize, eta: f64) -> Vec2 {
        let mut d = self.transversal[i];
        let ends = [(self.left, self.blend_left[i]), (self.right, self.blend_right[i])];
        for (end, chi) in ends {
            if let (Some(c), true) = (end, chi > 0.0) {
                d += (self.bottom.slide_derivative(c.point, c.tangent, eta) - c.tangent) * chi;
            }
        }
        d
    }

    pub fn graph(self: &Arc<Self>, eta: Vec<f64>) -> SurfaceGraph {
        SurfaceGraph { reference: Arc::clone(self), eta }
    }

    pub fn flat(self: &Arc<Self>) -> SurfaceGraph {
        self.graph(vec![0.0; self.len()])
    }
}

/// Free surface as a graph over the reference curve.
#[derive(Clone, Debug)]
pub struct SurfaceGraph {
    pub reference: Arc<ReferenceSurface>,
    pub eta: Vec<f64>,
}

impl SurfaceGraph {
    pub fn curve(&self) -> Vec<Vec2> {
        self.eta.iter().enumerate().map(|(i, &e)| self.reference.point(i, e)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.eta.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn check_collar(&self, delta: f64) -> Result<()> {
        let m = self.max_abs();
        if m >= delta {
            return Err(Error::CollarOverflow(format!("sup |eta| = {m} exceeds collar half-width {delta}")));
        }
        Ok(())
    }

    /// Rate of eta produced by the normal velocity `vn` at each node.
    pub fn eta_rate(&self, normals: &[Vec2], vn: &[f64]) -> Vec<f64> {
        (0..self.eta.len())
            .map(|i| vn[i] / self.reference.d_eta(i, self.eta[i]).dot(normals[i]))
            .collect()
    }
}

pub fn cumulative_length(p: &[Vec2]) -> Vec<f64> {
    let mut s = vec![0.0; p.len()];
    for i in 1..p.len() {
        s[i] = s[i - 1] + (p[i] - p[i - 1]).norm();
    }
    s
}

/// Weights of the derivative at `x0` of the quadratic through three nodes.
fn quad_deriv_weights(t: [f64; 3], x0: f64) -> [f64; 3] {
    let [a, b, c] = t;
    [
        ((x0 - b) + (x0 - c)) / ((a - b) * (a - c)),
        ((x0 - a) + (x0 - c)) / ((b - a) * (b - c)),
        ((x0 - a) + (x0 - b)) / ((c - a) * (c - b)),
    ]
}

/// Second order derivative of nodal samples `f` with respect to the
/// parameter `s` (one-sided at the ends).
pub fn derivative_along(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    (0..n)
        .map(|i| {
            let j = i.clamp(1, n - 2) - 1;
            let w = quad_deriv_weights([s[j], s[j + 1], s[j + 2]], s[i]);
            w[0] * f[j] + w[1] * f[j + 1] + w[2] * f[j + 2]
        })
        .collect()
}

/// Unit tangents and outward normals (ccw rotation of the tangent) of a
/// polyline, from quadratic interpolation in chord length.
pub fn polyline_frame(p: &[Vec2]) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    if p.len() < 3 {
        return Err(Error::InvalidInput("curve needs at least 3 nodes".into()));
    }
    let s = cumulative_length(p);
    if s.windows(2).any(|w| w[1] - w[0] <= 0.0) {
        return Err(Error::InvalidInput("duplicate nodes on curve".into()));
    }
    let xs: Vec<f64> = p.iter().map(|q| q.x).collect();
    let ys: Vec<f64> = p.iter().map(|q| q.y).collect();
    let dx = derivative_along(&s, &xs);
    let dy = derivative_along(&s, &ys);
    let t: Vec<Vec2> = dx.iter().zip(&dy).map(|(&a, &b)| Vec2::new(a, b).normalized()).collect();
    let n = t.iter().map(|v| v.perp()).collect();
    Ok((t, n))
}

/// Signed curvature per node from circumscribed circles, positive when the
/// curve turns toward the fluid (fluid on the right of the traversal).
/// End nodes copy their neighbour.
pub fn curvature(p: &[Vec2]) -> Result<Vec<f64>> {
    if p.len() < 3 {
        return Err(Error::InvalidInput("curvature needs at least 3 nodes".into()));
    }
    let n = p.len();
    let mut k = vec![0.0; n];
    for i in 1..n - 1 {
        let a = p[i] - p[i - 1];
        let b = p[i + 1] - p[i];
        let c = p[i + 1] - p[i - 1];
        let la = a.norm();
        let lb = b.norm();
        if la == 0.0 || lb == 0.0 {
            return Err(Error::InvalidInput(format!("duplicate nodes at {i}")));
        }
        k[i] = -2.0 * a.cross(b) / (la * lb * c.norm());
    }
    k[0] = k[1];
    k[n - 1] = k[n - 2];
    Ok(k)
}

/// Cosine coefficients of `f` on the reference parameter, using the
/// trapezoid rule on the (possibly non-uniform) nodes.
fn cosine_coefficients(s: &[f64], f: &[f64]) -> Vec<f64> {
    let len = *s.last().unwrap();
    let n = s.len();
    (0..n)
        .map(|k| {
            let kk = k as f64 * PI / len;
            let mut num = 0.0;
            for i in 1..n {
                let h = s[i] - s[i - 1];
                num += 0.5 * h * (f[i] * (kk * s[i]).cos() + f[i - 1] * (kk * s[i - 1]).cos());
            }
            let norm = if k == 0 { len } else { 0.5 * len };
            num / norm
        })
        .collect()
}

/// Spectral H^sigma norm of eta on the reference curve:
/// sum_k (1 + k^2)^sigma |c_k|^2 |cos_k|^2 with wave numbers k pi / length.
pub fn neighborhood_distance(s: &SurfaceGraph, sigma: f64) -> f64 {
    let r = &s.reference;
    let len = r.length();
    let c = cosine_coefficients(&r.arclength, &s.eta);
    c.iter()
        .enumerate()
        .map(|(k, ck)| {
            let kk = k as f64 * PI / len;
            let w = if k == 0 { len } else { 0.5 * len };
            (1.0 + kk * kk).powf(sigma) * ck * ck * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Moves the surface by the normal component of `v` over `dt` (explicit
/// midpoint). Contact nodes slide along the bottom through the chart.
pub fn advect_surface(s: &SurfaceGraph, v: &dyn Fn(Vec2) -> Vec2, dt: f64, delta: f64) -> Result<SurfaceGraph> {
    if dt == 0.0 {
        return Ok(s.clone());
    }
    let rate = |g: &SurfaceGraph| -> Result<Vec<f64>> {
        let c = g.curve();
        let (_, n) = polyline_frame(&c)?;
        let vn: Vec<f64> = c.iter().zip(&n).map(|(&p, &nn)| v(p).dot(nn)).collect();
        Ok(g.eta_rate(&n, &vn))
    };
    let k1 = rate(s)?;
    let mid = SurfaceGraph {
        reference: s.reference.clone(),
        eta: s.eta.iter().zip(&k1).map(|(e, k)| e + 0.5 * dt * k).collect(),
    };
    mid.check_collar(delta)?;
    let k2 = rate(&mid)?;
    let out = SurfaceGraph {
        reference: s.reference.clone(),
        eta: s.eta.iter().zip(&k2).map(|(e, k)| e + dt * k).collect(),
    };
    out.check_collar(delta)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_arc_curvature() {
        let r = 2.0;
        let p: Vec<Vec2> = (0..40).map(|i| Vec2::polar(r, -(i as f64) * 0.05)).collect();
        for k in curvature(&p).unwrap() {
            assert!((k - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_segment_has_zero_curvature() {
        let p: Vec<Vec2> = (0..10).map(|i| Vec2::new(i as f64 * 0.1, 0.3 * i as f64 * 0.1)).collect();
        for k in curvature(&p).unwrap() {
            assert!(k.abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let p = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        assert!(curvature(&p).is_err());
    }

    #[test]
    fn derivative_is_exact_for_quadratics() {
        let s = [0.0, 0.1, 0.25, 0.3, 0.6];
        let f: Vec<f64> = s.iter().map(|x| 1.0 + 2.0 * x - 3.0 * x * x).collect();
        for (d, x) in derivative_along(&s, &f).iter().zip(s) {
            assert!((d - (2.0 - 6.0 * x)).abs() < 1e-12);
        }
    }
}
