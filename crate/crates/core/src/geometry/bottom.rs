use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Analytic description of the bottom manifold M.
///
/// Orientation: `nu` is the outward unit normal and the tangent is
/// `tau = nu.perp()`, so that `d nu / ds = k tau` defines the signed
/// curvature `k`. With this convention the second fundamental form is
/// `Pi_M(v, w) = -k v_tau w_tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BottomShape {
    /// Ray from the origin at polar angle `omega`, fluid at smaller angles.
    Ray { omega: f64 },
    /// Walls at `x = -width/2`, `x = width/2` and a floor at `y = -depth`.
    Box { width: f64, depth: f64 },
    /// Graph `y = -depth cos(pi x / (2 half_width))`, fluid above.
    Cosine { half_width: f64, depth: f64 },
}

/// Local frame of the bottom at a point.
#[derive(Clone, Copy, Debug)]
pub struct BottomFrame {
    pub point: Vec2,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub curvature: f64,
    pub dcurvature: f64,
}

impl BottomShape {
    pub fn is_flat(&self) -> bool {
        !matches!(self, BottomShape::Cosine { .. })
    }

    fn graph(&self, x: f64) -> [f64; 4] {
        match *self {
            BottomShape::Cosine { half_width, depth } => {
                let c = FRAC_PI_2 / half_width;
                let (s, co) = (c * x).sin_cos();
                [-depth * co, depth * c * s, depth * c * c * co, -depth * c * c * c * s]
            }
            _ => unreachable!("graph only defined for cosine bottoms"),
        }
    }

    /// Closest point of M to `p`.
    pub fn project(&self, p: Vec2) -> Vec2 {
        match *self {
            BottomShape::Ray { omega } => {
                let t = Vec2::polar(1.0, omega);
                t * p.dot(t)
            }
            BottomShape::Box { width, depth } => {
                let hw = width / 2.0;
                let cands = [
                    Vec2::new(-hw, p.y.max(-depth)),
                    Vec2::new(hw, p.y.max(-depth)),
                    Vec2::new(p.x.clamp(-hw, hw), -depth),
                ];
                let mut best = cands[0];
                for c in cands {
                    if (c - p).norm2() < (best - p).norm2() {
                        best = c;
                    }
                }
                best
            }
            BottomShape::Cosine { .. } => {
                let mut x = p.x;
                for _ in 0..50 {
                    let [b, b1, b2, _] = self.graph(x);
                    let f = (x - p.x) + (b - p.y) * b1;
                    let df = 1.0 + b1 * b1 + (b - p.y) * b2;
                    let dx = f / df;
                    x -= dx;
                    if dx.abs() < 1e-15 * (1.0 + x.abs()) {
                        break;
                    }
                }
                Vec2::new(x, self.graph(x)[0])
            }
        }
    }

    /// Frame at the point of M closest to `p`.
    pub fn frame(&self, p: Vec2) -> BottomFrame {
        match *self {
            BottomShape::Ray { omega } => {
                let normal = Vec2::new(-omega.sin(), omega.cos());
                BottomFrame { point: self.project(p), normal, tangent: normal.perp(), curvature: 0.0, dcurvature: 0.0 }
            }
            BottomShape::Box { width, depth } => {
                let hw = width / 2.0;
                let dl = (p.x + hw).abs();
                let dr = (p.x - hw).abs();
                let df = (p.y + depth).abs();
                let (point, normal) = if df <= dl.min(dr) {
                    (Vec2::new(p.x.clamp(-hw, hw), -depth), Vec2::new(0.0, -1.0))
                } else if dl <= dr {
                    (Vec2::new(-hw, p.y.max(-depth)), Vec2::new(-1.0, 0.0))
                } else {
                    (Vec2::new(hw, p.y.max(-depth)), Vec2::new(1.0, 0.0))
                };
                BottomFrame { point, normal, tangent: normal.perp(), curvature: 0.0, dcurvature: 0.0 }
            }
            BottomShape::Cosine { .. } => {
                let q = self.project(p);
                self.graph_frame(q.x)
            }
        }
    }

    /// Frame of a graph bottom at abscissa `x`.
    pub fn graph_frame(&self, x: f64) -> BottomFrame {
        let [b, b1, b2, b3] = self.graph(x);
        let w = (1.0 + b1 * b1).sqrt();
        let normal = Vec2::new(b1, -1.0) / w;
        let w3 = w * w * w;
        let k = b2 / w3;
        let dk_dx = b3 / w3 - 3.0 * b1 * b2 * b2 / (w3 * w * w);
        BottomFrame { point: Vec2::new(x, b), normal, tangent: normal.perp(), curvature: k, dcurvature: dk_dx / w }
    }

    /// Height of a graph bottom.
    pub fn height(&self, x: f64) -> f64 {
        match *self {
            BottomShape::Cosine { .. } => self.graph(x)[0],
            BottomShape::Box { depth, .. } => -depth,
            BottomShape::Ray { omega } => x * omega.tan(),
        }
    }

    /// Point of M reached by sliding the contact point `pc` so that its
    /// displacement has component `eta` along the unit vector `t`.
    pub fn slide(&self, pc: Vec2, t: Vec2, eta: f64) -> Vec2 {
        match *self {
            BottomShape::Ray { .. } | BottomShape::Box { .. } => pc + t * eta,
            BottomShape::Cosine { .. } => {
                let mut x = pc.x + eta * t.x;
                for _ in 0..60 {
                    let [b, b1, _, _] = self.graph(x);
                    let f = (x - pc.x) * t.x + (b - pc.y) * t.y - eta;
                    let df = t.x + b1 * t.y;
                    let dx = f / df;
                    x -= dx;
                    if dx.abs() < 1e-15 * (1.0 + x.abs()) {
                        break;
                    }
                }
                Vec2::new(x, self.graph(x)[0])
            }
        }
    }

    /// Derivative of [`BottomShape::slide`] with respect to `eta`.
    pub fn slide_derivative(&self, pc: Vec2, t: Vec2, eta: f64) -> Vec2 {
        match *self {
            BottomShape::Ray { .. } | BottomShape::Box { .. } => t,
            BottomShape::Cosine { .. } => {
                let q = self.slide(pc, t, eta);
                let b1 = self.graph(q.x)[1];
                let dir = Vec2::new(1.0, b1);
                dir / dir.dot(t)
            }
        }
    }

    /// Signed distance from `p` to M, positive on the fluid side.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let f = self.frame(p);
        -(p - f.point).dot(f.normal)
    }
}


/// Bottom shape placed in the plane by a translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bottom {
    pub shape: BottomShape,
    #[serde(default)]
    pub offset: Vec2,
}

impl Bottom {
    pub fn new(shape: BottomShape) -> Self {
        Bottom { shape, offset: Vec2::ZERO }
    }

    pub fn ray(omega: f64) -> Self {
        Bottom::new(BottomShape::Ray { omega })
    }

    pub fn rect(width: f64, depth: f64) -> Self {
        Bottom::new(BottomShape::Box { width, depth })
    }

    /// Cosine bottom whose slope at `x = +-half_width` is `tan(omega)`.
    pub fn cosine_for_angle(omega: f64, half_width: f64) -> Self {
        Bottom::new(BottomShape::Cosine { half_width, depth: 2.0 * half_width * omega.tan() / std::f64::consts::PI })
    }

    pub fn translated(&self, d: Vec2) -> Self {
        Bottom { shape: self.shape.clone(), offset: self.offset + d }
    }

    pub fn is_flat(&self) -> bool {
        self.shape.is_flat()
    }

    pub fn project(&self, p: Vec2) -> Vec2 {
        self.shape.project(p - self.offset) + self.offset
    }

    pub fn frame(&self, p: Vec2) -> BottomFrame {
        let mut f = self.shape.frame(p - self.offset);
        f.point += self.offset;
        f
    }

    pub fn graph_frame(&self, x: f64) -> BottomFrame {
        let mut f = self.shape.graph_frame(x - self.offset.x);
        f.point += self.offset;
        f
    }

    pub fn height(&self, x: f64) -> f64 {
        self.shape.height(x - self.offset.x) + self.offset.y
    }

    pub fn slide(&self, pc: Vec2, t: Vec2, eta: f64) -> Vec2 {
        self.shape.slide(pc - self.offset, t, eta) + self.offset
    }

    pub fn slide_derivative(&self, pc: Vec2, t: Vec2, eta: f64) -> Vec2 {
        self.shape.slide_derivative(pc - self.offset, t, eta)
    }

    pub fn clearance(&self, p: Vec2) -> f64 {
        self.shape.clearance(p - self.offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_contact_slope_matches_angle() {
        let w = PI / 5.0;
        let b = Bottom::cosine_for_angle(w, 1.0);
        let f = b.graph_frame(1.0);
        assert!((f.normal.dot(Vec2::new(0.0, 1.0)) + w.cos()).abs() < 1e-14);
        assert!(f.curvature.abs() < 1e-14);
        assert!(b.height(1.0).abs() < 1e-15);
    }

    #[test]
    fn frenet_derivative_of_normal() {
        let b = Bottom::cosine_for_angle(PI / 5.0, 1.0);
        let x = 0.3;
        let f = b.graph_frame(x);
        let eps = 1e-6;
        let fp = b.graph_frame(x + eps);
        let fm = b.graph_frame(x - eps);
        let ds = (fp.point - fm.point).norm();
        let dn = (fp.normal - fm.normal) / ds;
        let expect = f.tangent * f.curvature;
        assert!((dn - expect).norm() < 1e-7);
        let dk = (fp.curvature - fm.curvature) / ds;
        assert!((dk - f.dcurvature).abs() < 1e-6);
    }

    #[test]
    fn slide_stays_on_bottom() {
        let b = Bottom::cosine_for_angle(PI / 6.0, 1.0);
        let pc = Vec2::new(1.0, 0.0);
        let t = Vec2::new((PI / 6.0).cos(), (PI / 6.0).sin());
        let q = b.slide(pc, t, 0.05);
        assert!((q.y - b.height(q.x)).abs() < 1e-15);
        assert!(((q - pc).dot(t) - 0.05).abs() < 1e-13);
        let e = 1e-6;
        let d = (b.slide(pc, t, 0.05 + e) - b.slide(pc, t, 0.05 - e)) / (2.0 * e);
        assert!((d - b.slide_derivative(pc, t, 0.05)).norm() < 1e-7);
    }

    #[test]
    fn box_normals() {
        let b = Bottom::rect(1.0, 1.0);
        assert_eq!(b.frame(Vec2::new(-0.5, -0.3)).normal, Vec2::new(-1.0, 0.0));
        assert_eq!(b.frame(Vec2::new(0.5, -0.3)).normal, Vec2::new(1.0, 0.0));
        assert_eq!(b.frame(Vec2::new(0.1, -1.0)).normal, Vec2::new(0.0, -1.0));
    }
}
