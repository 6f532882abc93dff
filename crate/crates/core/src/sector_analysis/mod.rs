//! Corner model problem: singular exponents of the Laplacian in a sector,
//! the angular operator pencil, singular functions, regularity thresholds
//! and a numerical Mellin transform.

pub mod mellin;

pub use mellin::{inverse_mellin, mellin, InverseMellin, RadialSamples};

use crate::error::{Error, Result};
use crate::vec2::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Boundary conditions on the edge `theta = 0` (surface side) and the
/// edge `theta = omega` (bottom side).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryConditionPair {
    #[serde(rename = "dn")]
    DirichletNeumann,
    #[serde(rename = "nn")]
    NeumannNeumann,
    #[serde(rename = "dd")]
    DirichletDirichlet,
}

impl BoundaryConditionPair {
    pub const ALL: [BoundaryConditionPair; 3] = [
        BoundaryConditionPair::DirichletNeumann,
        BoundaryConditionPair::NeumannNeumann,
        BoundaryConditionPair::DirichletDirichlet,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            BoundaryConditionPair::DirichletNeumann => "dn",
            BoundaryConditionPair::NeumannNeumann => "nn",
            BoundaryConditionPair::DirichletDirichlet => "dd",
        }
    }

    fn dirichlet_at_start(&self) -> bool {
        !matches!(self, BoundaryConditionPair::NeumannNeumann)
    }

    fn dirichlet_at_end(&self) -> bool {
        matches!(self, BoundaryConditionPair::DirichletDirichlet)
    }
}

impl std::str::FromStr for BoundaryConditionPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dn" => Ok(BoundaryConditionPair::DirichletNeumann),
            "nn" => Ok(BoundaryConditionPair::NeumannNeumann),
            "dd" => Ok(BoundaryConditionPair::DirichletDirichlet),
            other => Err(Error::InvalidInput(format!("unknown boundary pair '{other}' (dn, nn, dd)"))),
        }
    }
}

fn check_angle(omega: f64) -> Result<()> {
    if omega > 0.0 && omega < PI {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("angle {omega} outside (0, pi)")))
    }
}

/// Closed-form singular exponents, ascending.
pub fn singular_exponents(bc: BoundaryConditionPair, omega: f64, count: usize) -> Result<Vec<f64>> {
    check_angle(omega)?;
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    Ok((0..count)
        .map(|k| match bc {
            BoundaryConditionPair::DirichletNeumann => (k as f64 + 0.5) * PI / omega,
            _ => (k + 1) as f64 * PI / omega,
        })
        .collect())
}

/// Supremal Sobolev index `1 + sigma_max` of solutions near the corner.
pub fn regularity_threshold(bc: BoundaryConditionPair, omega: f64) -> Result<f64> {
    check_angle(omega)?;
    Ok(match bc {
        BoundaryConditionPair::DirichletNeumann => 1.0 + PI / (2.0 * omega),
        _ => 1.0 + PI / omega,
    })
}

/// Outcome of the Sobolev index admissibility check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub valid: bool,
    pub lower: f64,
    pub upper: f64,
    pub message: String,
}

/// Admissible iff `1 + n/2 < s < 1/2 + pi / (2 omega_max)`.
pub fn validate_config(s: f64, omega_max: f64, n: usize) -> ConfigReport {
    let lower = 1.0 + n as f64 / 2.0;
    let upper = 0.5 + PI / (2.0 * omega_max);
    let (valid, message) = if !(omega_max > 0.0 && omega_max < PI) {
        (false, format!("omega_max {omega_max} outside (0, pi)"))
    } else if s <= lower {
        (false, format!("needs s > {lower}, got {s}"))
    } else if s >= upper {
        (false, format!("needs s < {upper} (bound from omega_max), got {s}"))
    } else {
        (true, format!("{lower} < {s} < {upper}"))
    };
    ConfigReport { valid, lower, upper, message }
}

/// Frozen constant-coefficient operator `div(alpha grad)` on a sector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorPencil {
    pub omega: f64,
    pub alpha: Mat2,
    pub bc: BoundaryConditionPair,
}

impl OperatorPencil {
    pub fn euclidean(bc: BoundaryConditionPair, omega: f64) -> Self {
        OperatorPencil { omega, alpha: Mat2::IDENTITY, bc }
    }

    pub fn validate(&self) -> Result<()> {
        check_angle(self.omega)?;
        let a = &self.alpha;
        if !a.is_symmetric(1e-14 * a.trace().abs().max(1.0)) || a.det() <= 0.0 || a.trace() <= 0.0 {
            return Err(Error::InvalidInput("pencil coefficient must be symmetric positive definite".into()));
        }
        Ok(())
    }

    /// Opening angle of the sector mapped by `alpha^{-1/2}`, which turns the
    /// operator into the Laplacian and conormal into normal derivatives.
    pub fn mapped_angle(&self) -> f64 {
        let b = self.alpha.spd_sqrt().inverse().expect("spd");
        let e0 = b.apply(Vec2::new(1.0, 0.0));
        let e1 = b.apply(Vec2::polar(1.0, self.omega));
        e0.cross(e1).atan2(e0.dot(e1))
    }

    /// Boundary determinant of the angular problem at `lambda`.
    ///
    /// With `w = e_theta . alpha grad(r^lambda v)` scaled by `r^{1-lambda}`,
    /// the angular system is `v' = (w - lambda a_rt v) / a_tt`,
    /// `w' = -lambda (a_rt v' + lambda a_rr v)`.
    pub fn determinant(&self, lambda: f64) -> f64 {
        let steps = (2000.0f64).max(400.0 * lambda.abs() * self.omega).ceil() as usize;
        let h = self.omega / steps as f64;
        let a = self.alpha;
        let rhs = |th: f64, y: [f64; 4]| -> [f64; 4] {
            let er = Vec2::polar(1.0, th);
            let et = er.perp();
            let arr = a.form(er, er);
            let art = a.form(er, et);
            let att = a.form(et, et);
            let mut out = [0.0; 4];
            for k in 0..2 {
                let (v, w) = (y[2 * k], y[2 * k + 1]);
                let dv = (w - lambda * art * v) / att;
                out[2 * k] = dv;
                out[2 * k + 1] = -lambda * (art * dv + lambda * arr * v);
            }
            out
        };
        let mut y = [1.0, 0.0, 0.0, 1.0];
        let mut th = 0.0;
        for _ in 0..steps {
            let k1 = rhs(th, y);
            let k2 = rhs(th + 0.5 * h, std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
            let k3 = rhs(th + 0.5 * h, std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
            let k4 = rhs(th + h, std::array::from_fn(|i| y[i] + h * k3[i]));
            for i in 0..4 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            th += h;
        }
        let b0 = |k: usize| if self.bc.dirichlet_at_start() { [1.0, 0.0][k] } else { [0.0, 1.0][k] };
        let bw = |k: usize| if self.bc.dirichlet_at_end() { y[2 * k] } else { y[2 * k + 1] };
        b0(0) * bw(1) - b0(1) * bw(0)
    }
}

/// Root finder settings for the pencil determinant.
pub const WINDOW_WIDTH: f64 = 0.25;
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Values of lambda in `(lo, hi]` where the angular problem is not
/// injective, by bracketing on windows of width 0.25, bisection and a
/// final secant polish. `lambda = 0` is excluded.
pub fn pencil_exponents_numeric(pencil: &OperatorPencil, lo: f64, hi: f64) -> Result<Vec<f64>> {
    pencil.validate()?;
    if !(hi > lo) || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("search window ({lo}, {hi}] is empty or unbounded")));
    }
    let lo = lo.max(0.0);
    let f = |l: f64| pencil.determinant(l);
    let cells = ((hi - lo) / WINDOW_WIDTH).ceil() as usize;
    let mut roots = Vec::new();
    let mut a = lo + 1e-9;
    let mut fa = f(a);
    for c in 0..cells {
        let b = (lo + (c + 1) as f64 * WINDOW_WIDTH).min(hi);
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut x0, mut x1, mut f0) = (a, b, fa);
            let mut it = 0;
            while x1 - x0 > ROOT_TOLERANCE {
                let m = 0.5 * (x0 + x1);
                let fm = f(m);
                if f0 * fm <= 0.0 {
                    x1 = m;
                } else {
                    x0 = m;
                    f0 = fm;
                }
                it += 1;
                if it > 200 {
                    return Err(Error::RootFinding(format!("bisection stalled in cell [{a}, {b}]")));
                }
            }
            // secant polish from the bracket ends
            let (g0, g1) = (f(x0), f(x1));
            let mut r = 0.5 * (x0 + x1);
            if g1 != g0 {
                let s = x1 - g1 * (x1 - x0) / (g1 - g0);
                if s >= x0 && s <= x1 {
                    r = s;
                }
            }
            roots.push(r);
        }
        a = b;
        fa = fb;
    }
    Ok(roots)
}

/// Corner solution `r^lambda v(theta)` of the Laplacian.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularFunction {
    pub bc: BoundaryConditionPair,
    pub omega: f64,
    pub lambda: f64,
    /// Angular profile sampled on a uniform grid of `[0, omega]`: (theta, v).
    pub profile: Vec<(f64, f64)>,
}

impl SingularFunction {
    pub fn new(bc: BoundaryConditionPair, omega: f64, k: usize) -> Result<Self> {
        check_angle(omega)?;
        let lambda = match bc {
            BoundaryConditionPair::DirichletNeumann => (k as f64 + 0.5) * PI / omega,
            _ => {
                if k == 0 {
                    return Err(Error::InvalidInput("k must be at least 1 for nn and dd pairs".into()));
                }
                k as f64 * PI / omega
            }
        };
        let mut f = SingularFunction { bc, omega, lambda, profile: Vec::new() };
        f.profile = (0..=64).map(|i| {
            let th = omega * i as f64 / 64.0;
            (th, f.angular(th))
        }).collect();
        Ok(f)
    }

    pub fn angular(&self, th: f64) -> f64 {
        match self.bc {
            BoundaryConditionPair::NeumannNeumann => (self.lambda * th).cos(),
            _ => (self.lambda * th).sin(),
        }
    }

    pub fn angular_derivative(&self, th: f64) -> f64 {
        match self.bc {
            BoundaryConditionPair::NeumannNeumann => -self.lambda * (self.lambda * th).sin(),
            _ => self.lambda * (self.lambda * th).cos(),
        }
    }

    fn polar(p: Vec2) -> (f64, f64) {
        let mut th = p.angle();
        if th < -1e-12 {
            th += 2.0 * PI;
        }
        (p.norm(), th.max(0.0))
    }

    pub fn value(&self, p: Vec2) -> f64 {
        let (r, th) = Self::polar(p);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(self.lambda) * self.angular(th)
    }

    pub fn gradient(&self, p: Vec2) -> Vec2 {
        let (r, th) = Self::polar(p);
        if r == 0.0 {
            return Vec2::ZERO;
        }
        let er = Vec2::polar(1.0, th);
        let s = r.powf(self.lambda - 1.0);
        (er * (self.lambda * self.angular(th)) + er.perp() * self.angular_derivative(th)) * s
    }
}

/// Singular function of index `k` (k >= 0 for dn, k >= 1 otherwise).
pub fn singular_function(bc: BoundaryConditionPair, omega: f64, k: usize) -> Result<SingularFunction> {
    SingularFunction::new(bc, omega, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryConditionPair::*;

    #[test]
    fn closed_form_exponents() {
        assert_eq!(singular_exponents(DirichletNeumann, PI / 2.0, 3).unwrap(), vec![1.0, 3.0, 5.0]);
        assert_eq!(singular_exponents(NeumannNeumann, PI / 2.0, 3).unwrap(), vec![2.0, 4.0, 6.0]);
        assert_eq!(singular_exponents(DirichletDirichlet, PI - 1e-9, 3).unwrap().len(), 3);
        let e = singular_exponents(DirichletNeumann, std::f64::consts::FRAC_PI_4, 3).unwrap();
        for (a, b) in e.iter().zip([2.0, 6.0, 10.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(singular_exponents(DirichletNeumann, 0.0, 3).is_err());
        assert!(singular_exponents(DirichletNeumann, PI, 3).is_err());
    }

    #[test]
    fn thresholds() {
        assert!((regularity_threshold(DirichletNeumann, PI / 4.0).unwrap() - 3.0).abs() < 1e-14);
        assert!((regularity_threshold(DirichletNeumann, PI / 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((regularity_threshold(NeumannNeumann, PI / 2.0).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let r = validate_config(2.5, PI / 5.0, 2);
        assert!(r.valid && (r.upper - 3.0).abs() < 1e-14);
        let r = validate_config(2.5, PI / 3.0, 2);
        assert!(!r.valid && (r.upper - 2.0).abs() < 1e-14);
        assert!(!validate_config(2.0, PI / 5.0, 2).valid);
    }

    #[test]
    fn euclidean_pencil_first_roots() {
        let r = pencil_exponents_numeric(&OperatorPencil::euclidean(DirichletNeumann, PI / 4.0), 0.0, 2.5).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-8);
        let r = pencil_exponents_numeric(&OperatorPencil::euclidean(NeumannNeumann, PI / 3.0), 0.0, 3.5).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn anisotropic_pencil_uses_mapped_angle() {
        let p = OperatorPencil { omega: PI / 2.0, alpha: Mat2::new(4.0, 0.0, 0.0, 1.0), bc: DirichletNeumann };
        let w = p.mapped_angle();
        assert!((w - PI / 2.0).abs() < 1e-14);
        let r = pencil_exponents_numeric(&p, 0.0, 4.0).unwrap();
        let e = singular_exponents(DirichletNeumann, w, r.len()).unwrap();
        for (a, b) in r.iter().zip(&e) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_functions() {
        let f = singular_function(DirichletNeumann, PI / 2.0, 0).unwrap();
        assert!((f.lambda - 1.0).abs() < 1e-15);
        let p = Vec2::new(0.3, 0.4);
        assert!((f.value(p) - 0.4).abs() < 1e-14);
        let f = singular_function(DirichletNeumann, PI / 4.0, 0).unwrap();
        assert!((f.value(p) - 2.0 * 0.3 * 0.4).abs() < 1e-14);
        assert!(singular_function(NeumannNeumann, PI / 4.0, 0).is_err());
    }
}
