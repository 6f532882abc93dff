use crate::vec2::Vec2;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Collapsed (Duffy) tensor rule on the triangle `(a, b, c)`, returning
/// points and weights. Integrable singularities at `a` are handled well.
pub fn duffy_rule(a: Vec2, b: Vec2, c: Vec2, n: usize) -> Vec<(Vec2, f64)> {
    let (x, w) = gauss_legendre(n);
    let area2 = (b - a).cross(c - a).abs();
    let mut out = Vec::with_capacity(n * n);
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            let p = a + ((b - a) + (c - b) * *v) * *u;
            out.push((p, wu * wv * u * area2));
        }
    }
    out
}
