//! WebAssembly entry points for `static/index.html`. Each returns a JSON
//! string; errors come back as `{"error": "..."}`.

use beachlab::dtn::{assemble_dtn, box_eigenvalue};
use beachlab::geometry::build_box;
use beachlab::sector_analysis::{
    pencil_exponents_numeric, singular_exponents, singular_function, BoundaryConditionPair, OperatorPencil,
};
use beachlab::Vec2;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: beachlab::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Closed-form and pencil exponents for `samples` angles in `[omega_min, omega_max]`.
pub fn exponent_sweep(bc: &str, omega_min: f64, omega_max: f64, samples: usize, count: usize) -> beachlab::Result<Value> {
    let bc: BoundaryConditionPair = bc.parse()?;
    if !(omega_min > 0.0 && omega_max > omega_min && samples >= 2 && samples <= 400 && count >= 1 && count <= 8) {
        return Err(beachlab::Error::InvalidInput("need 0 < omega_min < omega_max, 2..400 samples, 1..8 exponents".into()));
    }
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let omega = omega_min + (omega_max - omega_min) * i as f64 / (samples - 1) as f64;
        let formula = singular_exponents(bc, omega, count)?;
        let hi = formula[count - 1] + 0.5 * std::f64::consts::PI / omega;
        let numeric = pencil_exponents_numeric(&OperatorPencil::euclidean(bc, omega), 0.0, hi)?;
        rows.push(json!({ "omega": omega, "formula": formula, "numeric": &numeric[..count.min(numeric.len())] }));
    }
    Ok(json!({ "bc": bc.tag(), "rows": rows }))
}

/// `r^lambda v(theta)` on an `n x n` grid over the bounding box of the
/// unit sector; points outside the sector are null.
pub fn singular_heatmap(bc: &str, omega: f64, k: usize, n: usize) -> beachlab::Result<Value> {
    let bc: BoundaryConditionPair = bc.parse()?;
    if !(2..=400).contains(&n) {
        return Err(beachlab::Error::InvalidInput("grid size must lie in 2..400".into()));
    }
    let sf = singular_function(bc, omega, k)?;
    let xs = [omega.cos().min(0.0), 1.0];
    let ys = [0.0, if omega > std::f64::consts::FRAC_PI_2 { 1.0 } else { omega.sin() }];
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = ys[1] - (ys[1] - ys[0]) * j as f64 / (n - 1) as f64;
        for i in 0..n {
            let x = xs[0] + (xs[1] - xs[0]) * i as f64 / (n - 1) as f64;
            let p = Vec2::new(x, y);
            let th = y.atan2(x);
            values.push(if p.norm() <= 1.0 && th >= 0.0 && th <= omega { Some(sf.value(p)) } else { None });
        }
    }
    Ok(json!({ "lambda": sf.lambda, "x": xs, "y": ys, "n": n, "values": values }))
}

/// Discrete DtN eigenvalues of the box against `(k pi / L) tanh(k pi d / L)`.
pub fn box_spectrum(width: f64, depth: f64, h: f64, modes: usize) -> beachlab::Result<Value> {
    if !(h >= 0.01 && h <= 0.5 * width.min(depth)) || modes == 0 {
        return Err(beachlab::Error::InvalidInput("need 0.01 <= h <= min(width, depth) / 2 and modes >= 1".into()));
    }
    let op = assemble_dtn(&build_box(width, depth, h)?)?;
    let sp = op.spectrum()?;
    let rows: Vec<Value> = (1..=modes.min(sp.len() - 1))
        .map(|k| {
            let exact = box_eigenvalue(k, width, depth);
            json!({ "k": k, "discrete": sp.values[k], "exact": exact, "rel_error": (sp.values[k] - exact).abs() / exact })
        })
        .collect();
    Ok(json!({ "surface_nodes": op.len(), "self_adjointness": op.self_adjointness_defect(), "rows": rows }))
}

#[wasm_bindgen(js_name = exponentSweep)]
pub fn exponent_sweep_js(bc: &str, omega_min: f64, omega_max: f64, samples: usize, count: usize) -> String {
    respond(exponent_sweep(bc, omega_min, omega_max, samples, count))
}

#[wasm_bindgen(js_name = singularHeatmap)]
pub fn singular_heatmap_js(bc: &str, omega: f64, k: usize, n: usize) -> String {
    respond(singular_heatmap(bc, omega, k, n))
}

#[wasm_bindgen(js_name = boxSpectrum)]
pub fn box_spectrum_js(width: f64, depth: f64, h: f64, modes: usize) -> String {
    respond(box_spectrum(width, depth, h, modes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sweep_matches_formula_at_quarter_pi() {
        let v = exponent_sweep("dn", PI / 4.0, PI / 2.0, 2, 3).unwrap();
        let f = &v["rows"][0]["formula"];
        for (k, e) in [2.0, 6.0, 10.0].iter().enumerate() {
            assert!((f[k].as_f64().unwrap() - e).abs() < 1e-12);
            assert!((v["rows"][0]["numeric"][k].as_f64().unwrap() - e).abs() < 1e-8);
        }
    }

    #[test]
    fn heatmap_masks_outside_and_vanishes_on_dirichlet_edge() {
        let v = singular_heatmap("dn", 3.0 * PI / 4.0, 0, 21).unwrap();
        let vals = v["values"].as_array().unwrap();
        assert_eq!(vals.len(), 441);
        // bottom row is theta = 0 (Dirichlet), top-left corner lies outside
        assert!(vals[440].as_f64().unwrap().abs() < 1e-12);
        assert!(vals[0].is_null());
    }

    #[test]
    fn errors_are_reported_as_json() {
        let s = box_spectrum_js(1.0, 1.0, 0.001, 3);
        assert!(s.contains("error"));
        let s = singular_heatmap_js("xy", 1.0, 0, 10);
        assert!(s.contains("unknown boundary pair"));
    }
}
