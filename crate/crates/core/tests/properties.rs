use beachlab::dtn::assemble_dtn;
use beachlab::geometry::{build_beach, build_sector_graded, default_grading, BeachOptions, SurfaceProfile};
use beachlab::sector_analysis::{
    pencil_exponents_numeric, singular_exponents, singular_function, validate_config, BoundaryConditionPair,
    OperatorPencil,
};
use beachlab::{Mat2, Vec2};
use proptest::prelude::*;
use std::f64::consts::PI;
use BoundaryConditionPair::*;

fn pair() -> impl Strategy<Value = BoundaryConditionPair> {
    prop_oneof![Just(DirichletNeumann), Just(NeumannNeumann), Just(DirichletDirichlet)]
}

fn first_exponents(p: &OperatorPencil, closed: &[f64]) -> Vec<f64> {
    let hi = closed[closed.len() - 1] + 0.5 * PI / p.omega;
    let mut e = pencil_exponents_numeric(p, 0.0, hi).unwrap();
    e.truncate(closed.len());
    e
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn pencil_roots_match_closed_form(bc in pair(), omega in 0.4f64..3.0) {
        let closed = singular_exponents(bc, omega, 3).unwrap();
        let numeric = first_exponents(&OperatorPencil::euclidean(bc, omega), &closed);
        prop_assert_eq!(numeric.len(), 3);
        for (a, b) in numeric.iter().zip(&closed) {
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn spd_pencil_sees_the_mapped_angle(
        bc in pair(),
        omega in 0.5f64..2.5,
        l1 in 0.5f64..2.0,
        l2 in 0.5f64..2.0,
        rot in 0.0f64..PI,
    ) {
        let (c, s) = (rot.cos(), rot.sin());
        let r = Mat2::new(c, -s, s, c);
        let alpha = r.mul(&Mat2::new(l1, 0.0, 0.0, l2)).mul(&r.transpose());
        let p = OperatorPencil { omega, alpha, bc };
        p.validate().unwrap();
        let mapped = p.mapped_angle();
        prop_assert!(mapped > 0.0 && mapped < PI);
        let closed = singular_exponents(bc, mapped, 3).unwrap();
        let numeric = first_exponents(&p, &closed);
        prop_assert_eq!(numeric.len(), 3);
        for (a, b) in numeric.iter().zip(&closed) {
            prop_assert!((a - b).abs() < 1e-7 * b.max(1.0), "{} vs {}", a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn first_dn_exponent_decreases_with_angle(w1 in 0.05f64..3.1, dw in 1e-6f64..0.5) {
        let w2 = (w1 + dw).min(PI - 1e-9);
        prop_assume!(w2 > w1);
        let a = singular_exponents(DirichletNeumann, w1, 1).unwrap()[0];
        let b = singular_exponents(DirichletNeumann, w2, 1).unwrap()[0];
        prop_assert!(b < a);
    }

    #[test]
    fn shrinking_omega_max_keeps_configs_valid(s in 1.5f64..6.0, w in 0.05f64..3.1, f in 0.01f64..1.0) {
        if validate_config(s, w, 2).valid {
            prop_assert!(validate_config(s, w * f, 2).valid);
        }
    }

    #[test]
    fn singular_functions_are_harmonic_with_exact_traces(bc in pair(), omega in 0.3f64..3.0, k in 0usize..4, t in 0.05f64..0.95) {
        let k = if bc == DirichletNeumann { k } else { k + 1 };
        let f = singular_function(bc, omega, k).unwrap();
        let l = f.lambda;
        // angular ODE v'' + lambda^2 v = 0, v'' by central difference of v'
        let th = t * omega;
        let e = 1e-6;
        let v2 = (f.angular_derivative(th + e) - f.angular_derivative(th - e)) / (2.0 * e);
        prop_assert!((v2 + l * l * f.angular(th)).abs() < 1e-6 * l * l.max(1.0) * l.max(1.0));
        // five-point Laplacian in the plane at an interior point
        let p = Vec2::polar(0.5 + 0.4 * t, th);
        let hh = 1e-3;
        let lap = (f.value(p + Vec2::new(hh, 0.0)) + f.value(p - Vec2::new(hh, 0.0))
            + f.value(p + Vec2::new(0.0, hh)) + f.value(p - Vec2::new(0.0, hh)) - 4.0 * f.value(p)) / (hh * hh);
        let scale = l * l * p.norm().powf(l - 2.0);
        prop_assert!(lap.abs() < 1e-4 * scale.max(1.0), "lap {} scale {}", lap, scale);
        let tol = 1e-12 * l.max(1.0);
        match bc {
            DirichletNeumann => {
                prop_assert!(f.angular(0.0).abs() < tol);
                prop_assert!(f.angular_derivative(omega).abs() < tol);
            }
            NeumannNeumann => {
                prop_assert!(f.angular_derivative(0.0).abs() < tol);
                prop_assert!(f.angular_derivative(omega).abs() < tol);
            }
            DirichletDirichlet => {
                prop_assert!(f.angular(0.0).abs() < tol);
                prop_assert!(f.angular(omega).abs() < tol);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn beach_meshes_and_dtn_operators(omega in (PI / 8.0)..(PI / 4.0)) {
        let d = build_beach(omega, &SurfaceProfile::Flat, 0.1, &BeachOptions::default()).unwrap();
        d.mesh.validate().unwrap();
        for t in 0..d.mesh.triangles.len() {
            prop_assert!(d.mesh.signed_area(t) > 0.0);
        }
        for c in d.contact_cosines() {
            prop_assert!((c + omega.cos()).abs() < 1e-3, "cos {} vs {}", c, -omega.cos());
        }
        let op = assemble_dtn(&d).unwrap();
        prop_assert!(op.self_adjointness_defect() < 1e-8);
        let ones = vec![1.0; op.len()];
        prop_assert!(op.apply(&ones).iter().all(|v| v.abs() < 1e-9));
        let sp = op.spectrum().unwrap();
        prop_assert!(sp.values[0].abs() < 1e-10);
        prop_assert!(sp.values[1] > 1e-6);
        prop_assert!(sp.values.iter().all(|&v| v >= -1e-10));
        prop_assert!(sp.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn graded_sectors_are_conforming(omega in 0.3f64..3.0, h in 0.08f64..0.2) {
        let beta = default_grading(omega).max(1.0);
        let d = build_sector_graded(omega, 1.0, h, beta).unwrap();
        d.mesh.validate().unwrap();
        let area: f64 = (0..d.mesh.triangles.len()).map(|t| d.mesh.signed_area(t)).sum();
        prop_assert!((0..d.mesh.triangles.len()).all(|t| d.mesh.signed_area(t) > 0.0));
        // polygonal arc: area within O(h^2) of omega / 2
        prop_assert!((area - omega / 2.0).abs() < omega * h * h);
    }
}
