//! Checks that tie the series, spectral and dynamical layers together.

use hplk_core::heun::assemble_eigenfunction;
use hplk_core::spectral::{roots_in_b, trace_curve, CurveEquation, CurveSpec, Sign};
use hplk_core::torus::{displacement_range, initial_vector, monodromy_numeric, rotation_number, PhysParams};
use hplk_core::validation::adjacencies;
use num_complex::Complex64;

fn norm2(v: [Complex64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

#[test]
fn eigenfunction_is_a_monodromy_eigenvector() {
    for &(omega, b, a) in &[(2.0, 1.1, 1.0), (0.7, 3.4, 2.0), (1.5, -2.2, 0.4)] {
        let p = PhysParams::new(omega, b, a).unwrap();
        let rho = rotation_number(&p, 1e-10).unwrap();
        assert!(!rho.locked, "({omega}, {b}, {a}) is locked");
        let exponent = 0.5 * (rho.rho - p.l());
        let hp = p.heun_params(Complex64::new(exponent, 0.0)).unwrap();
        let e = assemble_eigenfunction(&hp, 1e-6).unwrap().expect("pasting determinant should vanish");
        let v = initial_vector(&p, &e);
        let m = monodromy_numeric(&p, 1e-12).unwrap();
        let mv = m.m.apply(v);
        let mult = Complex64::from_polar(1.0, std::f64::consts::TAU * exponent);
        let defect = norm2([mv[0] - mult * v[0], mv[1] - mult * v[1]]) / norm2(v);
        assert!(defect < 1e-6, "({omega}, {b}, {a}): defect {defect:e}");
    }
}

#[test]
fn adjacencies_have_trivial_dynamics() {
    for (omega, l) in [(1.0, 1u32), (1.5, 2)] {
        let pts = adjacencies(omega, l, 0.05, 3.0, 300).unwrap();
        assert!(!pts.is_empty(), "no adjacency for ω {omega}, l {l}");
        for q in &pts {
            assert!(q.poincare_residual < 1e-6, "{q:?}");
            assert!(q.monodromy_distance < 1e-6, "{q:?}");
        }
    }
}

/// Distance from the displacement range ends to the nearest integer.
fn edge_distance(p: &PhysParams) -> f64 {
    let r = displacement_range(p, 1e-11).unwrap();
    let d = |x: f64| (x - x.round()).abs();
    d(r.min).min(d(r.max))
}

#[test]
fn traced_boundary_curves_lie_on_lock_edges() {
    let omega = 1.0;
    for sign in [Sign::Plus, Sign::Minus] {
        let spec = CurveSpec::new(CurveEquation::E0, sign, omega);
        let seeds = roots_in_b(&spec, 1.0, -0.5, 3.0, 141, 1e-12).unwrap();
        assert!(!seeds.is_empty(), "no root for sign {sign:?}");
        let curve = trace_curve(&spec, 1.0, 3.0, 20, seeds[0].b, 1e-12).unwrap();
        assert_eq!(curve.points.len(), 21);
        for pt in &curve.points {
            assert!(pt.residual < 1e-8, "{pt:?}");
            let p = PhysParams::new(omega, pt.b, pt.a).unwrap();
            let gap = edge_distance(&p);
            assert!(gap < 1e-6, "{pt:?}: displacement range misses an integer by {gap:e}");
        }
    }
}
