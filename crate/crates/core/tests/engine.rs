use num_complex::Complex64 as C64;
use wander_core::approximation::{
    constrained_runge, hermite_interpolant, verify_fit, ApproxError, ApproxPiece, ApproxProblem, HermiteConstraint,
    TargetFn,
};
use wander_core::geometry::CompactSet;
use wander_core::polynomials::Polynomial;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn disk(center: C64, r: f64) -> CompactSet {
    CompactSet::disk(center, r, r / 64.0).unwrap()
}

#[test]
fn first_escaping_step_shape() {
    // z/2 near 0, translation by 4 on a disk around 3, and a point sent to 0.
    let x1 = c(3.0, 0.9);
    let problem = ApproxProblem {
        pieces: vec![
            ApproxPiece { set: disk(c(0.0, 0.0), 1.0), target: TargetFn::Affine { alpha: c(0.5, 0.0), beta: c(0.0, 0.0) } },
            ApproxPiece { set: disk(c(3.0, 0.0), 0.5), target: TargetFn::Affine { alpha: c(1.0, 0.0), beta: c(4.0, 0.0) } },
        ],
        constraints: vec![
            HermiteConstraint::hermite(c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)),
            HermiteConstraint::value(x1, c(0.0, 0.0)),
        ],
        epsilon: 0.05,
        base: None,
    };
    let fit = constrained_runge(&problem, 200).unwrap();
    let p = &fit.poly;
    assert!(p.horner(x1).norm() < 1e-10);
    let (v, d) = p.horner2(c(0.0, 0.0));
    assert!(v.norm() < 1e-10 && (d - 0.5).norm() < 1e-10);
    assert!(verify_fit(p, &problem).success);
}

#[test]
fn single_polynomial_target_is_recovered() {
    let target = Polynomial::new(vec![c(0.3, 0.1), c(-1.0, 0.0), c(0.0, 0.2), c(0.05, -0.05)]);
    let problem = ApproxProblem {
        pieces: vec![ApproxPiece { set: disk(c(1.0, -1.0), 0.7), target: TargetFn::Polynomial(target) }],
        constraints: vec![],
        epsilon: 1e-10,
        base: None,
    };
    let fit = constrained_runge(&problem, 50).unwrap();
    assert!(verify_fit(&fit.poly, &problem).worst_margin() <= 1e-10);
}

#[test]
fn tiny_cap_reports_best_margin() {
    let problem = ApproxProblem {
        pieces: vec![
            ApproxPiece { set: disk(c(0.0, 0.0), 1.0), target: TargetFn::Constant(c(0.0, 0.0)) },
            ApproxPiece { set: disk(c(3.0, 0.0), 1.0), target: TargetFn::Constant(c(1.0, 0.0)) },
        ],
        constraints: vec![],
        epsilon: 1e-6,
        base: None,
    };
    match constrained_runge(&problem, 3) {
        Err(ApproxError::DegreeCapExceeded { cap, best_margin, .. }) => {
            assert_eq!(cap, 3);
            assert!(best_margin.is_finite() && best_margin > 1e-6);
        }
        other => panic!("expected DegreeCapExceeded, got {other:?}"),
    }
}

#[test]
fn overlapping_pieces_are_rejected() {
    let problem = ApproxProblem {
        pieces: vec![
            ApproxPiece { set: disk(c(0.0, 0.0), 1.0), target: TargetFn::Constant(c(0.0, 0.0)) },
            ApproxPiece { set: disk(c(1.5, 0.0), 1.0), target: TargetFn::Constant(c(1.0, 0.0)) },
        ],
        constraints: vec![],
        epsilon: 0.1,
        base: None,
    };
    assert!(matches!(constrained_runge(&problem, 40), Err(ApproxError::PiecesOverlap(..))));
}

#[test]
fn hermite_data_is_interpolated() {
    let data = [
        HermiteConstraint::hermite(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)),
        HermiteConstraint::value(c(1.0, 1.0), c(-1.0, 0.5)),
        HermiteConstraint::hermite(c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
    ];
    let p = hermite_interpolant(&data).unwrap();
    assert_eq!(p.degree(), 4);
    for h in &data {
        let (v, d) = p.horner2(h.point);
        assert!((v - h.value).norm() < 1e-12);
        if let Some(dd) = h.deriv {
            assert!((d - dd).norm() < 1e-12);
        }
    }
}
