use num_complex::Complex64 as C64;
use wander_core::construction::ConstructionOptions;
use wander_core::escaping::{run_escaping, run_escaping_outcome};
use wander_core::geometry::{JordanRegion, Mode};
use wander_core::oscillating::run_oscillating;
use wander_core::polynomials::iterate;

fn square() -> JordanRegion {
    let v = [(0.0, 0.0), (0.1, 0.0), (0.1, 0.1), (0.0, 0.1)];
    JordanRegion::Polygon { vertices: v.iter().map(|&(a, b)| C64::new(a, b)).collect() }
}

fn opts(mode: Mode, h: f64) -> ConstructionOptions {
    let mut o = ConstructionOptions::for_mode(mode);
    o.h = h;
    o
}

#[test]
fn escaping_first_stage() {
    let (f, out) = run_escaping(&square(), 1, &opts(Mode::Escaping, 5e-4)).unwrap();
    let (v, d) = f.horner2(C64::new(0.0, 0.0));
    assert!(v.norm() < 1e-10 && (d - 0.5).norm() < 1e-10);
    assert!(iterate(&f, out.xs[0], 1).unwrap().norm() < 1e-8);
    assert!(out.eps_history[0] <= 0.5);
    assert!(out.summary.unwrap().passed());
    let stay = out.stay_away.unwrap();
    assert_eq!(stay.orbit_distances.len(), 2);
}

#[test]
fn escaping_keeps_certified_stages_when_a_later_one_fails() {
    let mut o = opts(Mode::Escaping, 5e-4);
    o.degree_cap = 40;
    let (_, out) = run_escaping_outcome(&square(), 2, &o);
    assert_eq!(out.stages.len(), 1);
    assert!(out.stages[0].certificate.passed());
    assert_eq!(out.error_kind.as_deref(), Some("DegreeCapExceeded"));
    assert!(out.summary.is_none());
}

#[test]
fn coarse_resolution_is_reported() {
    let err = run_escaping(&square(), 1, &opts(Mode::Escaping, 0.02)).unwrap_err();
    assert!(err.to_string().contains("ResolutionTooCoarse") || err.to_string().contains("coarse"), "{err}");
}

#[test]
fn oscillating_first_stage_trace() {
    let region = JordanRegion::Disk { center: C64::new(0.0, 0.0), radius: 1.0 };
    let (f, out) = run_oscillating(&region, 1, &opts(Mode::Oscillating, 0.01)).unwrap();
    let (v, d) = f.horner2(C64::new(1.0, 0.0));
    assert!((v - 1.0).norm() < 1e-10 && (d - 0.5).norm() < 1e-10);
    let row = &out.trace[0];
    assert_eq!((row.inward_iterate, row.outward_iterate), (1, 2));
    assert!(row.min_radius > 0.2 && row.max_radius < 1.0 / 3.0);
    assert!(row.outward_deviation < 1.0);
    assert!(out.summary.unwrap().passed());
}
