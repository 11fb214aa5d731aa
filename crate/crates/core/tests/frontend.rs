use std::path::Path;

use num_complex::Complex64 as C64;
use wander_core::frontend::{
    construct, render_basin, render_figure, run_scenario, FigureInput, RunReport, Scenario, Viewport, BASIN, CURVE,
    ESCAPES,
};
use wander_core::geometry::Mode;
use wander_core::polynomials::Polynomial;

const SQUARE: &str = r#"{"mode":"escaping","region":{"type":"polygon","vertices":[[0,0],[0.1,0],[0.1,0.1],[0,0.1]]},"K":1,"h":0.0005,"N":3}"#;

#[test]
fn scenario_json_round_trips() {
    let s = Scenario::from_json(SQUARE).unwrap();
    let again = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(s, again);
}

#[test]
fn default_viewports() {
    let e = Viewport::for_mode(Mode::Escaping, 3);
    assert_eq!((e.re_min, e.re_max, e.im_min, e.im_max), (-2.0, 18.0, -4.0, 4.0));
    let o = Viewport::for_mode(Mode::Oscillating, 2);
    assert_eq!((o.re_min, o.re_max, o.im_min, o.im_max), (-1.0, 10.0, -2.0, 2.0));
}

#[test]
fn first_stage_figure_has_two_curves() {
    let s = Scenario::from_json(SQUARE).unwrap();
    let report = run_scenario(&s, Path::new(".")).unwrap();
    let f = report.final_poly().unwrap();
    let img = render_figure(f, &FigureInput::for_scenario(&s, Path::new(".")).unwrap());
    let comps = img.components(CURVE);
    assert_eq!(comps.len(), 2);
    for (comp, x) in comps.iter().zip([3.0, 7.0]) {
        assert!(comp.closed);
        assert!((comp.bbox_center() - C64::new(x, 0.0)).norm() < 0.5);
    }
}

#[test]
fn square_map_basin() {
    let f = Polynomial::new(vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let v = Viewport { re_min: -2.0, re_max: 2.0, im_min: -2.0, im_max: 2.0 };
    let img = render_basin(&f, C64::new(0.0, 0.0), &v, 0.05);
    for (i, px) in img.pixels.iter().enumerate() {
        let z = img.pixel_center(i % img.width, i / img.width);
        if z.norm() < 0.95 {
            assert_eq!(*px, BASIN, "{z}");
        } else if z.norm() > 1.05 {
            assert_eq!(*px, ESCAPES, "{z}");
        }
    }
}

#[test]
fn mask_scenario_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    // A 40x40 black square in a 60x60 raster.
    let mut pbm = String::from("P1\n60 60\n");
    for r in 0..60 {
        let row: Vec<&str> = (0..60).map(|c| if (10..50).contains(&r) && (10..50).contains(&c) { "1" } else { "0" }).collect();
        pbm.push_str(&row.join(" "));
        pbm.push('\n');
    }
    std::fs::write(dir.path().join("omega.pbm"), pbm).unwrap();
    let cfg = r#"{"mode":"escaping","region":{"type":"mask","path":"omega.pbm","cell":0.0025},"K":1,"h":0.0005,"N":3}"#;
    let s = Scenario::from_json(cfg).unwrap();
    let out = dir.path().join("out");
    let report = construct(&s, dir.path(), &out).unwrap();
    assert!(report.all_passed, "{:?}", report.error);
    assert_eq!(report.artifacts, vec!["f_1.poly".to_string(), "report.json".to_string()]);
    let stored = RunReport::from_path(&out.join("report.json")).unwrap();
    assert_eq!(stored.hash, stored.compute_hash());
    assert!(stored.eps_history.iter().enumerate().all(|(i, e)| *e <= 0.5f64.powi(i as i32 + 1)));
}
