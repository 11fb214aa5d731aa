use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "wander").unwrap();
        wander::wander(&m).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("wander", m).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn poly_evaluates_in_its_frame() {
    with_module(c"
p = wander.Poly([1, 2], center=1+0j, scale=2.0)
assert p.degree == 1
assert abs(p(3) - 3) < 1e-15
q = wander.Poly.parse(p.to_poly_string())
assert q.coeffs == p.coeffs and q.scale == 2.0
assert abs(p.derivative()(0) - 1) < 1e-15
");
}

#[test]
fn rejects_bad_input() {
    with_module(c"
try:
    wander.Poly([], 0j, 1.0)
    raise SystemExit('accepted empty coefficients')
except ValueError:
    pass
try:
    wander.run('{\"mode\":\"escaping\"}')
    raise SystemExit('accepted incomplete config')
except ValueError:
    pass
");
}

#[test]
fn dynamics_helpers() {
    with_module(c"
half = wander.Poly([0, 0.5])
assert wander.classify(half, 3+1j, 0j) == 'converges'
sq = wander.Poly([0, 0, 1])
assert wander.classify(sq, 2j, 0j) == 'escapes'
assert wander.univalent_on_disk(sq, 1+0j, 0.5)
assert not wander.univalent_on_disk(sq, 0j, 0.5)
assert [wander.schedule(k) for k in (1, 2, 3)] == [1, 3, 6]
img = wander.render_basin(half, 0j, (-1.0, 1.0, -1.0, 1.0), 0.5)
assert img.startswith(b'P6') and len(img) >= 4 * 4 * 3
");
}

#[test]
fn runs_a_small_scenario() {
    with_module(c"
import json
cfg = {'mode': 'escaping', 'region': {'type': 'disk', 'center': [0, 0], 'radius': 1},
       'K': 1, 'h': 0.02, 'N': 3, 'degree_cap': 4}
report = json.loads(wander.run(json.dumps(cfg)))
assert report['all_passed'] is False
assert report['error_kind'] == 'DegreeCapExceeded'
");
}
