//! Python module `wander`.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use wander_core::frontend::{self, Fate, FrontendError, Scenario, Viewport};
use wander_core::geometry::CompactSet;
use wander_core::polynomials::Polynomial;
use wander_core::verification::{check_univalence, Tolerances};
use wander_core::Complex64;

fn to_py(e: FrontendError) -> PyErr {
    match e.exit_code() {
        frontend::EXIT_CONFIG => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Polynomial `Σ a_k ((z - center) / scale)^k`.
#[pyclass(name = "Poly", module = "wander", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPoly {
    pub inner: Polynomial,
}

#[pymethods]
impl PyPoly {
    #[new]
    #[pyo3(signature = (coeffs, center = Complex64::new(0.0, 0.0), scale = 1.0))]
    fn new(coeffs: Vec<Complex64>, center: Complex64, scale: f64) -> PyResult<Self> {
        if coeffs.is_empty() || !(scale > 0.0 && scale.is_finite()) {
            return Err(PyValueError::new_err("need at least one coefficient and a positive scale"));
        }
        Ok(PyPoly { inner: Polynomial::in_frame(coeffs, center, scale) })
    }

    /// Parses the `.poly` text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Polynomial::from_poly_str(text)
            .map(|inner| PyPoly { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Polynomial::read_poly(Path::new(path))
            .map(|inner| PyPoly { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __call__(&self, z: Complex64) -> Complex64 {
        self.inner.horner(z)
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn coeffs(&self) -> Vec<Complex64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn center(&self) -> Complex64 {
        self.inner.center()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn derivative(&self) -> PyPoly {
        PyPoly { inner: self.inner.derivative() }
    }

    /// `f^n(z)`, or `None` on overflow.
    fn iterate(&self, z: Complex64, n: usize) -> Option<Complex64> {
        wander_core::polynomials::iterate(&self.inner, z, n)
    }

    fn to_poly_string(&self) -> String {
        self.inner.to_poly_string()
    }

    fn __repr__(&self) -> String {
        format!("Poly(degree={})", self.inner.degree())
    }
}

/// Runs a scenario given as JSON text and returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (config_json, base_dir = "."))]
fn run(py: Python<'_>, config_json: &str, base_dir: &str) -> PyResult<String> {
    let scenario = Scenario::from_json(config_json).map_err(to_py)?;
    let report = py
        .detach(|| frontend::with_thread_pool(|| frontend::run_scenario(&scenario, Path::new(base_dir))))
        .map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Same as `wander construct`; returns the process exit code.
#[pyfunction]
fn construct(py: Python<'_>, config_path: &str, out_dir: &str) -> PyResult<i32> {
    let config = Path::new(config_path);
    let scenario = Scenario::from_path(config).map_err(to_py)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let report = py
        .detach(|| frontend::with_thread_pool(|| frontend::construct(&scenario, base, Path::new(out_dir))))
        .map_err(to_py)?;
    Ok(report.exit_code())
}

type CheckRows = Vec<(String, bool, f64)>;

/// Re-checks a stored polynomial; returns `(passed, [(name, pass, margin)])`.
#[pyfunction]
fn verify(py: Python<'_>, poly_path: &str, config_path: &str) -> PyResult<(bool, CheckRows)> {
    let config = Path::new(config_path);
    let scenario = Scenario::from_path(config).map_err(to_py)?;
    let f = Polynomial::read_poly(Path::new(poly_path)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let cert = py.detach(|| frontend::verify(&f, &scenario, base, None)).map_err(to_py)?;
    let rows = cert.checks.iter().map(|c| (c.name.clone(), c.pass, c.margin)).collect();
    Ok((cert.passed(), rows))
}

/// Whether `f^n` is univalent on the closed disk `D(center, radius)`.
#[pyfunction]
#[pyo3(signature = (poly, center, radius, n = 1))]
fn univalent_on_disk(poly: &PyPoly, center: Complex64, radius: f64, n: usize) -> PyResult<bool> {
    let disk = CompactSet::disk(center, radius, radius / 64.0).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(check_univalence(&poly.inner, &disk, n, &Tolerances::default()).pass)
}

/// `"converges"`, `"escapes"` or `"undecided"` for the orbit of `z`.
#[pyfunction]
fn classify(poly: &PyPoly, z: Complex64, fixed_point: Complex64) -> &'static str {
    match frontend::classify(&poly.inner, z, fixed_point) {
        Fate::Converges => "converges",
        Fate::Escapes => "escapes",
        Fate::Undecided => "undecided",
    }
}

/// Basin picture of `fixed_point` as binary PPM bytes.
#[pyfunction]
#[pyo3(signature = (poly, fixed_point, viewport, pixel = 0.02))]
fn render_basin<'py>(
    py: Python<'py>,
    poly: &PyPoly,
    fixed_point: Complex64,
    viewport: (f64, f64, f64, f64),
    pixel: f64,
) -> PyResult<Bound<'py, PyBytes>> {
    let (re_min, re_max, im_min, im_max) = viewport;
    if !(re_max > re_min && im_max > im_min && pixel > 0.0) {
        return Err(PyValueError::new_err("empty viewport or non-positive pixel"));
    }
    let v = Viewport { re_min, re_max, im_min, im_max };
    let f = poly.inner.clone();
    let bytes = py.detach(|| frontend::render_basin(&f, fixed_point, &v, pixel).to_ppm());
    Ok(PyBytes::new(py, &bytes))
}

/// `N_k = k(k+1)/2`.
#[pyfunction]
fn schedule(k: usize) -> usize {
    wander_core::oscillating::schedule(k)
}

#[pymodule]
pub fn wander(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPoly>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(univalent_on_disk, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(render_basin, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    Ok(())
}
