//! Pieces shared by the escaping and oscillating constructions: options,
//! errors, the normalized starting geometry, the ε-halving loop and image
//! covers.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approximation::{constrained_runge_with, ApproxError, ApproxProblem, FitOptions, FitResult};
use crate::geometry::{
    boundary_sequence, cover_compact, normalize, rasterize, tower, AffineMap, CompactSet, GeometryError,
    JordanRegion, Mode, TowerSchedule,
};
use crate::polynomials::{iterate, Polynomial};
use crate::verification::{Certificate, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructionOptions {
    /// Circumradius of Ω after normalization.
    pub omega_radius: f64,
    /// Radii of the neighbourhoods `U_n` (normalized coordinates).
    pub schedule: TowerSchedule,
    /// Cell size in the coordinates of the input region.
    pub h: f64,
    /// Number of boundary sequence points `x_1 … x_N`.
    pub sequence_length: usize,
    /// Where `x_n` sits between `∂U_n` (0) and `∂U_{n-1}` (1).
    pub sequence_frac: f64,
    pub degree_cap: usize,
    /// Multiplier `c` of the ε caps `c · 2^{-k}`.
    pub eps_scale: f64,
    pub max_halvings: usize,
    pub tolerances: Tolerances,
    pub fit: FitOptions,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        ConstructionOptions::for_mode(Mode::Escaping)
    }
}

impl ConstructionOptions {
    pub fn for_mode(mode: Mode) -> ConstructionOptions {
        let (omega_radius, schedule, sequence_length) = match mode {
            Mode::Escaping => (0.05, TowerSchedule::Geometric { r0: 0.8, ratio: 0.5 }, 8),
            Mode::Oscillating => (0.005, TowerSchedule::Geometric { r0: 0.095, ratio: 0.3 }, 5),
        };
        ConstructionOptions {
            omega_radius,
            schedule,
            h: 1e-3,
            sequence_length,
            sequence_frac: 0.75,
            degree_cap: 400,
            eps_scale: 1.0,
            max_halvings: 20,
            tolerances: Tolerances::default(),
            fit: FitOptions::default(),
        }
    }

    /// Cap on `ε_k`.
    pub fn eps_cap(&self, k: usize) -> f64 {
        self.eps_scale * 0.5f64.powi(k as i32)
    }
}

#[derive(Debug, Error, Clone)]
pub enum ConstructionError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("stage {stage}: {source}")]
    Approximation { stage: usize, source: ApproxError },
    #[error("stage {stage}: ConstructionFailed at check '{check}': {details}")]
    Failed { stage: usize, check: String, details: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl ConstructionError {
    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ConstructionError::Geometry(GeometryError::ResolutionTooCoarse(_)) => "ResolutionTooCoarse",
            ConstructionError::Geometry(GeometryError::DegenerateRegion(_)) => "DegenerateRegion",
            ConstructionError::Geometry(GeometryError::NoRoom { .. }) => "NoRoom",
            ConstructionError::Geometry(GeometryError::Collision { .. }) => "Collision",
            ConstructionError::Approximation { source: ApproxError::DegreeCapExceeded { .. }, .. } => {
                "DegreeCapExceeded"
            }
            ConstructionError::Approximation { source: ApproxError::PiecesOverlap(..), .. } => "PiecesOverlap",
            ConstructionError::Approximation { source: ApproxError::IllConditioned(..), .. } => "IllConditioned",
            ConstructionError::Failed { .. } => "ConstructionFailed",
            ConstructionError::InvalidInput(_) => "InvalidInput",
        }
    }
}

/// One accepted stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub epsilon: f64,
    pub halvings: usize,
    pub degree: usize,
    pub fit_margins: Vec<f64>,
    pub constraint_residual: f64,
    pub poly: Polynomial,
    pub certificate: Certificate,
}

/// Ω in normalized position together with its tower and boundary sequence.
#[derive(Debug, Clone)]
pub struct Setup {
    pub map: AffineMap,
    pub omega: CompactSet,
    /// `U_0 … U_N`.
    pub towers: Vec<CompactSet>,
    /// `x_1 … x_N`.
    pub xs: Vec<C64>,
    /// Cell size in normalized coordinates.
    pub h: f64,
}

pub fn prepare(region: &JordanRegion, mode: Mode, opts: &ConstructionOptions) -> Result<Setup, ConstructionError> {
    if opts.sequence_length < 1 {
        return Err(ConstructionError::InvalidInput("sequence length must be positive".into()));
    }
    let map = normalize(region, mode, opts.omega_radius)?;
    let h = opts.h * map.alpha.norm();
    let omega = rasterize(&region.transform(&map), h)?;
    let towers = tower(&omega, &opts.schedule, opts.sequence_length, h)?;
    let (center, radius) = mode.target_disk();
    let reach = towers[0].radius_about(center) + towers[0].h();
    if reach >= radius {
        return Err(GeometryError::ResolutionTooCoarse(format!(
            "U_0 reaches {reach:.4} from {center}, outside the normalization disk of radius {radius:.4}"
        ))
        .into());
    }
    let xs = boundary_sequence(&omega, &towers, opts.sequence_length, opts.sequence_frac)?;
    Ok(Setup { map, omega, towers, xs, h })
}

/// A disk piece resolved with 64 cells per radius.
pub fn disk_piece(center: C64, radius: f64) -> Result<CompactSet, GeometryError> {
    CompactSet::disk(center, radius, radius / 64.0)
}

/// Outcome of the ε loop.
pub struct Accepted {
    pub fit: FitResult,
    pub epsilon: f64,
    pub halvings: usize,
}

/// Fits with `ε = eps_start, eps_start/2, …` until `accept` certifies the
/// polynomial, at most `max_halvings` times.
pub fn fit_with_halving(
    stage: usize,
    eps_start: f64,
    opts: &ConstructionOptions,
    build: impl Fn(f64) -> ApproxProblem,
    accept: impl Fn(&Polynomial) -> Certificate,
) -> Result<Accepted, ConstructionError> {
    let mut eps = eps_start;
    let mut last_failure: Option<(String, String)> = None;
    for halvings in 0..=opts.max_halvings {
        let problem = build(eps);
        let fit = match constrained_runge_with(&problem, opts.degree_cap, &opts.fit) {
            Ok(fit) => fit,
            Err(source) => {
                return Err(match last_failure {
                    None => ConstructionError::Approximation { stage, source },
                    Some((check, details)) => ConstructionError::Failed {
                        stage,
                        check,
                        details: format!("{details}; halving ε to {eps:.3e} then hit: {source}"),
                    },
                })
            }
        };
        let cert = accept(&fit.poly);
        match cert.first_failure() {
            None => return Ok(Accepted { fit, epsilon: eps, halvings }),
            Some(c) => last_failure = Some((c.name.clone(), c.details.clone())),
        }
        eps *= 0.5;
    }
    let (check, details) = last_failure.expect("at least one attempt");
    Err(ConstructionError::Failed { stage, check, details: format!("{details} (after {} halvings)", opts.max_halvings) })
}

/// Closed cover of `f^n(∂source)` (with holes filled) kept clear of the
/// avoided sets and points.  `δ` is a quarter of the distance from the image
/// to everything avoided.
pub fn cover_image(
    f: &Polynomial,
    source: &CompactSet,
    n: usize,
    avoid: &[&CompactSet],
    avoid_points: &[C64],
    stage: usize,
) -> Result<CompactSet, ConstructionError> {
    let fail = |details: String| ConstructionError::Failed { stage, check: "cover".into(), details };
    let mut count = 1024;
    let (ws, delta) = loop {
        let zs = source.samples(count);
        let ws: Vec<C64> = zs
            .par_iter()
            .map(|&z| iterate(f, z, n))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| fail(format!("orbit of ∂source overflowed after {n} steps")))?;
        let to_sets = avoid
            .iter()
            .map(|s| ws.par_iter().map(|&w| s.distance(w)).reduce(|| f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        let to_points = avoid_points
            .iter()
            .map(|&p| ws.iter().map(|w| (w - p).norm()).fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        let delta = 0.25 * to_sets.min(to_points);
        if !(delta > 0.0) {
            return Err(fail("image meets an avoided set".into()));
        }
        let m = ws.len();
        let gap = (0..m).map(|k| (ws[(k + 1) % m] - ws[k]).norm()).fold(0.0, f64::max);
        if gap <= 0.5 * delta || count >= 1 << 17 {
            break (ws, delta.min(1.0));
        }
        count *= 2;
    };
    cover_compact(&ws, delta, avoid, avoid_points, delta / 64.0).map_err(ConstructionError::from)
}
