//! Scenario files, run reports, re-verification and raster output.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "mode": "escaping",
//!   "region": { "type": "polygon", "vertices": [[0,0],[0.1,0],[0.1,0.1],[0,0.1]] },
//!   "K": 3, "h": 0.0005, "N": 8,
//!   "tolerances": { "containment_samples": 2048 },
//!   "seed": 0,
//!   "degree_cap": 400
//! }
//! ```
//!
//! Regions are `{"type":"disk","center":[re,im],"radius":r}`,
//! `{"type":"polygon","vertices":[[re,im],...]}` or
//! `{"type":"mask","path":"omega.pbm","origin":[re,im],"cell":c}` where the
//! PBM path is taken relative to the scenario file and black pixels are
//! inside.  Polynomials and every plotted point live in the normalized
//! coordinates chosen by the construction.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::construction::{prepare, ConstructionError, ConstructionOptions, StageRecord};
use crate::escaping::{self, StayAway};
use crate::geometry::{polygon_is_simple, AffineMap, JordanRegion, Mode, PixelMask};
use crate::oscillating::{self, schedule, TraceRow};
use crate::polynomials::{iterate, PolyError, Polynomial};
use crate::verification::{Certificate, Tolerances};

/// Process exit status for a run whose certificates all pass.
pub const EXIT_OK: i32 = 0;
/// Exit status for a failed construction or a failed check.
pub const EXIT_FAILED: i32 = 2;
/// Exit status for unreadable or invalid configuration.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("config: {0}")]
    Config(String),
    #[error("polynomial file: {0}")]
    Poly(#[from] PolyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Construction(#[from] ConstructionError),
    #[error("mode mismatch: the polynomial looks like an {found:?} stage but the config says {expected:?}")]
    ModeMismatch { expected: Mode, found: Option<Mode> },
}

impl FrontendError {
    pub fn exit_code(&self) -> i32 {
        match self {
            FrontendError::Config(_) | FrontendError::Poly(_) | FrontendError::ModeMismatch { .. } => EXIT_CONFIG,
            FrontendError::Io(_) => EXIT_CONFIG,
            FrontendError::Construction(_) => EXIT_FAILED,
        }
    }
}

fn config_err(msg: impl Into<String>) -> FrontendError {
    FrontendError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionSpec {
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Mask {
        path: PathBuf,
        #[serde(default)]
        origin: [f64; 2],
        #[serde(default = "unit_cell")]
        cell: f64,
    },
}

fn unit_cell() -> f64 {
    1.0
}

fn c64(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    pub region: RegionSpec,
    #[serde(rename = "K")]
    pub stages: usize,
    pub h: f64,
    #[serde(rename = "N")]
    pub sequence_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_cap: Option<usize>,
    /// Multiplier `c` of the ε caps `c · 2^{-k}`; must lie in `(0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_scale: Option<f64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, FrontendError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Scenario, FrontendError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), FrontendError> {
        if self.stages < 1 {
            return Err(config_err("K must be at least 1"));
        }
        if self.sequence_length < self.stages + 2 {
            return Err(config_err(format!("N = {} must be at least K + 2 = {}", self.sequence_length, self.stages + 2)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(config_err("h must be positive"));
        }
        if let Some(cap) = self.degree_cap {
            if cap < 1 {
                return Err(config_err("degree_cap must be positive"));
            }
        }
        if let Some(c) = self.eps_scale {
            if !(c > 0.0 && c <= 1.0) {
                return Err(config_err("eps_scale must lie in (0, 1]"));
            }
        }
        match &self.region {
            RegionSpec::Disk { center, radius } => {
                if !(center.iter().all(|v| v.is_finite()) && radius.is_finite() && *radius > 0.0) {
                    return Err(config_err("disk needs a finite center and a positive radius"));
                }
            }
            RegionSpec::Polygon { vertices } => {
                let v: Vec<C64> = vertices.iter().copied().map(c64).collect();
                if v.len() < 3 || !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Err(config_err("polygon needs at least three finite vertices"));
                }
                if !polygon_is_simple(&v) {
                    return Err(config_err("polygon is not simple"));
                }
            }
            RegionSpec::Mask { origin, cell, .. } => {
                if !(origin.iter().all(|v| v.is_finite()) && cell.is_finite() && *cell > 0.0) {
                    return Err(config_err("mask needs a finite origin and a positive cell"));
                }
            }
        }
        Ok(())
    }

    /// The region, reading mask files relative to `base_dir`.
    pub fn region(&self, base_dir: &Path) -> Result<JordanRegion, FrontendError> {
        Ok(match &self.region {
            RegionSpec::Disk { center, radius } => JordanRegion::Disk { center: c64(*center), radius: *radius },
            RegionSpec::Polygon { vertices } => {
                JordanRegion::Polygon { vertices: vertices.iter().copied().map(c64).collect() }
            }
            RegionSpec::Mask { path, origin, cell } => {
                let mut mask = read_pbm(&base_dir.join(path))?;
                mask.origin = c64(*origin);
                mask.cell = C64::new(*cell, 0.0);
                JordanRegion::Mask(mask)
            }
        })
    }

    pub fn options(&self) -> ConstructionOptions {
        let mut opts = ConstructionOptions::for_mode(self.mode);
        opts.h = self.h;
        opts.sequence_length = self.sequence_length;
        if let Some(t) = self.tolerances {
            opts.tolerances = t;
        }
        opts.tolerances.sample_phase = seed_phase(self.seed);
        if let Some(cap) = self.degree_cap {
            opts.degree_cap = cap;
        }
        if let Some(c) = self.eps_scale {
            opts.eps_scale = c;
        }
        opts
    }
}

/// Sample offset derived from the seed: the fractional part of `seed · φ⁻¹`.
pub fn seed_phase(seed: u64) -> f64 {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (seed as f64 * GOLDEN).fract()
}

/// Reads a PBM file; black pixels are inside.
pub fn read_pbm(path: &Path) -> Result<PixelMask, FrontendError> {
    let img = image::ImageReader::open(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?
        .with_guessed_format()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?
        .decode()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let bits = img.pixels().map(|p| p.0[0] < 128).collect();
    Ok(PixelMask::new(w, h, bits))
}

/// Everything `construct` produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub stages_completed: usize,
    pub stages: Vec<StageRecord>,
    pub eps_history: Vec<f64>,
    pub degrees: Vec<usize>,
    pub summary: Option<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stay_away: Option<StayAway>,
    pub error: Option<String>,
    pub error_kind: Option<String>,
    pub normalization: Option<AffineMap>,
    /// `x_1 … x_N` in normalized coordinates.
    pub sequence: Vec<C64>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub all_passed: bool,
    /// Seconds since the Unix epoch; excluded from the hash.
    pub timestamp: u64,
    /// SHA-256 of the report with `timestamp` zeroed and `hash` empty.
    pub hash: String,
}

impl RunReport {
    pub fn compute_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.timestamp = 0;
        canonical.hash.clear();
        let bytes = serde_json::to_vec(&canonical).expect("reports always serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }

    /// The last certified polynomial.
    pub fn final_poly(&self) -> Option<&Polynomial> {
        self.stages.last().map(|s| &s.poly)
    }

    pub fn from_path(path: &Path) -> Result<RunReport, FrontendError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

/// Runs the scenario without touching the file system.
pub fn run_scenario(scenario: &Scenario, base_dir: &Path) -> Result<RunReport, FrontendError> {
    scenario.validate()?;
    let region = scenario.region(base_dir)?;
    let opts = scenario.options();
    let k = scenario.stages;
    let mut report = RunReport {
        scenario: scenario.clone(),
        stages_completed: 0,
        stages: Vec::new(),
        eps_history: Vec::new(),
        degrees: Vec::new(),
        summary: None,
        trace: None,
        stay_away: None,
        error: None,
        error_kind: None,
        normalization: None,
        sequence: Vec::new(),
        artifacts: Vec::new(),
        all_passed: false,
        timestamp: 0,
        hash: String::new(),
    };
    match scenario.mode {
        Mode::Escaping => {
            let (_, out) = escaping::run_escaping_outcome(&region, k, &opts);
            report.stages = out.stages;
            report.eps_history = out.eps_history;
            report.summary = out.summary;
            report.stay_away = out.stay_away;
            report.error = out.error;
            report.error_kind = out.error_kind;
            report.normalization = out.map;
            report.sequence = out.xs;
        }
        Mode::Oscillating => {
            let (_, out) = oscillating::run_oscillating_outcome(&region, k, &opts);
            report.stages = out.stages;
            report.eps_history = out.eps_history;
            report.summary = out.summary;
            report.trace = Some(out.trace);
            report.error = out.error;
            report.error_kind = out.error_kind;
            report.normalization = out.map;
            report.sequence = out.xs;
        }
    }
    report.stages_completed = report.stages.len();
    report.degrees = report.stages.iter().map(|s| s.degree).collect();
    report.all_passed = report.error.is_none()
        && report.stages_completed == k
        && report.stages.iter().all(|s| s.certificate.passed())
        && report.summary.as_ref().is_some_and(Certificate::passed);
    Ok(report)
}

/// Runs the scenario and writes `f_k.poly` for every certified stage and
/// `report.json` into `out_dir`.
pub fn construct(scenario: &Scenario, base_dir: &Path, out_dir: &Path) -> Result<RunReport, FrontendError> {
    let mut report = run_scenario(scenario, base_dir)?;
    std::fs::create_dir_all(out_dir)?;
    for s in &report.stages {
        let name = format!("f_{}.poly", s.stage);
        s.poly.write_poly(&out_dir.join(&name))?;
        report.artifacts.push(name);
    }
    report.artifacts.push("report.json".into());
    report.timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    report.hash = report.compute_hash();
    let json = serde_json::to_string_pretty(&report).expect("reports always serialize");
    std::fs::write(out_dir.join("report.json"), json)?;
    Ok(report)
}

/// Which construction a polynomial belongs to, judged by its attracting
/// fixed point (0 for escaping, 1 for oscillating, multiplier ½ in both).
pub fn detect_mode(f: &Polynomial) -> Option<Mode> {
    let fits = |p: C64| {
        let (v, d) = f.horner2(p);
        (v - p).norm() < 1e-6 && (d - C64::new(0.5, 0.0)).norm() < 1e-6
    };
    if fits(C64::new(0.0, 0.0)) {
        Some(Mode::Escaping)
    } else if fits(C64::new(1.0, 0.0)) {
        Some(Mode::Oscillating)
    } else {
        None
    }
}

/// Recomputes every check for a stored `f_K` against the scenario.  When
/// `prev` holds `f_{K-1}` the Cauchy bound is checked as well.
pub fn verify(
    f: &Polynomial,
    scenario: &Scenario,
    base_dir: &Path,
    prev: Option<&Polynomial>,
) -> Result<Certificate, FrontendError> {
    scenario.validate()?;
    let found = detect_mode(f);
    let other = match scenario.mode {
        Mode::Escaping => Mode::Oscillating,
        Mode::Oscillating => Mode::Escaping,
    };
    if found == Some(other) {
        return Err(FrontendError::ModeMismatch { expected: scenario.mode, found });
    }
    let region = scenario.region(base_dir)?;
    let opts = scenario.options();
    let k = scenario.stages;
    let cert = match scenario.mode {
        Mode::Escaping => escaping::reverify(f, &region, k, &opts, prev)?,
        Mode::Oscillating => oscillating::reverify(f, &region, k, &opts, prev)?,
    };
    Ok(cert)
}

/// Axis-aligned window of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Viewport {
    pub fn for_mode(mode: Mode, k: usize) -> Viewport {
        let k = k as f64;
        match mode {
            Mode::Escaping => Viewport { re_min: -2.0, re_max: 4.0 * k + 6.0, im_min: -4.0, im_max: 4.0 },
            Mode::Oscillating => Viewport { re_min: -1.0, re_max: 4.0 * k + 2.0, im_min: -2.0, im_max: 2.0 },
        }
    }

    /// Pixel grid with the given pixel side.
    pub fn raster(&self, pixel: f64, background: [u8; 3]) -> Raster {
        let width = ((self.re_max - self.re_min) / pixel).round().max(1.0) as usize;
        let height = ((self.im_max - self.im_min) / pixel).round().max(1.0) as usize;
        Raster { width, height, pixels: vec![background; width * height], viewport: *self }
    }
}

/// RGB image with row 0 at the top, tied to a viewport.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
    pub viewport: Viewport,
}

pub const WHITE: [u8; 3] = [255, 255, 255];
pub const CURVE: [u8; 3] = [0, 0, 0];
pub const FIXED_POINT: [u8; 3] = [220, 30, 30];
pub const SEQUENCE_POINT: [u8; 3] = [30, 90, 220];
pub const BASIN: [u8; 3] = [70, 130, 180];
pub const ESCAPES: [u8; 3] = [245, 245, 235];
pub const UNDECIDED: [u8; 3] = [240, 170, 20];

/// One 8-connected set of pixels of a given color.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
    /// Bounding box in plane coordinates, pixel centers included.
    pub bbox_min: C64,
    pub bbox_max: C64,
    /// Whether the component separates some pixel from the outside of its
    /// bounding box, i.e. it contains a closed curve.
    pub closed: bool,
}

impl Component {
    pub fn bbox_center(&self) -> C64 {
        0.5 * (self.bbox_min + self.bbox_max)
    }
}

impl Raster {
    fn cell(&self) -> (f64, f64) {
        let v = &self.viewport;
        ((v.re_max - v.re_min) / self.width as f64, (v.im_max - v.im_min) / self.height as f64)
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> C64 {
        let (dx, dy) = self.cell();
        C64::new(self.viewport.re_min + (col as f64 + 0.5) * dx, self.viewport.im_max - (row as f64 + 0.5) * dy)
    }

    pub fn locate(&self, z: C64) -> Option<(usize, usize)> {
        let (dx, dy) = self.cell();
        let x = (z.re - self.viewport.re_min) / dx;
        let y = (self.viewport.im_max - z.im) / dy;
        if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
            return None;
        }
        Some((x as usize, y as usize))
    }

    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    fn set(&mut self, col: i64, row: i64, color: [u8; 3]) {
        if col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height {
            self.pixels[row as usize * self.width + col as usize] = color;
        }
    }

    /// Draws the segment from `a` to `b` as an 8-connected pixel path.
    pub fn line(&mut self, a: C64, b: C64, color: [u8; 3]) {
        let (dx, dy) = self.cell();
        let to_px = |z: C64| ((z.re - self.viewport.re_min) / dx, (self.viewport.im_max - z.im) / dy);
        let (x0, y0) = to_px(a);
        let (x1, y1) = to_px(b);
        // Half-pixel steps so rounding never skips a pixel.
        let steps = (2.0 * (x1 - x0).abs().max((y1 - y0).abs())).ceil().max(1.0);
        if steps > 1e5 {
            return;
        }
        let n = steps as usize;
        for s in 0..=n {
            let t = s as f64 / steps;
            let x = x0 + t * (x1 - x0);
            let y = y0 + t * (y1 - y0);
            self.set(x.floor() as i64, y.floor() as i64, color);
        }
    }

    /// Filled square of half-width `r` pixels around `z`.
    pub fn mark(&mut self, z: C64, r: i64, color: [u8; 3]) {
        if let Some((c, w)) = self.locate(z) {
            for dr in -r..=r {
                for dc in -r..=r {
                    self.set(c as i64 + dc, w as i64 + dr, color);
                }
            }
        }
    }

    /// Binary PPM (P6) bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        use image::ImageEncoder;
        let mut out = Vec::new();
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::codecs::pnm::PnmEncoder::new(&mut out)
            .with_subtype(image::codecs::pnm::PnmSubtype::Pixmap(image::codecs::pnm::SampleEncoding::Binary))
            .write_image(&flat, self.width as u32, self.height as u32, image::ExtendedColorType::Rgb8)
            .expect("encoding into memory");
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), FrontendError> {
        std::fs::write(path, self.to_ppm())?;
        Ok(())
    }

    /// 8-connected components of pixels with exactly `color`, in row-major
    /// order of their first pixel.
    pub fn components(&self, color: [u8; 3]) -> Vec<Component> {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        for start in 0..w * h {
            if seen[start] || self.pixels[start] != color {
                continue;
            }
            let mut pixels = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (c, r) = (i % w, i / w);
                pixels.push((c, r));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                        if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                            continue;
                        }
                        let j = nr as usize * w + nc as usize;
                        if !seen[j] && self.pixels[j] == color {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            out.push(self.describe(pixels));
        }
        out
    }

    fn describe(&self, pixels: Vec<(usize, usize)>) -> Component {
        let c0 = pixels.iter().map(|p| p.0).min().unwrap_or(0);
        let c1 = pixels.iter().map(|p| p.0).max().unwrap_or(0);
        let r0 = pixels.iter().map(|p| p.1).min().unwrap_or(0);
        let r1 = pixels.iter().map(|p| p.1).max().unwrap_or(0);
        // Flood the complement inside the box padded by one pixel, starting
        // from the padding; anything left over is enclosed.
        let bw = c1 - c0 + 3;
        let bh = r1 - r0 + 3;
        let mut wall = vec![false; bw * bh];
        for &(c, r) in &pixels {
            wall[(r - r0 + 1) * bw + (c - c0 + 1)] = true;
        }
        let mut outside = vec![false; bw * bh];
        let mut stack = vec![0usize];
        outside[0] = true;
        while let Some(i) = stack.pop() {
            let (c, r) = (i % bw, i / bw);
            // 4-connected flooding pairs with 8-connected curves.
            let nbrs = [(c.wrapping_sub(1), r), (c + 1, r), (c, r.wrapping_sub(1)), (c, r + 1)];
            for (nc, nr) in nbrs {
                if nc < bw && nr < bh {
                    let j = nr * bw + nc;
                    if !outside[j] && !wall[j] {
                        outside[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let closed = (0..bw * bh).any(|i| !outside[i] && !wall[i]);
        let a = self.pixel_center(c0, r1);
        let b = self.pixel_center(c1, r0);
        Component { pixels, bbox_min: a, bbox_max: b, closed }
    }
}

/// Inputs of a figure: the boundary of Ω and the marked points, all in
/// normalized coordinates.
#[derive(Debug, Clone)]
pub struct FigureInput {
    pub boundary: Vec<C64>,
    pub sequence: Vec<C64>,
    pub fixed_point: C64,
    /// Number of iterates drawn after `∂Ω` itself.
    pub iterates: usize,
    pub viewport: Viewport,
    pub pixel: f64,
}

impl FigureInput {
    /// Geometry of the scenario: `m = K` images for escaping runs and
    /// `m = N_K + K` for oscillating ones.
    pub fn for_scenario(scenario: &Scenario, base_dir: &Path) -> Result<FigureInput, FrontendError> {
        let region = scenario.region(base_dir)?;
        let mut opts = scenario.options();
        let k = scenario.stages;
        opts.sequence_length = opts.sequence_length.max(k + 1);
        let setup = prepare(&region, scenario.mode, &opts).map_err(FrontendError::Construction)?;
        let (iterates, fixed_point, pixel) = match scenario.mode {
            Mode::Escaping => (k, C64::new(0.0, 0.0), 0.01),
            Mode::Oscillating => (schedule(k) + k, C64::new(1.0, 0.0), 0.005),
        };
        Ok(FigureInput {
            boundary: setup.omega.samples(4096),
            sequence: setup.xs[..k].to_vec(),
            fixed_point,
            iterates,
            viewport: Viewport::for_mode(scenario.mode, k),
            pixel,
        })
    }
}

/// Draws `∂Ω` and `f^n(∂Ω)` for `n = 1 … m`, with the fixed point and the
/// points `x_n` marked.  Segments between consecutive image samples longer
/// than a quarter of the viewport height are left out.
pub fn render_figure(f: &Polynomial, input: &FigureInput) -> Raster {
    let mut img = input.viewport.raster(input.pixel, WHITE);
    img.mark(input.fixed_point, 3, FIXED_POINT);
    for &x in &input.sequence {
        img.mark(x, 2, SEQUENCE_POINT);
    }
    let jump = 0.25 * (input.viewport.im_max - input.viewport.im_min);
    let mut curve = input.boundary.clone();
    for n in 0..=input.iterates {
        if n > 0 {
            curve = curve.par_iter().map(|&z| iterate(f, z, 1).unwrap_or(C64::new(f64::NAN, f64::NAN))).collect();
        }
        let m = curve.len();
        for i in 0..m {
            let (a, b) = (curve[i], curve[(i + 1) % m]);
            if a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite() && (a - b).norm() <= jump {
                img.line(a, b, CURVE);
            }
        }
    }
    img
}

/// Fate of one orbit under basin classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Converges,
    Escapes,
    Undecided,
}

pub const BASIN_RADIUS: f64 = 0.01;
pub const ESCAPE_RADIUS: f64 = 1e4;
pub const BASIN_ITERATIONS: usize = 200;

pub fn classify(f: &Polynomial, z: C64, p0: C64) -> Fate {
    let mut w = z;
    for _ in 0..=BASIN_ITERATIONS {
        if (w - p0).norm() < BASIN_RADIUS {
            return Fate::Converges;
        }
        if !(w.norm() <= ESCAPE_RADIUS) {
            return Fate::Escapes;
        }
        w = f.horner(w);
    }
    Fate::Undecided
}

/// Colors each pixel by the fate of its center.
pub fn render_basin(f: &Polynomial, p0: C64, viewport: &Viewport, pixel: f64) -> Raster {
    let mut img = viewport.raster(pixel, WHITE);
    let w = img.width;
    let centers: Vec<C64> = (0..img.width * img.height).map(|i| img.pixel_center(i % w, i / w)).collect();
    img.pixels = centers
        .par_iter()
        .map(|&z| match classify(f, z, p0) {
            Fate::Converges => BASIN,
            Fate::Escapes => ESCAPES,
            Fate::Undecided => UNDECIDED,
        })
        .collect();
    img
}

/// Attracting fixed point of the mode.
pub fn fixed_point(mode: Mode) -> C64 {
    match mode {
        Mode::Escaping => C64::new(0.0, 0.0),
        Mode::Oscillating => C64::new(1.0, 0.0),
    }
}

/// Worker count requested through `WANDER_THREADS`, if any.
pub fn requested_threads() -> Option<usize> {
    std::env::var("WANDER_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `job` on a pool capped by `WANDER_THREADS` (default: all cores).
pub fn with_thread_pool<R: Send>(job: impl FnOnce() -> R + Send) -> R {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested_threads() {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_scenario() -> &'static str {
        r#"{"mode":"escaping","region":{"type":"disk","center":[0,0],"radius":1},"K":1,"h":0.02,"N":3}"#
    }

    #[test]
    fn parses_and_validates() {
        let s = Scenario::from_json(disk_scenario()).unwrap();
        assert_eq!(s.stages, 1);
        assert_eq!(s.seed, 0);
        let bad = disk_scenario().replace("\"K\":1", "\"K\":0");
        assert!(matches!(Scenario::from_json(&bad), Err(FrontendError::Config(_))));
        let short = disk_scenario().replace("\"N\":3", "\"N\":2");
        assert!(Scenario::from_json(&short).is_err());
        let unknown = disk_scenario().replace("\"h\"", "\"hh\":1,\"h\"");
        assert!(Scenario::from_json(&unknown).is_err());
    }

    #[test]
    fn tolerance_overrides_are_partial() {
        let s = Scenario::from_json(&disk_scenario().replace("\"N\":3", "\"N\":3,\"tolerances\":{\"preimage\":1e-6}"))
            .unwrap();
        let t = s.options().tolerances;
        assert_eq!(t.preimage, 1e-6);
        assert_eq!(t.containment_samples, Tolerances::default().containment_samples);
    }

    #[test]
    fn seed_zero_has_no_offset() {
        assert_eq!(seed_phase(0), 0.0);
        let p = seed_phase(7);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn hash_ignores_timestamp() {
        let s = Scenario::from_json(disk_scenario()).unwrap();
        let mut r = RunReport {
            scenario: s,
            stages_completed: 0,
            stages: vec![],
            eps_history: vec![0.25],
            degrees: vec![],
            summary: None,
            trace: None,
            stay_away: None,
            error: None,
            error_kind: None,
            normalization: None,
            sequence: vec![],
            artifacts: vec![],
            all_passed: false,
            timestamp: 1,
            hash: String::new(),
        };
        let h1 = r.compute_hash();
        r.timestamp = 99;
        assert_eq!(h1, r.compute_hash());
        r.eps_history[0] = 0.125;
        assert_ne!(h1, r.compute_hash());
        assert_eq!(h1.len(), 64);
    }

    #[test]
    fn circle_is_one_closed_component() {
        let v = Viewport { re_min: -2.0, re_max: 2.0, im_min: -2.0, im_max: 2.0 };
        let mut img = v.raster(0.02, WHITE);
        let pts = crate::geometry::circle(C64::new(0.5, 0.0), 1.0, 400);
        for i in 0..pts.len() {
            img.line(pts[i], pts[(i + 1) % pts.len()], CURVE);
        }
        img.line(C64::new(-1.8, -1.8), C64::new(-1.0, -1.8), CURVE);
        let comps = img.components(CURVE);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().any(|c| c.closed && (c.bbox_center() - C64::new(0.5, 0.0)).norm() < 0.03));
        assert!(comps.iter().any(|c| !c.closed));
    }

    #[test]
    fn basin_of_half_map_is_everything() {
        let f = Polynomial::linear(C64::new(0.5, 0.0), C64::new(0.0, 0.0));
        let v = Viewport { re_min: -2.0, re_max: 2.0, im_min: -1.0, im_max: 1.0 };
        let img = render_basin(&f, C64::new(0.0, 0.0), &v, 0.05);
        assert!(img.pixels.iter().all(|&p| p == BASIN));
    }

    #[test]
    fn ppm_header_and_size() {
        let v = Viewport { re_min: 0.0, re_max: 3.0, im_min: 0.0, im_max: 2.0 };
        let img = v.raster(1.0, [1, 2, 3]);
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6"));
        let body = img.width * img.height * 3;
        assert_eq!((img.width, img.height), (3, 2));
        assert!(bytes[bytes.len() - body..].chunks(3).all(|c| c == [1, 2, 3]));
        assert!(std::str::from_utf8(&bytes[..bytes.len() - body]).unwrap().contains("3 2"));
    }

    #[test]
    fn pbm_black_is_inside() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pbm");
        std::fs::write(&path, "P1\n4 3\n0 0 0 0\n0 1 1 0\n0 0 0 0\n").unwrap();
        let m = read_pbm(&path).unwrap();
        assert_eq!((m.width, m.height), (4, 3));
        let inside: Vec<usize> = (0..12).filter(|&i| m.bits[i]).collect();
        assert_eq!(inside, vec![5, 6]);
        let raw = dir.path().join("r.pbm");
        std::fs::write(&raw, [b"P4\n8 2\n".as_slice(), &[0b1000_0001, 0]].concat()).unwrap();
        let r = read_pbm(&raw).unwrap();
        assert_eq!((0..16).filter(|&i| r.bits[i]).collect::<Vec<_>>(), vec![0, 7]);
    }

    #[test]
    fn detects_fixed_point_signature() {
        let esc = Polynomial::linear(C64::new(0.5, 0.0), C64::new(0.0, 0.0));
        let osc = Polynomial::linear(C64::new(0.5, 0.0), C64::new(0.5, 0.0));
        assert_eq!(detect_mode(&esc), Some(Mode::Escaping));
        assert_eq!(detect_mode(&osc), Some(Mode::Oscillating));
        assert_eq!(detect_mode(&Polynomial::identity()), None);
    }
}
