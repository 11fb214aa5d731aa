//! Planar set machinery.
//!
//! Regions are rasterized onto axis-aligned grids.  A [`CompactSet`] keeps the
//! boolean mask together with an ordered, counterclockwise boundary polyline
//! that the fitting and verification code samples from.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the plane.  Plain `Complex64`, finite by convention.
pub type ComplexPoint = C64;

/// Fewest cells allowed across the diameter of a rasterized region.
pub const MIN_CELLS_ACROSS: f64 = 32.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("no room for sequence point x_{n} between consecutive neighbourhoods")]
    NoRoom { n: usize },
    #[error("cover collides with an avoided set after {attempts} attempts")]
    Collision { attempts: usize },
}

/// `z -> alpha * z + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub alpha: C64,
    pub beta: C64,
}

impl AffineMap {
    pub fn new(alpha: C64, beta: C64) -> Self {
        assert!(alpha.norm() > 0.0, "affine map needs a nonzero slope");
        AffineMap { alpha, beta }
    }

    pub fn identity() -> Self {
        AffineMap::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn translation(beta: C64) -> Self {
        AffineMap::new(C64::new(1.0, 0.0), beta)
    }

    pub fn apply(&self, z: C64) -> C64 {
        self.alpha * z + self.beta
    }

    pub fn inverse(&self) -> AffineMap {
        let a = C64::new(1.0, 0.0) / self.alpha;
        AffineMap::new(a, -self.beta * a)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap::new(self.alpha * other.alpha, self.alpha * other.beta + self.beta)
    }
}

/// A black-and-white raster placed in the plane.  Row 0 is the top row, as in
/// image files.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    /// Lower-left corner of the raster.
    pub origin: C64,
    /// Pixel side length; may be complex to encode rotation.
    pub cell: C64,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height);
        let cell = 1.0 / width.max(1) as f64;
        PixelMask { width, height, bits, origin: C64::new(0.0, 0.0), cell: C64::new(cell, 0.0) }
    }

    fn pixel_center(&self, col: usize, row: usize) -> C64 {
        let x = col as f64 + 0.5;
        let y = (self.height - 1 - row) as f64 + 0.5;
        self.origin + self.cell * C64::new(x, y)
    }

    fn contains(&self, z: C64) -> bool {
        let local = (z - self.origin) / self.cell;
        if local.re < 0.0 || local.im < 0.0 {
            return false;
        }
        let col = local.re.floor() as usize;
        let up = local.im.floor() as usize;
        if col >= self.width || up >= self.height {
            return false;
        }
        let row = self.height - 1 - up;
        self.bits[row * self.width + col]
    }

    fn corners(&self) -> [C64; 4] {
        let w = self.width as f64;
        let h = self.height as f64;
        [
            self.origin,
            self.origin + self.cell * C64::new(w, 0.0),
            self.origin + self.cell * C64::new(w, h),
            self.origin + self.cell * C64::new(0.0, h),
        ]
    }
}

/// Input regions: the domain Ω to be turned into a wandering domain.
#[derive(Debug, Clone, PartialEq)]
pub enum JordanRegion {
    Disk { center: C64, radius: f64 },
    Polygon { vertices: Vec<C64> },
    Mask(PixelMask),
}

impl JordanRegion {
    pub fn contains(&self, z: C64) -> bool {
        match self {
            JordanRegion::Disk { center, radius } => (z - center).norm() <= *radius,
            JordanRegion::Polygon { vertices } => polygon_contains(vertices, z),
            JordanRegion::Mask(m) => m.contains(z),
        }
    }

    pub fn bbox(&self) -> (C64, C64) {
        match self {
            JordanRegion::Disk { center, radius } => {
                (center - C64::new(*radius, *radius), center + C64::new(*radius, *radius))
            }
            JordanRegion::Polygon { vertices } => bbox_of(vertices),
            JordanRegion::Mask(m) => bbox_of(&m.corners()),
        }
    }

    pub fn transform(&self, t: &AffineMap) -> JordanRegion {
        match self {
            JordanRegion::Disk { center, radius } => JordanRegion::Disk {
                center: t.apply(*center),
                radius: radius * t.alpha.norm(),
            },
            JordanRegion::Polygon { vertices } => JordanRegion::Polygon {
                vertices: vertices.iter().map(|&v| t.apply(v)).collect(),
            },
            JordanRegion::Mask(m) => JordanRegion::Mask(PixelMask {
                origin: t.apply(m.origin),
                cell: m.cell * t.alpha,
                ..m.clone()
            }),
        }
    }

    /// Area centroid.
    pub fn centroid(&self) -> Option<C64> {
        match self {
            JordanRegion::Disk { center, radius } => (*radius > 0.0).then_some(*center),
            JordanRegion::Polygon { vertices } => polygon_centroid(vertices),
            JordanRegion::Mask(m) => {
                let mut sum = C64::new(0.0, 0.0);
                let mut count = 0usize;
                for row in 0..m.height {
                    for col in 0..m.width {
                        if m.bits[row * m.width + col] {
                            sum += m.pixel_center(col, row);
                            count += 1;
                        }
                    }
                }
                (count > 0).then(|| sum / count as f64)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }
}

/// Axis-aligned grid; `origin` is the center of cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub origin: C64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Grid covering `[lo, hi]` with `pad` extra cells on every side.
    pub fn covering(lo: C64, hi: C64, h: f64, pad: usize) -> Grid {
        let nx = ((hi.re - lo.re) / h).ceil() as usize + 1 + 2 * pad;
        let ny = ((hi.im - lo.im) / h).ceil() as usize + 1 + 2 * pad;
        let origin = lo - C64::new(pad as f64 * h, pad as f64 * h);
        Grid { origin, h, nx, ny }
    }

    pub fn center(&self, i: usize, j: usize) -> C64 {
        self.origin + C64::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn locate(&self, z: C64) -> Option<(usize, usize)> {
        let fx = ((z.re - self.origin.re) / self.h).round();
        let fy = ((z.im - self.origin.im) / self.h).round();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    fn corner(&self, a: usize, b: usize) -> C64 {
        self.origin + C64::new((a as f64 - 0.5) * self.h, (b as f64 - 0.5) * self.h)
    }

    /// Evaluates `pred` at every cell center, rows in parallel.
    fn mask_from<F: Fn(C64) -> bool + Sync>(&self, pred: F) -> Vec<bool> {
        let mut mask = vec![false; self.nx * self.ny];
        mask.par_chunks_mut(self.nx).enumerate().for_each(|(j, row)| {
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = pred(self.center(i, j));
            }
        });
        mask
    }
}

/// A filled compact set on a grid, with its ordered boundary.
#[derive(Debug, Clone)]
pub struct CompactSet {
    grid: Grid,
    mask: Vec<bool>,
    boundary: Vec<C64>,
}

impl CompactSet {
    /// Wraps a mask, filling holes and tracing the boundary.
    pub fn from_mask(grid: Grid, mut mask: Vec<bool>) -> Result<CompactSet, GeometryError> {
        if !mask.iter().any(|&b| b) {
            return Err(GeometryError::DegenerateRegion("empty mask".into()));
        }
        fill_holes(&grid, &mut mask);
        if !is_connected(&grid, &mask) {
            return Err(GeometryError::DegenerateRegion("mask is disconnected".into()));
        }
        let boundary = trace_boundary(&grid, &mask);
        Ok(CompactSet { grid, mask, boundary })
    }

    /// A rasterized closed disk with an exact circular boundary.
    pub fn disk(center: C64, radius: f64, h: f64) -> Result<CompactSet, GeometryError> {
        rasterize(&JordanRegion::Disk { center, radius }, h)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Counterclockwise boundary polyline (closed, first vertex not repeated).
    pub fn boundary(&self) -> &[C64] {
        &self.boundary
    }

    pub fn contains(&self, z: C64) -> bool {
        match self.grid.locate(z) {
            Some((i, j)) => self.mask[j * self.grid.nx + i],
            None => false,
        }
    }

    /// True when `z` and its eight grid neighbours all belong to the set.
    pub fn contains_interior(&self, z: C64) -> bool {
        let h = self.grid.h;
        (-1..=1).all(|dj| {
            (-1..=1).all(|di| self.contains(z + C64::new(di as f64 * h, dj as f64 * h)))
        })
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn area(&self) -> f64 {
        self.cell_count() as f64 * self.grid.h * self.grid.h
    }

    pub fn cells(&self) -> impl Iterator<Item = C64> + '_ {
        let g = self.grid;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| g.center(k % g.nx, k / g.nx))
    }

    pub fn perimeter(&self) -> f64 {
        polyline_length(&self.boundary)
    }

    /// `n` boundary points equally spaced in arclength, counterclockwise.
    pub fn samples(&self, n: usize) -> Vec<C64> {
        resample_closed(&self.boundary, n, 0.0)
    }

    /// As [`samples`](Self::samples), shifted by `phase` (a fraction of the spacing).
    pub fn samples_with_phase(&self, n: usize, phase: f64) -> Vec<C64> {
        resample_closed(&self.boundary, n, phase)
    }

    /// Distance from `z` to the boundary polyline.
    pub fn boundary_distance(&self, z: C64) -> f64 {
        polyline_distance(&self.boundary, z)
    }

    /// Distance from `z` to the set (zero inside).
    pub fn distance(&self, z: C64) -> f64 {
        if self.contains(z) {
            0.0
        } else {
            self.boundary_distance(z)
        }
    }

    pub fn centroid(&self) -> C64 {
        let (sum, n) = self.cells().fold((C64::new(0.0, 0.0), 0usize), |(s, n), c| (s + c, n + 1));
        sum / n as f64
    }

    /// An interior point far from the boundary.
    pub fn witness(&self) -> C64 {
        let c = self.centroid();
        let best_from = |cands: &mut dyn Iterator<Item = C64>| {
            cands
                .map(|z| (self.boundary_distance(z), z))
                .fold((f64::NEG_INFINITY, c), |a, b| if b.0 > a.0 { b } else { a })
        };
        let count = self.cell_count();
        let stride = (count / 2048).max(1);
        let (d, z) = best_from(&mut self.cells().step_by(stride));
        if self.contains(c) && self.boundary_distance(c) >= 0.5 * d {
            c
        } else {
            z
        }
    }

    pub fn bbox(&self) -> (C64, C64) {
        bbox_of(&self.boundary)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Largest distance from `c` to a boundary vertex.
    pub fn radius_about(&self, c: C64) -> f64 {
        self.boundary.iter().map(|b| (b - c).norm()).fold(0.0, f64::max)
    }

    /// Does any cell or boundary point of one set come within `gap` of the other?
    pub fn near(&self, other: &CompactSet, gap: f64) -> bool {
        let (alo, ahi) = self.bbox();
        let (blo, bhi) = other.bbox();
        if alo.re > bhi.re + gap
            || blo.re > ahi.re + gap
            || alo.im > bhi.im + gap
            || blo.im > ahi.im + gap
        {
            return false;
        }
        self.boundary.par_iter().any(|&z| other.distance(z) <= gap)
            || other.boundary.par_iter().any(|&z| self.distance(z) <= gap)
    }
}

/// Rasterizes a region at cell size `h`.
pub fn rasterize(region: &JordanRegion, h: f64) -> Result<CompactSet, GeometryError> {
    if !(h > 0.0) {
        return Err(GeometryError::ResolutionTooCoarse(format!("cell size {h} is not positive")));
    }
    if let JordanRegion::Polygon { vertices } = region {
        if vertices.len() < 3 || polygon_area(vertices).abs() < 1e-300 || !polygon_is_simple(vertices) {
            return Err(GeometryError::DegenerateRegion("polygon is not simple".into()));
        }
    }
    let diam = region.diameter();
    if diam / h < MIN_CELLS_ACROSS {
        return Err(GeometryError::ResolutionTooCoarse(format!(
            "only {:.1} cells across a region of diameter {diam}",
            diam / h
        )));
    }
    let (lo, hi) = region.bbox();
    let grid = Grid::covering(lo, hi, h, 3);
    let mask = grid.mask_from(|z| region.contains(z));
    let mut set = CompactSet::from_mask(grid, mask)?;
    match region {
        JordanRegion::Disk { center, radius } => {
            let n = ((std::f64::consts::TAU * radius / (0.5 * h)).ceil() as usize).max(256);
            set.boundary = circle(*center, *radius, n);
        }
        JordanRegion::Polygon { vertices } => {
            let mut v = vertices.clone();
            if polygon_area(&v) < 0.0 {
                v.reverse();
            }
            set.boundary = v;
        }
        JordanRegion::Mask(_) => {}
    }
    Ok(set)
}

/// Radii of the neighbourhood tower `U_0 ⊃ U_1 ⊃ …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TowerSchedule {
    /// `r_0` for `U_0`, then `scale / n`.
    Harmonic { r0: f64, scale: f64 },
    /// `r0 * ratio^n`.
    Geometric { r0: f64, ratio: f64 },
}

impl TowerSchedule {
    pub fn radius(&self, n: usize) -> f64 {
        match *self {
            TowerSchedule::Harmonic { r0, scale } => {
                if n == 0 {
                    r0
                } else {
                    scale / n as f64
                }
            }
            TowerSchedule::Geometric { r0, ratio } => r0 * ratio.powi(n as i32),
        }
    }

    /// Grid cell used for `U_n`: fine enough for its own radius, never finer than `h`.
    pub fn cell(&self, n: usize, h: f64) -> f64 {
        h.max(self.radius(n) / 96.0)
    }
}

/// The closed `r`-neighbourhood of `omega` with bounded complementary
/// components filled, on a grid of cell `cell`.
pub fn dilate(omega: &CompactSet, r: f64, cell: f64) -> Result<CompactSet, GeometryError> {
    let (lo, hi) = omega.bbox();
    let grid = Grid::covering(lo - C64::new(r, r), hi + C64::new(r, r), cell, 3);
    let mask = grid.mask_from(|z| omega.distance(z) <= r);
    CompactSet::from_mask(grid, mask)
}

/// `U_n` of the tower.
pub fn neighborhood(
    omega: &CompactSet,
    n: usize,
    schedule: &TowerSchedule,
    h: f64,
) -> Result<CompactSet, GeometryError> {
    let r = schedule.radius(n);
    let cell = schedule.cell(n, h);
    if n > 0 && schedule.radius(n - 1) - r < 2.0 * schedule.cell(n - 1, h).max(cell) {
        return Err(GeometryError::ResolutionTooCoarse(format!(
            "radii {} and {r} of U_{} and U_{n} are closer than two cells",
            schedule.radius(n - 1),
            n - 1
        )));
    }
    dilate(omega, r, cell)
}

/// Every cell of `inner`, together with its eight neighbours, lies in `outer`.
pub fn strictly_nested(inner: &CompactSet, outer: &CompactSet) -> bool {
    let h = inner.h();
    let cells: Vec<C64> = inner.cells().collect();
    cells.par_iter().all(|&c| {
        (-1..=1).all(|dj| {
            (-1..=1).all(|di| outer.contains(c + C64::new(di as f64 * h, dj as f64 * h)))
        })
    })
}

/// Builds `U_0, …, U_count` and certifies strict nesting.
pub fn tower(
    omega: &CompactSet,
    schedule: &TowerSchedule,
    count: usize,
    h: f64,
) -> Result<Vec<CompactSet>, GeometryError> {
    let sets = (0..=count)
        .map(|n| neighborhood(omega, n, schedule, h))
        .collect::<Result<Vec<_>, _>>()?;
    for n in 1..sets.len() {
        if !strictly_nested(&sets[n], &sets[n - 1]) {
            return Err(GeometryError::ResolutionTooCoarse(format!(
                "U_{n} is not inside the interior of U_{}",
                n - 1
            )));
        }
    }
    if let Some(u0) = sets.first() {
        if !omega.boundary().iter().all(|&z| u0.contains(z)) {
            return Err(GeometryError::ResolutionTooCoarse("U_0 does not contain Ω".into()));
        }
    }
    Ok(sets)
}

/// Base-2 radical inverse (bit reversal) of `n`.
pub fn van_der_corput(mut n: usize) -> f64 {
    let mut x = 0.0;
    let mut f = 0.5;
    while n > 0 {
        if n & 1 == 1 {
            x += f;
        }
        n >>= 1;
        f *= 0.5;
    }
    x
}

/// Points `x_1 … x_N` with `x_n ∈ int(U_{n-1}) \ U_n`.
///
/// Arclength is measured from the rightmost boundary point, so `x_1` faces
/// the positive real direction.  The `n`-th point starts from the boundary
/// point at arclength fraction `van_der_corput(n - 1)` and is pushed along the
/// outward normal to a position `frac` of the way between `∂U_n` and
/// `∂U_{n-1}`.
pub fn boundary_sequence(
    omega: &CompactSet,
    towers: &[CompactSet],
    count: usize,
    frac: f64,
) -> Result<Vec<C64>, GeometryError> {
    assert!(towers.len() > count, "need U_0..U_N to place N points");
    let boundary = omega.boundary();
    let start = (0..boundary.len()).fold(0, |best, i| if boundary[i].re > boundary[best].re { i } else { best });
    let poly: Vec<C64> = boundary[start..].iter().chain(&boundary[..start]).copied().collect();
    let poly = poly.as_slice();
    let total = polyline_length(poly);
    let mut out = Vec::with_capacity(count);
    for n in 1..=count {
        let s = van_der_corput(n - 1) * total;
        let b = point_at_arclength(poly, s);
        let ds = 1e-3 * total;
        let tangent = point_at_arclength(poly, s + ds) - point_at_arclength(poly, s - ds);
        if tangent.norm() == 0.0 {
            return Err(GeometryError::NoRoom { n });
        }
        let normal = tangent.unscale(tangent.norm()) * C64::new(0.0, -1.0);
        let inner = &towers[n];
        let outer = &towers[n - 1];
        let step = 0.25 * inner.h();
        let t_in = exit_time(|t| inner.contains(b + normal * t), step);
        let t_out = exit_time(|t| outer.contains_interior(b + normal * t), 0.25 * outer.h());
        let candidates = [frac, 0.5, 0.25, 0.75];
        let found = candidates.iter().map(|f| b + normal * (t_in + f * (t_out - t_in))).find(|&x| {
            t_out > t_in && !inner.contains(x) && outer.contains_interior(x) && omega.distance(x) > 0.0
        });
        match found {
            Some(x) => out.push(x),
            None => return Err(GeometryError::NoRoom { n }),
        }
    }
    Ok(out)
}

/// First `t ≥ 0` at which `inside(t)` turns false, refined by bisection.
fn exit_time<F: Fn(f64) -> bool>(inside: F, step: f64) -> f64 {
    let mut t = 0.0;
    let mut guard = 0usize;
    while inside(t) && guard < 10_000_000 {
        t += step;
        guard += 1;
    }
    let (mut a, mut b) = ((t - step).max(0.0), t);
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if inside(m) {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Bucket index for nearest-point queries.
pub struct PointIndex<'a> {
    points: &'a [C64],
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: &'a [C64], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, p) in points.iter().enumerate() {
            buckets.entry(Self::key(*p, cell)).or_default().push(k);
        }
        PointIndex { points, cell, buckets }
    }

    fn key(p: C64, cell: f64) -> (i64, i64) {
        ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64)
    }

    /// Is any point within `r ≤ cell` of `z`?
    pub fn any_within(&self, z: C64, r: f64) -> bool {
        let (kx, ky) = Self::key(z, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if b.iter().any(|&k| (self.points[k] - z).norm() <= r) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// A filled `delta`-neighbourhood of a point cloud, kept clear of `avoid`
/// sets and points.  `delta` is halved on collision, at most 20 times, but
/// never below `h_min`.
pub fn cover_compact(
    points: &[C64],
    delta: f64,
    avoid: &[&CompactSet],
    avoid_points: &[C64],
    h_min: f64,
) -> Result<CompactSet, GeometryError> {
    assert!(!points.is_empty(), "cover of an empty point cloud");
    let mut delta = delta;
    for attempt in 0..=20 {
        if delta < h_min {
            return Err(GeometryError::Collision { attempts: attempt });
        }
        let cell = delta / 8.0;
        let (lo, hi) = bbox_of(points);
        let grid = Grid::covering(lo - C64::new(delta, delta), hi + C64::new(delta, delta), cell, 3);
        let index = PointIndex::new(points, delta);
        let mask = grid.mask_from(|z| index.any_within(z, delta));
        let set = CompactSet::from_mask(grid, mask)?;
        let clear_of_sets = avoid.iter().all(|a| !set.near(a, cell));
        let clear_of_points =
            avoid_points.iter().all(|&p| !set.contains(p) && set.boundary_distance(p) > 2.0 * cell);
        if clear_of_sets && clear_of_points {
            return Ok(set);
        }
        delta *= 0.5;
    }
    Err(GeometryError::Collision { attempts: 21 })
}

/// Which normalization disk Ω must be moved into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Escaping,
    Oscillating,
}

impl Mode {
    /// Center and radius of the normalization disk.
    pub fn target_disk(&self) -> (C64, f64) {
        match self {
            Mode::Escaping => (C64::new(3.0, 0.0), 1.0),
            Mode::Oscillating => (C64::new(2.0 / 3.0, 0.0), 1.0 / 9.0),
        }
    }
}

/// Affine map sending the centroid of `region` to the center of the mode's
/// disk and scaling its circumradius about the centroid to `omega_radius`.
pub fn normalize(region: &JordanRegion, mode: Mode, omega_radius: f64) -> Result<AffineMap, GeometryError> {
    let c = region
        .centroid()
        .ok_or_else(|| GeometryError::DegenerateRegion("region has no area".into()))?;
    let radius = match region {
        JordanRegion::Disk { radius, .. } => *radius,
        JordanRegion::Polygon { vertices } => vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max),
        JordanRegion::Mask(m) => {
            let mut r: f64 = 0.0;
            for row in 0..m.height {
                for col in 0..m.width {
                    if m.bits[row * m.width + col] {
                        let half = 0.5 * m.cell.norm() * std::f64::consts::SQRT_2;
                        r = r.max((m.pixel_center(col, row) - c).norm() + half);
                    }
                }
            }
            r
        }
    };
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::DegenerateRegion("region has zero extent".into()));
    }
    let (center, disk_r) = mode.target_disk();
    if omega_radius >= disk_r {
        return Err(GeometryError::DegenerateRegion(format!(
            "requested radius {omega_radius} does not fit in the normalization disk"
        )));
    }
    let alpha = C64::new(omega_radius / radius, 0.0);
    Ok(AffineMap::new(alpha, center - alpha * c))
}

// ---------------------------------------------------------------------------
// raster helpers

fn fill_holes(grid: &Grid, mask: &mut [bool]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut seen = vec![false; nx * ny];
    let mut queue = VecDeque::new();
    for i in 0..nx {
        for j in [0, ny - 1] {
            let k = j * nx + i;
            if !mask[k] && !seen[k] {
                seen[k] = true;
                queue.push_back(k);
            }
        }
    }
    for j in 0..ny {
        for i in [0, nx - 1] {
            let k = j * nx + i;
            if !mask[k] && !seen[k] {
                seen[k] = true;
                queue.push_back(k);
            }
        }
    }
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % nx, k / nx);
        let mut visit = |ii: usize, jj: usize| {
            let kk = jj * nx + ii;
            if !mask[kk] && !seen[kk] {
                seen[kk] = true;
                queue.push_back(kk);
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        if i + 1 < nx {
            visit(i + 1, j);
        }
        if j > 0 {
            visit(i, j - 1);
        }
        if j + 1 < ny {
            visit(i, j + 1);
        }
    }
    for k in 0..mask.len() {
        if !seen[k] {
            mask[k] = true;
        }
    }
}

/// 8-connectivity of the mask.
fn is_connected(grid: &Grid, mask: &[bool]) -> bool {
    let (nx, ny) = (grid.nx, grid.ny);
    let Some(start) = mask.iter().position(|&b| b) else { return false };
    let total = mask.iter().filter(|&&b| b).count();
    let mut seen = vec![false; nx * ny];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut reached = 1usize;
    while let Some(k) = queue.pop_front() {
        let (i, j) = ((k % nx) as i64, (k / nx) as i64);
        for dj in -1..=1i64 {
            for di in -1..=1i64 {
                let (ii, jj) = (i + di, j + dj);
                if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                    continue;
                }
                let kk = jj as usize * nx + ii as usize;
                if mask[kk] && !seen[kk] {
                    seen[kk] = true;
                    reached += 1;
                    queue.push_back(kk);
                }
            }
        }
    }
    reached == total
}

/// Outer boundary of a mask as a counterclockwise polyline through the
/// midpoints of the boundary cell edges.
fn trace_boundary(grid: &Grid, mask: &[bool]) -> Vec<C64> {
    let nx = grid.nx;
    let inside = |i: i64, j: i64| -> bool {
        i >= 0 && j >= 0 && (i as usize) < grid.nx && (j as usize) < grid.ny && mask[j as usize * nx + i as usize]
    };
    // Directed edges between lattice corners, interior on the left.
    let mut edges: Vec<((i64, i64), (i64, i64))> = Vec::new();
    for j in 0..grid.ny as i64 {
        for i in 0..grid.nx as i64 {
            if !inside(i, j) {
                continue;
            }
            if !inside(i, j - 1) {
                edges.push(((i, j), (i + 1, j)));
            }
            if !inside(i + 1, j) {
                edges.push(((i + 1, j), (i + 1, j + 1)));
            }
            if !inside(i, j + 1) {
                edges.push(((i + 1, j + 1), (i, j + 1)));
            }
            if !inside(i - 1, j) {
                edges.push(((i, j + 1), (i, j)));
            }
        }
    }
    let mut outgoing: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, e) in edges.iter().enumerate() {
        outgoing.entry(e.0).or_default().push(k);
    }
    let mut used = vec![false; edges.len()];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut lp = vec![start];
        used[start] = true;
        let mut cur = start;
        loop {
            let (a, b) = edges[cur];
            let din = (b.0 - a.0, b.1 - a.1);
            let Some(cands) = outgoing.get(&b) else { break };
            // At a saddle corner take the right turn so diagonal cells join.
            let next = cands
                .iter()
                .copied()
                .filter(|&k| !used[k] || k == start)
                .min_by_key(|&k| {
                    let (c, d) = edges[k];
                    let dout = (d.0 - c.0, d.1 - c.1);
                    let cross = din.0 * dout.1 - din.1 * dout.0;
                    let dot = din.0 * dout.0 + din.1 * dout.1;
                    // right turn < straight < left turn
                    if cross < 0 {
                        0
                    } else if cross == 0 && dot > 0 {
                        1
                    } else {
                        2
                    }
                });
            match next {
                Some(k) if k == start => break,
                Some(k) => {
                    used[k] = true;
                    lp.push(k);
                    cur = k;
                }
                None => break,
            }
        }
        if lp.len() > best.len() {
            best = lp;
        }
    }
    best.iter()
        .map(|&k| {
            let (a, b) = edges[k];
            let pa = grid.corner(a.0 as usize, a.1 as usize);
            let pb = grid.corner(b.0 as usize, b.1 as usize);
            0.5 * (pa + pb)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// smallest enclosing disk

/// Smallest closed disk containing every point, as `(center, radius)`.
///
/// Welzl's incremental algorithm.  The points are visited in a fixed
/// pseudo-random order so the result does not depend on thread count or
/// input order beyond ties.
pub fn smallest_enclosing_disk(points: &[C64]) -> (C64, f64) {
    if points.is_empty() {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let n = points.len();
    // Visit order: multiplicative stride coprime to n.
    let mut stride = (n as f64 * 0.618_033_988_749_895) as usize | 1;
    while gcd(stride, n) != 1 {
        stride += 2;
    }
    let pts: Vec<C64> = (0..n).map(|k| points[(k * stride) % n]).collect();
    let inside = |d: &(C64, f64), p: C64| (p - d.0).norm() <= d.1 * (1.0 + 1e-12) + 1e-300;
    let mut d = (pts[0], 0.0);
    for i in 1..n {
        if inside(&d, pts[i]) {
            continue;
        }
        d = (pts[i], 0.0);
        for j in 0..i {
            if inside(&d, pts[j]) {
                continue;
            }
            d = ((pts[i] + pts[j]) * 0.5, (pts[i] - pts[j]).norm() * 0.5);
            for k in 0..j {
                if !inside(&d, pts[k]) {
                    d = circumcircle(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    d
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Circle through three points; the diameter circle of the farthest pair
/// when they are collinear.
fn circumcircle(a: C64, b: C64, c: C64) -> (C64, f64) {
    let (bx, cx) = (b - a, c - a);
    let d = 2.0 * (bx.re * cx.im - bx.im * cx.re);
    if d.abs() < 1e-300 {
        let pairs = [(a, b), (a, c), (b, c)];
        let (p, q) = pairs
            .into_iter()
            .max_by(|x, y| (x.0 - x.1).norm().total_cmp(&(y.0 - y.1).norm()))
            .expect("three pairs");
        return ((p + q) * 0.5, (p - q).norm() * 0.5);
    }
    let (b2, c2) = (bx.norm_sqr(), cx.norm_sqr());
    let ux = (cx.im * b2 - bx.im * c2) / d;
    let uy = (bx.re * c2 - cx.re * b2) / d;
    let u = C64::new(ux, uy);
    (a + u, u.norm())
}

// ---------------------------------------------------------------------------
// polyline and polygon helpers

pub fn circle(center: C64, radius: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| center + C64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

pub fn bbox_of(points: &[C64]) -> (C64, C64) {
    let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

/// Length of a closed polyline.
pub fn polyline_length(poly: &[C64]) -> f64 {
    let n = poly.len();
    (0..n).map(|k| (poly[(k + 1) % n] - poly[k]).norm()).sum()
}

fn point_at_arclength(poly: &[C64], s: f64) -> C64 {
    let total = polyline_length(poly);
    let mut s = s.rem_euclid(total);
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let len = (b - a).norm();
        if s <= len && len > 0.0 {
            return a + (b - a) * (s / len);
        }
        s -= len;
    }
    poly[0]
}

/// `n` points equally spaced in arclength along a closed polyline, starting
/// at `phase` spacings past the first vertex.
pub fn resample_closed(poly: &[C64], n: usize, phase: f64) -> Vec<C64> {
    let m = poly.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if m == 1 {
        return vec![poly[0]; n];
    }
    let total = polyline_length(poly);
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    let mut seg_len = (poly[1] - poly[0]).norm();
    for k in 0..n {
        let s = (k as f64 + phase.rem_euclid(1.0)) * step;
        while seg_start + seg_len < s && seg < m - 1 {
            seg_start += seg_len;
            seg += 1;
            seg_len = (poly[(seg + 1) % m] - poly[seg]).norm();
        }
        let a = poly[seg];
        let b = poly[(seg + 1) % m];
        let t = if seg_len > 0.0 { ((s - seg_start) / seg_len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(a + (b - a) * t);
    }
    out
}

pub fn segment_distance(a: C64, b: C64, z: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

fn polyline_distance(poly: &[C64], z: C64) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| segment_distance(poly[k], poly[(k + 1) % n], z))
        .fold(f64::INFINITY, f64::min)
}

/// Signed area, positive for counterclockwise vertex order.
pub fn polygon_area(v: &[C64]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|k| v[k].re * v[(k + 1) % n].im - v[(k + 1) % n].re * v[k].im).sum::<f64>()
}

fn polygon_centroid(v: &[C64]) -> Option<C64> {
    let a = polygon_area(v);
    if a.abs() < 1e-300 {
        return None;
    }
    let n = v.len();
    let mut c = C64::new(0.0, 0.0);
    for k in 0..n {
        let (p, q) = (v[k], v[(k + 1) % n]);
        let cross = p.re * q.im - q.re * p.im;
        c += (p + q) * cross;
    }
    Some(c / (6.0 * a))
}

/// Even-odd rule.
pub fn polygon_contains(v: &[C64], z: C64) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.im > z.im) != (b.im > z.im) && z.re < (b.re - a.re) * (z.im - a.im) / (b.im - a.im) + a.re {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn orient(a: C64, b: C64, c: C64) -> f64 {
    ((b - a).conj() * (c - a)).im
}

/// Closed segments `[a, b]` and `[c, d]` share a point.
pub fn segments_intersect(a: C64, b: C64, c: C64, d: C64) -> bool {
    let on = |p: C64, q: C64, r: C64| {
        r.re >= p.re.min(q.re) && r.re <= p.re.max(q.re) && r.im >= p.im.min(q.im) && r.im <= p.im.max(q.im)
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on(a, b, c)) || (o2 == 0.0 && on(a, b, d)) || (o3 == 0.0 && on(c, d, a)) || (o4 == 0.0 && on(c, d, b))
}

/// No two non-adjacent edges of the closed polygon meet, and no vertex repeats.
pub fn polygon_is_simple(v: &[C64]) -> bool {
    let n = v.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if v[i] == v[(i + 1) % n] {
            return false;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}
