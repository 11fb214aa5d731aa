//! Sampled certificates for the stage conditions.
//!
//! Every check is a pure function of its inputs and returns a
//! [`CheckResult`] whose margin is positive exactly when the check passes.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{polyline_length, segment_distance, segments_intersect, CompactSet};
use crate::polynomials::{iterate, iterate_with_derivative, OrbitTable, Polynomial};

/// Tolerances shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Boundary samples for containment checks.
    pub containment_samples: usize,
    /// Boundary samples for univalence checks, before refinement.
    pub univalence_samples: usize,
    /// Largest number of bisections of one boundary edge during refinement.
    pub refine_depth: usize,
    /// Minimum image separation as a fraction of the mean image spacing.
    pub separation_floor: f64,
    /// Allowed distance of the summed argument from a multiple of 2π.
    pub winding_slack: f64,
    pub fixed_point: f64,
    pub preimage: f64,
    /// Relative tolerance for recomputed orbit points.
    pub orbit_relative: f64,
    /// Clearance demanded of escaping containments.
    pub containment_slack: f64,
    /// Offset of the boundary samples as a fraction of their spacing.
    pub sample_phase: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            containment_samples: 1024,
            univalence_samples: 1024,
            refine_depth: 8,
            separation_floor: 1e-3,
            winding_slack: 0.1,
            fixed_point: 1e-9,
            preimage: 1e-8,
            orbit_relative: 1e-9,
            containment_slack: 0.02,
            sample_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Signed slack; positive exactly when `pass`.
    pub margin: f64,
    pub details: String,
}

impl CheckResult {
    /// Builds a result from a margin, clamping infinities so the value
    /// survives JSON.
    pub fn from_margin(name: impl Into<String>, margin: f64, details: impl Into<String>) -> CheckResult {
        let margin = if margin.is_nan() { -f64::MAX } else { margin.clamp(-f64::MAX, f64::MAX) };
        CheckResult { name: name.into(), pass: margin > 0.0, margin, details: details.into() }
    }

    pub fn failed(name: impl Into<String>, details: impl Into<String>) -> CheckResult {
        CheckResult::from_margin(name, -f64::MAX, details)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> CheckResult {
        self.name = name.into();
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub stage: usize,
    pub checks: Vec<CheckResult>,
}

impl Certificate {
    pub fn new(stage: usize) -> Certificate {
        Certificate { stage, checks: Vec::new() }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.pass)
    }
}

/// `{ inner < |z - center| < outer }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub center: C64,
    pub outer: f64,
    pub inner: f64,
}

impl AnnulusSpec {
    /// The annulus `A_k` of the oscillating construction.
    pub fn level(k: usize) -> AnnulusSpec {
        AnnulusSpec {
            center: C64::new(0.0, 0.0),
            outer: 1.0 / (2 * k + 1) as f64,
            inner: 1.0 / (2 * k + 3) as f64,
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        let r = (z - self.center).norm();
        r > self.inner && r < self.outer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Target {
    Disk { center: C64, radius: f64 },
    Annulus(AnnulusSpec),
}

/// Images `f^n(z)` of the samples, or `None` if any orbit overflows.
fn images(f: &Polynomial, zs: &[C64], n: usize) -> Option<Vec<C64>> {
    zs.par_iter().map(|&z| iterate(f, z, n)).collect()
}

/// Does `f^n(source)` lie in `target`?
///
/// The margin is the clearance of the worst boundary image.  A disk target
/// is only accepted together with a univalence certificate, and an annulus
/// target additionally requires the image curve not to wind around the
/// hole.
pub fn check_containment(
    f: &Polynomial,
    source: &CompactSet,
    n: usize,
    target: &Target,
    tol: &Tolerances,
) -> CheckResult {
    let name = format!("containment n={n}");
    let zs = source.samples_with_phase(tol.containment_samples, tol.sample_phase);
    let Some(ws) = images(f, &zs, n) else {
        return CheckResult::failed(name, "orbit overflow");
    };
    match *target {
        Target::Disk { center, radius } => {
            let worst = ws.iter().map(|w| (w - center).norm()).fold(0.0, f64::max);
            let geometric = radius - worst;
            let univalent = check_univalence(f, source, n, tol);
            let margin = if univalent.pass { geometric } else { geometric.min(univalent.margin) };
            CheckResult::from_margin(
                name,
                margin,
                format!(
                    "max |f^{n}(z) - ({}, {})| = {worst:.6e} against radius {radius}; univalence {}",
                    center.re,
                    center.im,
                    if univalent.pass { "certified" } else { "not certified" }
                ),
            )
        }
        Target::Annulus(a) => {
            let (lo, hi) = ws
                .iter()
                .map(|w| (w - a.center).norm())
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
            let geometric = (a.outer - hi).min(lo - a.inner);
            let wind = winding_number(&ws, a.center);
            let margin = match wind {
                Ok(0) => geometric,
                _ => geometric.min(-1.0),
            };
            CheckResult::from_margin(
                name,
                margin,
                format!(
                    "image radii in [{lo:.6e}, {hi:.6e}] against ({}, {}); winding about center {:?}",
                    a.inner, a.outer, wind
                ),
            )
        }
    }
}

/// Winding number of the closed polyline `ws` about `a`.
///
/// Errors with the accumulated angle when it is not within the slack of a
/// multiple of 2π, when a single step turns by more than a quarter turn (the
/// sum of principal arguments is then unreliable), or when a vertex sits on
/// `a`.
pub fn winding_number(ws: &[C64], a: C64) -> Result<i64, f64> {
    winding_with_slack(ws, a, 0.1)
}

fn winding_with_slack(ws: &[C64], a: C64, slack: f64) -> Result<i64, f64> {
    let n = ws.len();
    let mut total = 0.0;
    for k in 0..n {
        let u = ws[k] - a;
        let v = ws[(k + 1) % n] - a;
        if u.norm() == 0.0 || v.norm() == 0.0 {
            return Err(f64::NAN);
        }
        let turn = (v / u).arg();
        if turn.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(f64::NAN);
        }
        total += turn;
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    if ((turns - rounded) * std::f64::consts::TAU).abs() <= slack {
        Ok(rounded as i64)
    } else {
        Err(total)
    }
}

/// Boundary samples refined until consecutive images are close and each
/// image edge is nearly straight.
fn refined_boundary(f: &Polynomial, zs: &[C64], n: usize, depth: usize) -> Option<(Vec<C64>, Vec<C64>)> {
    let ws = images(f, zs, n)?;
    let m = zs.len();
    let coarse_len: f64 = (0..m).map(|k| (ws[(k + 1) % m] - ws[k]).norm()).sum();
    let step = coarse_len / m as f64;
    let edges: Option<Vec<Vec<(C64, C64)>>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut out = vec![(zs[k], ws[k])];
            refine_edge(f, n, (zs[k], ws[k]), (zs[(k + 1) % m], ws[(k + 1) % m]), step, depth, &mut out)?;
            Some(out)
        })
        .collect();
    let (rz, rw): (Vec<C64>, Vec<C64>) = edges?.into_iter().flatten().unzip();
    Some((rz, rw))
}

fn refine_edge(
    f: &Polynomial,
    n: usize,
    a: (C64, C64),
    b: (C64, C64),
    step: f64,
    depth: usize,
    out: &mut Vec<(C64, C64)>,
) -> Option<()> {
    if depth == 0 {
        return Some(());
    }
    let zm = 0.5 * (a.0 + b.0);
    let wm = iterate(f, zm, n)?;
    let chord = (b.1 - a.1).norm();
    let bend = (wm - 0.5 * (a.1 + b.1)).norm();
    if chord <= step && bend <= 0.25 * chord.max(1e-300) {
        return Some(());
    }
    refine_edge(f, n, a, (zm, wm), step, depth - 1, out)?;
    out.push((zm, wm));
    refine_edge(f, n, (zm, wm), b, step, depth - 1, out)
}

/// Is `f^n` injective on the filled set `domain`?
///
/// Certified from the boundary: the derivative of the iterate does not
/// vanish there, the image polygon is simple with well separated vertices,
/// and it winds exactly once around the image of an interior point.
pub fn check_univalence(f: &Polynomial, domain: &CompactSet, n: usize, tol: &Tolerances) -> CheckResult {
    let name = format!("univalence n={n}");
    let zs = domain.samples_with_phase(tol.univalence_samples, tol.sample_phase);
    let Some((rz, rw)) = refined_boundary(f, &zs, n, tol.refine_depth) else {
        return CheckResult::failed(name, "orbit overflow");
    };
    let min_deriv = rz
        .par_iter()
        .map(|&z| iterate_with_derivative(f, z, n).map_or(0.0, |(_, d)| d.norm()))
        .reduce(|| f64::INFINITY, f64::min);
    if !(min_deriv > 0.0) {
        return CheckResult::failed(name, "derivative of the iterate vanishes on the boundary");
    }
    let Some(center) = iterate(f, domain.witness(), n) else {
        return CheckResult::failed(name, "orbit overflow at the witness point");
    };
    let wind = winding_with_slack(&rw, center, tol.winding_slack);
    match wind {
        Ok(1) => {}
        Ok(w) => return CheckResult::from_margin(name, -((w - 1).abs() as f64), format!("winding number {w}")),
        Err(total) => {
            return CheckResult::failed(name, format!("UnderSampled: accumulated angle {total:.6}"));
        }
    }
    if let Some((i, j)) = first_crossing(&rw) {
        return CheckResult::from_margin(name, -1.0, format!("image edges {i} and {j} cross"));
    }
    let perimeter = polyline_length(&rw);
    let spacing = perimeter / rw.len() as f64;
    let sep = min_separation(&rw);
    let ratio = sep / spacing;
    CheckResult::from_margin(
        name,
        ratio - tol.separation_floor,
        format!(
            "{} refined samples; min |(f^{n})'| = {min_deriv:.3e}; separation ratio {ratio:.3e}; winding 1",
            rw.len()
        ),
    )
}

/// Grid buckets keyed by cell, shared by the separation and crossing tests.
fn buckets<F: Fn(usize) -> (C64, C64)>(count: usize, cell: f64, span: F) -> HashMap<(i64, i64), Vec<usize>> {
    let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for k in 0..count {
        let (lo, hi) = span(k);
        let (x0, y0) = ((lo.re / cell).floor() as i64, (lo.im / cell).floor() as i64);
        let (x1, y1) = ((hi.re / cell).floor() as i64, (hi.im / cell).floor() as i64);
        // Degenerate spans beyond a few thousand cells are collapsed into
        // the corner cells; the crossing test is still exact there because
        // every pair sharing any cell is compared.
        if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) > 4096 {
            for key in [(x0, y0), (x1, y1), (x0, y1), (x1, y0)] {
                map.entry(key).or_default().push(k);
            }
            map.entry((i64::MIN, i64::MIN)).or_default().push(k);
            continue;
        }
        for x in x0..=x1 {
            for y in y0..=y1 {
                map.entry((x, y)).or_default().push(k);
            }
        }
    }
    map
}

/// Smallest distance between two distinct vertices of the polyline.
pub fn min_separation(ws: &[C64]) -> f64 {
    let m = ws.len();
    if m < 2 {
        return f64::INFINITY;
    }
    let perimeter = polyline_length(ws);
    let cell = (perimeter / m as f64).max(1e-300);
    let map = buckets(m, cell, |k| (ws[k], ws[k]));
    let mut keys: Vec<&(i64, i64)> = map.keys().collect();
    keys.sort();
    let mut best = f64::INFINITY;
    for key in keys {
        let here = &map[key];
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(there) = map.get(&(key.0 + dx, key.1 + dy)) else { continue };
                for &i in here {
                    for &j in there {
                        if i < j {
                            best = best.min((ws[i] - ws[j]).norm());
                        }
                    }
                }
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        // No two vertices share a neighbourhood; fall back to the exact scan.
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| (ws[i] - ws[j]).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// First pair of non-adjacent crossing edges of the closed polyline, if any.
pub fn first_crossing(ws: &[C64]) -> Option<(usize, usize)> {
    let m = ws.len();
    if m < 4 {
        return None;
    }
    let cell = (polyline_length(ws) / m as f64 * 2.0).max(1e-300);
    let edge = |k: usize| (ws[k], ws[(k + 1) % m]);
    let map = buckets(m, cell, |k| {
        let (a, b) = edge(k);
        (C64::new(a.re.min(b.re), a.im.min(b.im)), C64::new(a.re.max(b.re), a.im.max(b.im)))
    });
    let mut keys: Vec<&(i64, i64)> = map.keys().collect();
    keys.sort();
    let mut found: Option<(usize, usize)> = None;
    for key in keys {
        let list = &map[key];
        for (p, &i) in list.iter().enumerate() {
            for &j in &list[p + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if j == i + 1 || (i == 0 && j == m - 1) || i == j {
                    continue;
                }
                let (a, b) = edge(i);
                let (c, d) = edge(j);
                if segments_intersect(a, b, c, d) {
                    found = Some(found.map_or((i, j), |f| f.min((i, j))));
                }
            }
        }
    }
    found
}

/// Is `p0` an attracting fixed point of `f` with the given multiplier?
pub fn check_fixed_point(f: &Polynomial, p0: C64, multiplier: C64, tol: &Tolerances) -> CheckResult {
    let (v, d) = f.horner2(p0);
    let value_err = (v - p0).norm();
    let deriv_err = (d - multiplier).norm();
    let margin = (tol.fixed_point - value_err).min(tol.fixed_point - deriv_err).min(1.0 - multiplier.norm());
    CheckResult::from_margin(
        "fixed point",
        margin,
        format!("|f(p0) - p0| = {value_err:.3e}, |f'(p0) - multiplier| = {deriv_err:.3e}"),
    )
}

/// `f^{schedule[n]}(x_n)` lands on the fixed point for every `n`.
pub fn check_preimages(f: &Polynomial, xs: &[C64], schedule: &[usize], fixed_pt: C64, tol: &Tolerances) -> CheckResult {
    assert_eq!(xs.len(), schedule.len(), "one schedule entry per point");
    let mut worst: f64 = 0.0;
    let mut worst_n = 0;
    for (k, (&x, &s)) in xs.iter().zip(schedule).enumerate() {
        let err = iterate(f, x, s).map_or(f64::INFINITY, |w| (w - fixed_pt).norm());
        if !(err <= worst) {
            worst = err;
            worst_n = k + 1;
        }
    }
    CheckResult::from_margin(
        "preimages",
        tol.preimage - worst,
        format!("worst |f^N(x_n) - p0| = {worst:.3e} at n = {worst_n}"),
    )
}

/// Every boundary sample of `omega` lies within `delta` of the nearest
/// boundary projection of some `x_n`.
pub fn check_accumulation(xs: &[C64], omega: &CompactSet, delta: f64) -> CheckResult {
    let poly = omega.boundary();
    let proj: Vec<C64> = xs.iter().map(|&x| project_to_polyline(poly, x)).collect();
    let samples = omega.samples(1024);
    let gap = samples
        .par_iter()
        .map(|&z| proj.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    CheckResult::from_margin(
        "accumulation",
        delta - gap,
        format!("worst gap {gap:.6e} with {} points against delta {delta:.6e}", xs.len()),
    )
}

/// Nearest point of a closed polyline.
pub fn project_to_polyline(poly: &[C64], z: C64) -> C64 {
    let n = poly.len();
    let mut best = (f64::INFINITY, z);
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let d = b - a;
        let len2 = d.norm_sqr();
        let t = if len2 > 0.0 { (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0) } else { 0.0 };
        let p = a + d * t;
        let dist = segment_distance(a, b, z);
        if dist < best.0 {
            best = (dist, p);
        }
    }
    best.1
}

/// Recorded orbit points agree with fresh iteration of `f`.
pub fn check_orbits(f: &Polynomial, tables: &[OrbitTable], tol: &Tolerances) -> CheckResult {
    let mut worst: f64 = 0.0;
    for t in tables {
        let mut w = t.base;
        for (j, &stored) in t.iterates.iter().enumerate() {
            if j > 0 {
                w = f.horner(w);
            }
            let rel = (w - stored).norm() / stored.norm().max(1.0);
            if !(rel <= worst) {
                worst = rel;
            }
        }
    }
    CheckResult::from_margin("orbit table", tol.orbit_relative - worst, format!("worst relative drift {worst:.3e}"))
}

/// `sup_{|z| = radius} |f - g| ≤ bound`, sampled on the circle (maximum
/// modulus covers the disk).
pub fn check_cauchy(f: &Polynomial, g: &Polynomial, radius: f64, bound: f64, samples: usize) -> CheckResult {
    let zs = crate::geometry::circle(C64::new(0.0, 0.0), radius, samples);
    let sup = zs.par_iter().map(|&z| (f.horner(z) - g.horner(z)).norm()).reduce(|| 0.0, f64::max);
    let sup = if sup.is_nan() { f64::INFINITY } else { sup };
    CheckResult::from_margin(
        "cauchy",
        if sup <= bound { (bound - sup).max(f64::MIN_POSITIVE) } else { bound - sup },
        format!("sup over |z| = {radius} of |f_next - f| = {sup:.6e} against {bound:.6e}"),
    )
}
