//! Constrained polynomial approximation on disjoint compact pieces.
//!
//! A fit has the form `p = base + r`, where `r` is a weighted least-squares
//! fit of `target - base` on the piece boundaries subject to the constraint
//! data as exact linear conditions.  The least-squares basis is built by
//! Arnoldi orthogonalization in the sampled inner product, the constraints
//! are imposed by projecting its coefficients, and the result is converted to
//! coefficients in a frame centered on the pieces.

use std::cmp::Ordering;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{smallest_enclosing_disk, CompactSet};
use crate::polynomials::Polynomial;

#[derive(Debug, Error, Clone)]
pub enum ApproxError {
    #[error("constraint nodes {0} and {1} are closer than 1e-8")]
    IllConditioned(C64, C64),
    #[error("pieces {0} and {1} overlap or touch")]
    PiecesOverlap(usize, usize),
    #[error("degree cap {cap} reached; best margin {best_margin:e} against epsilon {epsilon:e}")]
    DegreeCapExceeded { cap: usize, best_margin: f64, epsilon: f64, best: Box<FitResult> },
}

/// Target of a piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetFn {
    Affine { alpha: C64, beta: C64 },
    Polynomial(Polynomial),
    Constant(C64),
}

impl TargetFn {
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            TargetFn::Affine { alpha, beta } => alpha * z + beta,
            TargetFn::Polynomial(p) => p.horner(z),
            TargetFn::Constant(c) => *c,
        }
    }

    pub fn to_polynomial(&self) -> Polynomial {
        match self {
            TargetFn::Affine { alpha, beta } => Polynomial::linear(*alpha, *beta),
            TargetFn::Polynomial(p) => p.clone(),
            TargetFn::Constant(c) => Polynomial::constant(*c),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxPiece {
    pub set: CompactSet,
    pub target: TargetFn,
}

/// Exact data at a node: the value, and optionally the first derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteConstraint {
    pub point: C64,
    pub value: C64,
    pub deriv: Option<C64>,
}

impl HermiteConstraint {
    pub fn value(point: C64, value: C64) -> Self {
        HermiteConstraint { point, value, deriv: None }
    }

    pub fn hermite(point: C64, value: C64, deriv: C64) -> Self {
        HermiteConstraint { point, value, deriv: Some(deriv) }
    }

    fn multiplicity(&self) -> usize {
        if self.deriv.is_some() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxProblem {
    pub pieces: Vec<ApproxPiece>,
    pub constraints: Vec<HermiteConstraint>,
    pub epsilon: f64,
    /// Fit `p - base` instead of `p`.  Mathematically neutral, but keeps a
    /// large previous stage out of the least-squares system.
    pub base: Option<Polynomial>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub poly: Polynomial,
    /// `safety · sup |p - target|` per piece, on the dense check samples.
    pub per_piece_margin: Vec<f64>,
    /// Largest constraint defect (values and prescribed derivatives).
    pub constraint_residual: f64,
    pub degree_used: usize,
    /// Weighted root-mean-square residual on the fitting samples.
    pub fit_residual: f64,
    pub success: bool,
}

impl FitResult {
    pub fn worst_margin(&self) -> f64 {
        self.per_piece_margin.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub safety: f64,
    pub start_degree: usize,
    pub min_samples: usize,
    pub samples_per_degree: usize,
    pub verify_factor: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { safety: 1.25, start_degree: 8, min_samples: 256, samples_per_degree: 32, verify_factor: 4 }
    }
}

/// Newton divided differences on confluent nodes, expanded to monomials.
pub fn hermite_interpolant(constraints: &[HermiteConstraint]) -> Result<Polynomial, ApproxError> {
    hermite_interpolant_in(constraints, C64::new(0.0, 0.0), 1.0)
}

/// The same interpolant, expanded in the frame `t = (z - center) / scale`.
pub fn hermite_interpolant_in(
    constraints: &[HermiteConstraint],
    center: C64,
    scale: f64,
) -> Result<Polynomial, ApproxError> {
    for (i, a) in constraints.iter().enumerate() {
        for b in &constraints[i + 1..] {
            if (a.point - b.point).norm() < 1e-8 {
                return Err(ApproxError::IllConditioned(a.point, b.point));
            }
        }
    }
    let mut z = Vec::new();
    let mut table: Vec<C64> = Vec::new();
    let mut ders: Vec<Option<C64>> = Vec::new();
    for c in constraints {
        let t = (c.point - center) / scale;
        z.push(t);
        table.push(c.value);
        ders.push(None);
        if let Some(d) = c.deriv {
            z.push(t);
            table.push(c.value);
            ders.push(Some(d * scale));
        }
    }
    let m = z.len();
    if m == 0 {
        return Ok(Polynomial::in_frame(vec![], center, scale));
    }
    let mut coef = table;
    for j in 1..m {
        for i in (j..m).rev() {
            coef[i] = if z[i] == z[i - j] {
                // Nodes repeat at most twice, so this is the first-order case.
                ders[i].expect("repeated node carries a derivative")
            } else {
                (coef[i] - coef[i - 1]) / (z[i] - z[i - j])
            };
        }
    }
    // Expand the Newton form in t, where the frame is the unit one.
    let mut p = Polynomial::constant(coef[m - 1]);
    for k in (0..m - 1).rev() {
        p = &p.mul_linear(z[k]) + &Polynomial::constant(coef[k]);
    }
    Ok(Polynomial::in_frame(p.coeffs().to_vec(), center, scale))
}

/// Monic `∏ (z - x_i)`.
pub fn node_polynomial(points: &[C64]) -> Polynomial {
    points.iter().fold(Polynomial::constant(C64::new(1.0, 0.0)), |p, &x| p.mul_linear(x))
}

/// Largest defect of `p` on the constraint data.
pub fn constraint_residual(p: &Polynomial, constraints: &[HermiteConstraint]) -> f64 {
    constraints
        .iter()
        .map(|c| {
            let (v, d) = p.horner2(c.point);
            let dv = (v - c.value).norm();
            let dd = c.deriv.map(|t| (d - t).norm()).unwrap_or(0.0);
            dv.max(dd)
        })
        .fold(0.0, f64::max)
}

fn cmp_c64(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Pieces and constraints in a canonical order, so that permuting the input
/// does not change the result.
fn canonical(problem: &ApproxProblem) -> (Vec<&ApproxPiece>, Vec<HermiteConstraint>) {
    let mut pieces: Vec<&ApproxPiece> = problem.pieces.iter().collect();
    let keys: Vec<(C64, usize)> = pieces.iter().map(|p| (p.set.centroid(), p.set.boundary().len())).collect();
    let mut idx: Vec<usize> = (0..pieces.len()).collect();
    idx.sort_by(|&a, &b| cmp_c64(&keys[a].0, &keys[b].0).then(keys[a].1.cmp(&keys[b].1)));
    pieces = idx.iter().map(|&k| &problem.pieces[k]).collect();
    let mut cons = problem.constraints.clone();
    cons.sort_by(|a, b| cmp_c64(&a.point, &b.point));
    (pieces, cons)
}

fn check_disjoint(pieces: &[&ApproxPiece]) -> Result<(), ApproxError> {
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let gap = 2.0 * pieces[i].set.h().max(pieces[j].set.h());
            if pieces[i].set.near(&pieces[j].set, gap) {
                return Err(ApproxError::PiecesOverlap(i, j));
            }
        }
    }
    Ok(())
}

/// Samples of one piece with their least-squares data.
struct Sampled {
    z: Vec<C64>,
    rhs: Vec<C64>,
    weight: Vec<f64>,
}

/// Orthonormal polynomial basis on weighted samples, built from the Krylov
/// sequence of `t = (z - center) / scale`.
struct Arnoldi {
    /// Hessenberg recurrence: `t φ_k = Σ_{j ≤ k+1} h[k][j] φ_j`.
    h: Vec<Vec<C64>>,
    norm0: f64,
    /// Coefficients of the constrained least-squares fit in the basis.
    coeffs: Vec<C64>,
    /// Constraint functionals on the basis, one row per value or derivative.
    rows: Vec<Vec<C64>>,
    residual: f64,
}

/// Fitting frame: `t = (z - center) / scale` maps the data into the unit disk.
#[derive(Debug, Clone, Copy)]
struct Frame {
    center: C64,
    scale: f64,
}

impl Frame {
    /// Smallest disk containing all points.
    fn covering(points: &[C64]) -> Frame {
        let (center, scale) = smallest_enclosing_disk(points);
        Frame { center, scale: if scale > 0.0 { scale } else { 1.0 } }
    }

    fn t(&self, z: C64) -> C64 {
        (z - self.center) / self.scale
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Solves `min ‖c - c_ls‖` subject to `C c = d` by a thin QR factorization of
/// `C^H`, so the correction is `Q R^{-H} (C c_ls - d)`.
fn project_onto_constraints(c_ls: &[C64], rows: &[Vec<C64>], d: &[C64]) -> Option<Vec<C64>> {
    let m = rows.len();
    let n = c_ls.len();
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut r = vec![vec![C64::new(0.0, 0.0); m]; m];
    for (i, row) in rows.iter().enumerate() {
        let mut v: Vec<C64> = row.iter().map(|x| x.conj()).collect();
        let scale = dot(&v, &v).re.sqrt();
        for _pass in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let p = dot(qj, &v);
                r[j][i] += p;
                v.iter_mut().zip(qj).for_each(|(a, b)| *a -= b * p);
            }
        }
        let nv = dot(&v, &v).re.sqrt();
        if !(nv > 1e-13 * scale) {
            return None;
        }
        r[i][i] = C64::new(nv, 0.0);
        v.iter_mut().for_each(|x| *x /= nv);
        q.push(v);
    }
    // R^H u = C c_ls - d, R^H lower triangular.
    let mut u = vec![C64::new(0.0, 0.0); m];
    for i in 0..m {
        let ci = rows[i].iter().zip(c_ls).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a * b);
        let mut acc = ci - d[i];
        for j in 0..i {
            acc -= r[j][i].conj() * u[j];
        }
        u[i] = acc / r[i][i].conj();
    }
    let mut c = c_ls.to_vec();
    for (qi, ui) in q.iter().zip(&u) {
        for k in 0..n {
            c[k] -= qi[k] * ui;
        }
    }
    Some(c)
}

impl Arnoldi {
    /// Least-squares fit of `data` of degree at most `n` that meets the
    /// constraints exactly (up to round-off).  `None` if the constraints are
    /// dependent at this degree.
    fn fit(data: &Sampled, frame: Frame, n: usize, constraints: &[HermiteConstraint]) -> Option<Arnoldi> {
        let w = &data.weight;
        let t: Vec<C64> = data.z.iter().map(|&z| frame.t(z)).collect();
        let norm0 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q0: Vec<C64> = w.iter().map(|&x| C64::new(x / norm0, 0.0)).collect();
        let mut basis: Vec<Vec<C64>> = vec![q0];
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<C64> = basis[k].iter().zip(&t).map(|(q, tt)| q * tt).collect();
            let mut hk = vec![C64::new(0.0, 0.0); k + 2];
            for _pass in 0..2 {
                let proj: Vec<C64> = basis.par_iter().map(|q| dot(q, &v)).collect();
                v.par_iter_mut().enumerate().for_each(|(i, vi)| {
                    let mut acc = *vi;
                    for (q, p) in basis.iter().zip(&proj) {
                        acc -= q[i] * p;
                    }
                    *vi = acc;
                });
                for (j, p) in proj.iter().enumerate() {
                    hk[j] += p;
                }
            }
            let nv = dot(&v, &v).re.sqrt();
            if !(nv > 1e-14) {
                break;
            }
            hk[k + 1] = C64::new(nv, 0.0);
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
            h.push(hk);
        }
        let wr: Vec<C64> = data.rhs.iter().zip(w).map(|(r, wi)| r * wi).collect();
        let c_ls: Vec<C64> = basis.par_iter().map(|q| dot(q, &wr)).collect();
        let mut res = wr;
        for (q, c) in basis.iter().zip(&c_ls) {
            res.iter_mut().zip(q).for_each(|(r, qi)| *r -= qi * c);
        }
        let ls_residual = dot(&res, &res).re;
        let mut arnoldi = Arnoldi { h, norm0, coeffs: c_ls.clone(), rows: Vec::new(), residual: 0.0 };
        let mut rows = Vec::new();
        let mut d = Vec::new();
        for c in constraints {
            let (vals, ders) = arnoldi.basis_at(frame.t(c.point));
            rows.push(vals);
            d.push(c.value);
            if let Some(dz) = c.deriv {
                rows.push(ders.into_iter().map(|v| v / frame.scale).collect());
                d.push(dz);
            }
        }
        let coeffs = if rows.is_empty() { c_ls.clone() } else { project_onto_constraints(&c_ls, &rows, &d)? };
        let shift: f64 = coeffs.iter().zip(&c_ls).map(|(a, b)| (a - b).norm_sqr()).sum();
        arnoldi.residual = (ls_residual + shift).sqrt();
        arnoldi.coeffs = coeffs;
        arnoldi.rows = rows;
        Some(arnoldi)
    }

    /// Basis values and `t`-derivatives at `t`, from the Hessenberg recurrence.
    fn basis_at(&self, t: C64) -> (Vec<C64>, Vec<C64>) {
        let mut v = vec![C64::new(1.0 / self.norm0, 0.0)];
        let mut dv = vec![C64::new(0.0, 0.0)];
        for (k, hk) in self.h.iter().enumerate() {
            let mut a = t * v[k];
            let mut da = v[k] + t * dv[k];
            for j in 0..=k {
                a -= hk[j] * v[j];
                da -= hk[j] * dv[j];
            }
            v.push(a / hk[k + 1]);
            dv.push(da / hk[k + 1]);
        }
        v.truncate(self.coeffs.len().max(1));
        dv.truncate(self.coeffs.len().max(1));
        (v, dv)
    }

    /// Removes the round-off defects of `p` on the constraint data with the
    /// smallest change in the sampled norm, so the pieces barely notice.
    fn polish(&self, mut p: Polynomial, frame: Frame, constraints: &[HermiteConstraint]) -> Polynomial {
        let zeros = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for _ in 0..3 {
            let mut defects = Vec::with_capacity(self.rows.len());
            for c in constraints {
                let (v, d) = p.horner2(c.point);
                defects.push(c.value - v);
                if let Some(dz) = c.deriv {
                    defects.push(dz - d);
                }
            }
            if defects.iter().all(|d| d.norm() == 0.0) {
                break;
            }
            match project_onto_constraints(&zeros, &self.rows, &defects) {
                Some(dc) => p = &p + &self.combine(&dc, frame),
                None => break,
            }
        }
        p
    }

    /// `Σ c_k φ_k` for the fitted coefficients, in the fitting frame.
    fn to_polynomial(&self, frame: Frame) -> Polynomial {
        self.combine(&self.coeffs, frame)
    }

    fn combine(&self, coeffs: &[C64], frame: Frame) -> Polynomial {
        let mut vs: Vec<Vec<C64>> = vec![vec![C64::new(1.0 / self.norm0, 0.0)]];
        for (k, hk) in self.h.iter().enumerate() {
            let mut next = vec![C64::new(0.0, 0.0); vs[k].len() + 1];
            for (i, c) in vs[k].iter().enumerate() {
                next[i + 1] += c;
            }
            for j in 0..=k {
                for (i, c) in vs[j].iter().enumerate() {
                    next[i] -= hk[j] * c;
                }
            }
            let inv = 1.0 / hk[k + 1].re;
            next.iter_mut().for_each(|c| *c *= inv);
            vs.push(next);
        }
        let len = vs.last().map(|v| v.len()).unwrap_or(1);
        let mut acc = vec![C64::new(0.0, 0.0); len];
        for (v, c) in vs.iter().zip(coeffs) {
            for (i, x) in v.iter().enumerate() {
                acc[i] += x * c;
            }
        }
        Polynomial::in_frame(acc, frame.center, frame.scale)
    }
}

fn fresh_phase(k: usize) -> f64 {
    (0.5 + 0.618_033_988_749_894_9 * (k as f64 + 1.0)).fract()
}

/// Per-piece `safety · sup |p - target|` on `count` samples per piece.
pub fn piece_margins(p: &Polynomial, pieces: &[&ApproxPiece], count: usize, safety: f64) -> Vec<f64> {
    pieces
        .iter()
        .enumerate()
        .map(|(k, piece)| {
            let n = count.max(piece.set.boundary().len().min(4 * count));
            let zs = piece.set.samples_with_phase(n, fresh_phase(k));
            let sup = zs
                .par_iter()
                .map(|&z| (p.horner(z) - piece.target.eval(z)).norm())
                .reduce(|| 0.0, f64::max);
            safety * if sup.is_nan() { f64::INFINITY } else { sup }
        })
        .collect()
}

/// Repairs round-off in the constraint data with a small interpolating correction.
fn polish(mut p: Polynomial, constraints: &[HermiteConstraint]) -> Polynomial {
    for _ in 0..3 {
        let defects: Vec<HermiteConstraint> = constraints
            .iter()
            .map(|c| {
                let (v, d) = p.horner2(c.point);
                HermiteConstraint { point: c.point, value: c.value - v, deriv: c.deriv.map(|t| t - d) }
            })
            .collect();
        let worst = defects
            .iter()
            .map(|c| c.value.norm().max(c.deriv.map(|d| d.norm()).unwrap_or(0.0)))
            .fold(0.0, f64::max);
        if worst == 0.0 {
            break;
        }
        match hermite_interpolant_in(&defects, p.center(), p.scale()) {
            Ok(fix) => p = &p + &fix,
            Err(_) => break,
        }
    }
    p
}

/// Degree-escalating constrained fit.
pub fn constrained_runge(problem: &ApproxProblem, degree_cap: usize) -> Result<FitResult, ApproxError> {
    constrained_runge_with(problem, degree_cap, &FitOptions::default())
}

pub fn constrained_runge_with(
    problem: &ApproxProblem,
    degree_cap: usize,
    opts: &FitOptions,
) -> Result<FitResult, ApproxError> {
    let (pieces, constraints) = canonical(problem);
    check_disjoint(&pieces)?;
    let base = problem.base.clone().unwrap_or_else(Polynomial::zero);
    let shifted: Vec<HermiteConstraint> = constraints
        .iter()
        .map(|c| {
            let (v, d) = base.horner2(c.point);
            HermiteConstraint { point: c.point, value: c.value - v, deriv: c.deriv.map(|t| t - d) }
        })
        .collect();
    let hull_points: Vec<C64> = pieces
        .iter()
        .flat_map(|p| p.set.boundary().iter().copied())
        .chain(constraints.iter().map(|c| c.point))
        .collect();
    let frame = Frame::covering(&hull_points);
    // Also rejects coincident nodes, and is the whole answer when there is
    // nothing to fit.
    let q = hermite_interpolant_in(&shifted, frame.center, frame.scale)?;
    let node_degree: usize = constraints.iter().map(|c| c.multiplicity()).sum();

    let mut best: Option<FitResult> = None;
    let mut degree = opts.start_degree.max(node_degree + 1);
    let mut misses = 0;
    loop {
        let degree_now = degree.min(degree_cap.max(node_degree));
        let result = fit_at_degree(problem, &pieces, &constraints, &shifted, &base, &q, frame, degree_now, opts);
        let done = result.success;
        let improved = best.as_ref().is_none_or(|b| result.worst_margin() < b.worst_margin());
        if improved || done {
            best = Some(result);
            misses = 0;
        } else {
            misses += 1;
        }
        if done {
            return Ok(best.expect("set above"));
        }
        // Two escalations in a row without progress means round-off has
        // taken over; higher degrees only get worse.
        if degree_now >= degree_cap || misses >= 2 {
            let best = best.expect("at least one degree tried");
            return Err(ApproxError::DegreeCapExceeded {
                cap: degree_cap,
                best_margin: best.worst_margin(),
                epsilon: problem.epsilon,
                best: Box::new(best),
            });
        }
        degree = (degree + 4).max(degree * 5 / 4);
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_at_degree(
    problem: &ApproxProblem,
    pieces: &[&ApproxPiece],
    constraints: &[HermiteConstraint],
    shifted: &[HermiteConstraint],
    base: &Polynomial,
    q: &Polynomial,
    frame: Frame,
    degree: usize,
    opts: &FitOptions,
) -> FitResult {
    let per_piece = opts.min_samples.max(opts.samples_per_degree * degree);
    let n_pieces = pieces.len().max(1) as f64;
    let mut data = Sampled { z: Vec::new(), rhs: Vec::new(), weight: Vec::new() };
    for piece in pieces {
        let zs = piece.set.samples(per_piece);
        let w = (n_pieces / zs.len() as f64).sqrt();
        for z in zs {
            data.rhs.push(piece.target.eval(z) - base.horner(z));
            data.z.push(z);
            data.weight.push(w);
        }
    }
    let fitted = if data.z.is_empty() { None } else { Arnoldi::fit(&data, frame, degree, shifted) };
    let (p, fit_residual) = match fitted {
        Some(arnoldi) => {
            let framed_base = base.reframe(frame.center, frame.scale);
            let p = arnoldi.polish(&framed_base + &arnoldi.to_polynomial(frame), frame, constraints);
            (polish(p, constraints), arnoldi.residual)
        }
        None => (polish(&base.reframe(frame.center, frame.scale) + q, constraints), f64::INFINITY),
    };
    let margins = piece_margins(&p, pieces, opts.verify_factor * per_piece, opts.safety);
    let success = margins.iter().all(|&m| m < problem.epsilon);
    FitResult {
        constraint_residual: constraint_residual(&p, constraints),
        degree_used: p.degree(),
        poly: p,
        per_piece_margin: margins,
        fit_residual,
        success,
    }
}

/// Re-checks a polynomial against a problem on fresh dense samples.
pub fn verify_fit(p: &Polynomial, problem: &ApproxProblem) -> FitResult {
    verify_fit_with(p, problem, &FitOptions::default())
}

pub fn verify_fit_with(p: &Polynomial, problem: &ApproxProblem, opts: &FitOptions) -> FitResult {
    let (pieces, constraints) = canonical(problem);
    let count = opts.verify_factor * opts.min_samples.max(opts.samples_per_degree * p.degree());
    let margins: Vec<f64> = pieces
        .iter()
        .enumerate()
        .map(|(k, piece)| {
            let zs = piece.set.samples_with_phase(count, fresh_phase(k + 17));
            let sup = zs.iter().map(|&z| (p.horner(z) - piece.target.eval(z)).norm()).fold(0.0, f64::max);
            opts.safety * sup
        })
        .collect();
    let success = margins.iter().all(|&m| m < problem.epsilon);
    FitResult {
        poly: p.clone(),
        constraint_residual: constraint_residual(p, &constraints),
        degree_used: p.degree(),
        per_piece_margin: margins,
        fit_residual: f64::NAN,
        success,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermite_single_node() {
        let q = hermite_interpolant(&[HermiteConstraint::hermite(c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0))]).unwrap();
        assert_eq!(q, Polynomial::linear(c(0.5, 0.0), c(0.0, 0.0)));
        let q = hermite_interpolant(&[HermiteConstraint::hermite(c(1.0, 0.0), c(1.0, 0.0), c(0.5, 0.0))]).unwrap();
        assert!((q.horner(c(0.0, 0.0)) - 0.5).norm() < 1e-15);
        assert!((q.horner(c(3.0, 0.0)) - 2.0).norm() < 1e-15);
    }

    #[test]
    fn hermite_two_nodes_degree_three() {
        let cons = [
            HermiteConstraint::hermite(c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)),
            HermiteConstraint::hermite(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)),
        ];
        let q = hermite_interpolant(&cons).unwrap();
        assert_eq!(q.degree(), 3);
        assert!(constraint_residual(&q, &cons) < 1e-14);
    }

    #[test]
    fn mixed_value_and_hermite_nodes() {
        let cons = [
            HermiteConstraint::hermite(c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)),
            HermiteConstraint::value(c(3.5, 0.2), c(0.0, 0.0)),
            HermiteConstraint::value(c(7.1, -0.3), c(2.0, 1.0)),
            HermiteConstraint::hermite(c(1.0, 1.0), c(-1.0, 0.0), c(0.0, 2.0)),
        ];
        let q = hermite_interpolant(&cons).unwrap();
        assert_eq!(q.degree(), 5);
        assert!(constraint_residual(&q, &cons) < 1e-12);
    }

    #[test]
    fn close_nodes_are_ill_conditioned() {
        let cons = [
            HermiteConstraint::value(c(1.0, 0.0), c(0.0, 0.0)),
            HermiteConstraint::value(c(1.0 + 1e-9, 0.0), c(1.0, 0.0)),
        ];
        assert!(matches!(hermite_interpolant(&cons), Err(ApproxError::IllConditioned(..))));
    }

    #[test]
    fn node_polynomial_expansion() {
        assert_eq!(node_polynomial(&[c(0.0, 0.0)]), Polynomial::identity());
        let w = node_polynomial(&[c(0.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(w.coeffs(), &[c(0.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn exact_recovery_single_piece() {
        let set = CompactSet::disk(c(0.0, 0.0), 1.0, 0.02).unwrap();
        let target = Polynomial::new(vec![c(1.0, 0.0), c(0.0, 2.0), c(-0.5, 0.0), c(0.25, 0.1)]);
        let problem = ApproxProblem {
            pieces: vec![ApproxPiece { set, target: TargetFn::Polynomial(target.clone()) }],
            constraints: vec![],
            epsilon: 1e-9,
            base: None,
        };
        let fit = constrained_runge(&problem, 64).unwrap();
        assert!(fit.success);
        assert!(fit.worst_margin() <= 1e-10);
    }

    #[test]
    fn base_offset_is_neutral() {
        let set = CompactSet::disk(c(0.0, 0.0), 1.0, 0.02).unwrap();
        let target = Polynomial::new(vec![c(1.0, 0.0), c(0.0, 2.0), c(-0.5, 0.0)]);
        let base = Polynomial::new(vec![c(0.3, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let x = c(0.1, 0.1);
        let problem = ApproxProblem {
            constraints: vec![HermiteConstraint::value(x, target.horner(x))],
            pieces: vec![ApproxPiece { set, target: TargetFn::Polynomial(target) }],
            epsilon: 1e-8,
            base: Some(base),
        };
        let fit = constrained_runge(&problem, 64).unwrap();
        assert!(fit.success);
        assert!(fit.constraint_residual < 1e-12);
    }
}
