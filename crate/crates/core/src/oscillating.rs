//! Construction of a map for which Ω is an oscillating wandering domain.
//!
//! With `N_k = k(k+1)/2` and `A_k = Δ(0, 1/(2k+1)) \ Δ̄(0, 1/(2k+3))`, the
//! orbit of `U_k` visits `A_k` at iterate `N_k`, is then pushed out by
//! translations `z + 4` to `Δ(4k, 1)` at iterate `N_k + k`, and a linear map
//! brings it back into `A_{k+1}` one step later. The point 1 is an attracting
//! fixed point whose preimages accumulate on `∂Ω`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{ApproxPiece, ApproxProblem, HermiteConstraint, TargetFn};
use crate::construction::{
    cover_image, disk_piece, fit_with_halving, prepare, Accepted, ConstructionError, ConstructionOptions,
    StageRecord,
};
use crate::geometry::{dilate, smallest_enclosing_disk, AffineMap, CompactSet, JordanRegion, Mode};
use crate::polynomials::{iterate, orbit_at_stage, OrbitTable, Polynomial};
use crate::verification::{
    check_accumulation, check_cauchy, check_containment, check_fixed_point, check_orbits, check_preimages,
    check_univalence, AnnulusSpec, Certificate, CheckResult, Target,
};

const ONE: C64 = C64::new(1.0, 0.0);
const HALF: C64 = C64::new(0.5, 0.0);

/// `N_k = k(k+1)/2`.
pub fn schedule(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Affine map sending the disk `Δ(c, ρ)` to `Δ(m, g/4)` where `m` is the
/// midpoint of the annulus on the positive real axis and `g` its width.
pub fn linear_into_annulus(hull: (C64, f64), annulus: &AnnulusSpec) -> AffineMap {
    let (c, rho) = hull;
    let g = annulus.outer - annulus.inner;
    let m = annulus.center + C64::new(0.5 * (annulus.outer + annulus.inner), 0.0);
    let alpha = if rho > 0.0 { C64::new(g / (4.0 * rho), 0.0) } else { ONE };
    AffineMap::new(alpha, m - alpha * c)
}

fn hull_of(points: &[C64]) -> (C64, f64) {
    let (c, r) = smallest_enclosing_disk(points);
    (c, 1.1 * r)
}

#[derive(Debug, Clone)]
pub struct OscillatingState {
    pub k: usize,
    pub f: Polynomial,
    pub omega: CompactSet,
    pub map: AffineMap,
    pub towers: Vec<CompactSet>,
    pub xs: Vec<C64>,
    /// `orbits[n-1]` holds `x_n^j` for `j < N_n`.
    pub orbits: Vec<OrbitTable>,
    pub eps_history: Vec<f64>,
    /// `N_1 … N_k`.
    pub schedule: Vec<usize>,
    /// `A_1 … A_k`.
    pub annuli: Vec<AnnulusSpec>,
    pub stages: Vec<StageRecord>,
    pub options: ConstructionOptions,
}

fn inner_disk(k: usize) -> Result<CompactSet, ConstructionError> {
    Ok(disk_piece(C64::new(0.0, 0.0), 1.0 / (2 * k + 1) as f64)?)
}

fn translation() -> TargetFn {
    TargetFn::Affine { alpha: ONE, beta: C64::new(4.0, 0.0) }
}

/// Conditions (b) to (e) at stage `k`: the annulus visit, the outward
/// excursion of the small disk and the univalence of every iterate used.
fn dynamics_checks(f: &Polynomial, u: &CompactSet, k: usize, opts: &ConstructionOptions) -> Certificate {
    let tol = &opts.tolerances;
    let nk = schedule(k);
    let mut cert = Certificate::new(k);
    let annulus = Target::Annulus(AnnulusSpec::level(k));
    cert.push(check_containment(f, u, nk, &annulus, tol).renamed(format!("(b) f^{nk}(U_{k}) in A_{k}")));
    if !cert.passed() {
        return cert;
    }
    let disk = match inner_disk(k) {
        Ok(d) => d,
        Err(e) => {
            cert.push(CheckResult::failed("(c) small disk", e.to_string()));
            return cert;
        }
    };
    for n in 1..=k {
        let target = Target::Disk { center: C64::new((4 * n) as f64, 0.0), radius: 1.0 };
        cert.push(check_containment(f, &disk, n, &target, tol).renamed(format!("(c) f^{n}(D_{k}) in D({},1)", 4 * n)));
        cert.push(check_univalence(f, &disk, n, tol).renamed(format!("(d) f^{n} univalent on D_{k}")));
        if !cert.passed() {
            return cert;
        }
    }
    for n in 1..=nk + k {
        cert.push(check_univalence(f, u, n, tol).renamed(format!("(e) f^{n} univalent on U_{k}")));
        if !cert.passed() {
            return cert;
        }
    }
    cert
}

fn certify(state: &OscillatingState, accepted: &Accepted, prev: Option<&Polynomial>) -> Certificate {
    let k = state.k;
    let f = &state.f;
    let tol = &state.options.tolerances;
    let mut cert = Certificate::new(k);
    let worst = accepted.fit.per_piece_margin.iter().copied().fold(0.0, f64::max);
    cert.push(CheckResult::from_margin(
        "fit",
        accepted.epsilon - worst,
        format!("worst piece margin {worst:.3e} against ε = {:.3e}", accepted.epsilon),
    ));
    if let Some(prev) = prev {
        let r = (4 * (k - 1) - 2) as f64;
        let bound = 0.5f64.powi(k as i32 - 1);
        cert.push(check_cauchy(f, prev, r, bound, 4096).renamed(format!("(a) |f_{k} - f_{}| on D(0,{r})", k - 1)));
    }
    cert.checks.extend(dynamics_checks(f, &state.towers[k], k, &state.options).checks);
    let upto = (k + 1).min(state.orbits.len());
    cert.push(check_orbits(f, &state.orbits[..upto], tol).renamed("(f) orbit table"));
    let sched: Vec<usize> = (1..=k).map(schedule).collect();
    cert.push(check_preimages(f, &state.xs[..k], &sched, ONE, tol).renamed("(g) f^N_n(x_n) = 1"));
    cert.push(check_fixed_point(f, ONE, HALF, tol).renamed("(h) fixed point 1"));
    cert
}

fn finish_stage(state: &mut OscillatingState, accepted: Accepted, prev: Option<&Polynomial>) -> Result<(), ConstructionError> {
    let cert = certify(state, &accepted, prev);
    state.stages.push(StageRecord {
        stage: state.k,
        epsilon: accepted.epsilon,
        halvings: accepted.halvings,
        degree: accepted.fit.degree_used,
        fit_margins: accepted.fit.per_piece_margin.clone(),
        constraint_residual: accepted.fit.constraint_residual,
        poly: state.f.clone(),
        certificate: cert.clone(),
    });
    match cert.first_failure() {
        Some(bad) => Err(ConstructionError::Failed { stage: state.k, check: bad.name.clone(), details: bad.details.clone() }),
        None => Ok(()),
    }
}

fn record(f: &Polynomial, x: C64, n: usize, stage: usize) -> Result<OrbitTable, ConstructionError> {
    // Points x_n^j for j < N_n.
    let t = orbit_at_stage(f, x, schedule(n) - 1, stage);
    if t.overflowed {
        return Err(ConstructionError::Failed { stage, check: "orbit record".into(), details: format!("orbit of {x} overflowed") });
    }
    Ok(t)
}

pub fn init_oscillating(region: &JordanRegion, opts: &ConstructionOptions) -> Result<OscillatingState, ConstructionError> {
    if opts.sequence_length < 2 {
        return Err(ConstructionError::InvalidInput("oscillating needs at least x_1 and x_2".into()));
    }
    let setup = prepare(region, Mode::Oscillating, opts)?;
    let u1 = setup.towers[1].clone();
    let x1 = setup.xs[0];
    // Both pieces are fitted on slightly larger sets than the ones the
    // certificate speaks about, so the error is small in C^1 on the latter.
    let sched = &opts.schedule;
    let reach = sched.radius(1) + 0.5 * u1.distance(x1);
    let k4 = dilate(&setup.omega, reach, sched.cell(1, setup.h))?;
    let gap = k4.distance(C64::new(0.0, 0.0)) - 1.0 / 3.0;
    let k3 = disk_piece(C64::new(0.0, 0.0), 1.0 / 3.0 + gap / 16.0)?;
    let a1 = AnnulusSpec::level(1);
    let h4 = linear_into_annulus(hull_of(k4.boundary()), &a1);
    let build = |eps: f64| ApproxProblem {
        pieces: vec![
            ApproxPiece { set: k3.clone(), target: translation() },
            ApproxPiece { set: k4.clone(), target: TargetFn::Affine { alpha: h4.alpha, beta: h4.beta } },
        ],
        constraints: vec![HermiteConstraint::hermite(ONE, ONE, HALF), HermiteConstraint::value(x1, ONE)],
        epsilon: eps,
        base: None,
    };
    let accepted = fit_with_halving(1, opts.eps_cap(1), opts, build, |p| dynamics_checks(p, &u1, 1, opts))?;
    let f = accepted.fit.poly.clone();
    let orbits = vec![record(&f, x1, 1, 1)?, record(&f, setup.xs[1], 2, 1)?];
    let mut state = OscillatingState {
        k: 1,
        f,
        omega: setup.omega,
        map: setup.map,
        towers: setup.towers,
        xs: setup.xs,
        orbits,
        eps_history: vec![accepted.epsilon],
        schedule: vec![1],
        annuli: vec![a1],
        stages: Vec::new(),
        options: opts.clone(),
    };
    finish_stage(&mut state, accepted, None)?;
    Ok(state)
}

pub fn step_oscillating(state: &OscillatingState) -> Result<OscillatingState, ConstructionError> {
    let k = state.k;
    let stage = k + 1;
    if stage >= state.towers.len() || stage > state.xs.len() {
        return Err(ConstructionError::InvalidInput(format!("stage {stage} needs U_{stage} and x_{stage}")));
    }
    let nk = schedule(k);
    assert_eq!(schedule(stage), nk + k + 1);
    let opts = &state.options;
    let f = &state.f;
    let k1 = disk_piece(C64::new(0.0, 0.0), (4 * k - 2) as f64)?;
    let pin = state.orbits[k].iterates[nk + k];
    let u_next = &state.towers[stage];

    // Image of ∂U_{k+1} that K_4 must cover; K_3 keeps clear of it.
    let k4_image: Vec<C64> = u_next
        .samples(1024)
        .par_iter()
        .map(|&z| iterate(f, z, nk + k))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| ConstructionError::Failed {
            stage,
            check: "cover".into(),
            details: "orbit of ∂U overflowed".into(),
        })?;
    let mut avoid3 = k4_image.clone();
    avoid3.push(pin);
    let small = inner_disk(stage)?;
    let k3 = cover_image(f, &small, k, &[&k1], &avoid3, stage)?;
    let k4 = cover_image(f, u_next, nk + k, &[&k1, &k3], &[pin], stage)?;
    let annulus = AnnulusSpec::level(stage);
    let h4 = linear_into_annulus(hull_of(&k4_image), &annulus);

    let mut constraints = vec![HermiteConstraint::hermite(ONE, ONE, HALF)];
    for (idx, table) in state.orbits.iter().take(stage).enumerate() {
        let n = idx + 1;
        let count = if n <= k { schedule(n) } else { nk + k };
        for j in 0..count {
            let value = if j + 1 < table.iterates.len() { table.iterates[j + 1] } else { ONE };
            let value = if n <= k && j + 1 == schedule(n) { ONE } else { value };
            constraints.push(HermiteConstraint::value(table.iterates[j], value));
        }
    }
    constraints.push(HermiteConstraint::value(pin, ONE));

    let build = |eps: f64| ApproxProblem {
        pieces: vec![
            ApproxPiece { set: k1.clone(), target: TargetFn::Polynomial(f.clone()) },
            ApproxPiece { set: k3.clone(), target: translation() },
            ApproxPiece { set: k4.clone(), target: TargetFn::Affine { alpha: h4.alpha, beta: h4.beta } },
        ],
        constraints: constraints.clone(),
        epsilon: eps,
        base: Some(f.clone()),
    };
    let accepted =
        fit_with_halving(stage, opts.eps_cap(stage), opts, build, |p| dynamics_checks(p, u_next, stage, opts))?;

    let mut next = state.clone();
    next.k = stage;
    next.f = accepted.fit.poly.clone();
    next.eps_history.push(accepted.epsilon);
    next.schedule.push(schedule(stage));
    next.annuli.push(annulus);
    if stage < next.xs.len() {
        let x = next.xs[stage];
        next.orbits.push(record(&next.f, x, stage + 1, stage)?);
    }
    finish_stage(&mut next, accepted, Some(&state.f))?;
    Ok(next)
}

/// One row of the oscillation trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub inward_iterate: usize,
    /// `min |f^{N_n}|` over boundary samples.
    pub min_radius: f64,
    pub max_radius: f64,
    pub outward_iterate: usize,
    /// Mean of `f^{N_n + n}` over boundary samples.
    pub outward_center: C64,
    /// `max |f^{N_n + n} - 4n|`.
    pub outward_deviation: f64,
}

pub fn oscillation_trace(f: &Polynomial, omega: &CompactSet, k: usize, samples: usize) -> Vec<TraceRow> {
    let zs = omega.samples(samples);
    (1..=k)
        .map(|n| {
            let nn = schedule(n);
            let inward: Vec<f64> =
                zs.par_iter().map(|&z| iterate(f, z, nn).map_or(f64::INFINITY, |w| w.norm())).collect();
            let outward: Vec<C64> = zs
                .par_iter()
                .map(|&z| iterate(f, z, nn + n).unwrap_or(C64::new(f64::INFINITY, 0.0)))
                .collect();
            let center = outward.iter().sum::<C64>() / outward.len() as f64;
            let target = C64::new((4 * n) as f64, 0.0);
            TraceRow {
                n,
                inward_iterate: nn,
                min_radius: inward.iter().copied().fold(f64::INFINITY, f64::min),
                max_radius: inward.iter().copied().fold(0.0, f64::max),
                outward_iterate: nn + n,
                outward_center: center,
                outward_deviation: outward.iter().map(|w| (w - target).norm()).fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Stage-`k` and summary checks recomputed for a stored `f_k`.
pub fn reverify(
    f: &Polynomial,
    region: &JordanRegion,
    k: usize,
    opts: &ConstructionOptions,
    prev: Option<&Polynomial>,
) -> Result<Certificate, ConstructionError> {
    if k < 1 {
        return Err(ConstructionError::InvalidInput("K must be at least 1".into()));
    }
    let mut opts = opts.clone();
    opts.sequence_length = opts.sequence_length.max(k + 1);
    let setup = prepare(region, Mode::Oscillating, &opts)?;
    let tol = opts.tolerances;
    let mut cert = Certificate::new(k);
    if let (Some(prev), true) = (prev, k > 1) {
        let r = (4 * (k - 1) - 2) as f64;
        cert.push(check_cauchy(f, prev, r, 0.5f64.powi(k as i32 - 1), 4096).renamed(format!("(a) |f_{k} - f_{}| on D(0,{r})", k - 1)));
    }
    cert.checks.extend(dynamics_checks(f, &setup.towers[k], k, &opts).checks);
    let sched: Vec<usize> = (1..=k).map(schedule).collect();
    cert.push(check_preimages(f, &setup.xs[..k], &sched, ONE, &tol).renamed("(g) f^N_n(x_n) = 1"));
    cert.push(check_fixed_point(f, ONE, HALF, &tol).renamed("(h) fixed point 1"));
    let state = OscillatingState {
        k,
        f: f.clone(),
        omega: setup.omega,
        map: setup.map,
        towers: setup.towers,
        xs: setup.xs,
        orbits: Vec::new(),
        eps_history: Vec::new(),
        schedule: sched,
        annuli: (1..=k).map(AnnulusSpec::level).collect(),
        stages: Vec::new(),
        options: opts,
    };
    cert.checks.extend(summary_checks(&state).checks);
    Ok(cert)
}

pub fn summary_checks(state: &OscillatingState) -> Certificate {
    let f = &state.f;
    let tol = &state.options.tolerances;
    let k = state.k;
    let mut cert = Certificate::new(k);
    for n in 1..=k {
        let nn = schedule(n);
        let a = Target::Annulus(AnnulusSpec::level(n));
        cert.push(check_containment(f, &state.omega, nn, &a, tol).renamed(format!("(1) f^{nn}(Ω) in A_{n}")));
        let d = Target::Disk { center: C64::new((4 * n) as f64, 0.0), radius: 1.0 };
        cert.push(check_containment(f, &state.omega, nn + n, &d, tol).renamed(format!("(2) f^{}(Ω) in D({},1)", nn + n, 4 * n)));
    }
    for n in 1..=schedule(k) + k {
        cert.push(check_univalence(f, &state.omega, n, tol).renamed(format!("(4) f^{n} univalent on Ω")));
    }
    let sched: Vec<usize> = (1..=k).map(schedule).collect();
    cert.push(check_preimages(f, &state.xs[..k], &sched, ONE, tol).renamed("(5) f^N_n(x_n) = 1"));
    cert.push(check_fixed_point(f, ONE, HALF, tol).renamed("(6) fixed point 1"));
    let delta = state.omega.perimeter() / state.xs.len() as f64;
    cert.push(check_accumulation(&state.xs, &state.omega, delta));
    cert
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillatingOutcome {
    pub stages: Vec<StageRecord>,
    pub eps_history: Vec<f64>,
    pub summary: Option<Certificate>,
    pub trace: Vec<TraceRow>,
    pub error: Option<String>,
    pub error_kind: Option<String>,
    pub xs: Vec<C64>,
    pub map: Option<AffineMap>,
}

pub fn run_oscillating_outcome(
    region: &JordanRegion,
    k_max: usize,
    opts: &ConstructionOptions,
) -> (Option<OscillatingState>, OscillatingOutcome) {
    let mut outcome = OscillatingOutcome {
        stages: Vec::new(),
        eps_history: Vec::new(),
        summary: None,
        trace: Vec::new(),
        error: None,
        error_kind: None,
        xs: Vec::new(),
        map: None,
    };
    if k_max < 1 {
        outcome.error_kind = Some("InvalidInput".into());
        outcome.error = Some("K must be at least 1".into());
        return (None, outcome);
    }
    let mut opts = opts.clone();
    opts.sequence_length = opts.sequence_length.max(k_max + 1);
    let mut state = match init_oscillating(region, &opts) {
        Ok(s) => s,
        Err(e) => {
            outcome.error_kind = Some(e.kind().into());
            outcome.error = Some(e.to_string());
            return (None, outcome);
        }
    };
    while state.k < k_max {
        match step_oscillating(&state) {
            Ok(next) => state = next,
            Err(e) => {
                outcome.error_kind = Some(e.kind().into());
                outcome.error = Some(e.to_string());
                break;
            }
        }
    }
    outcome.stages = state.stages.clone();
    outcome.eps_history = state.eps_history.clone();
    outcome.xs = state.xs.clone();
    outcome.map = Some(state.map);
    outcome.trace = oscillation_trace(&state.f, &state.omega, state.k, state.options.tolerances.containment_samples);
    if outcome.error.is_none() {
        outcome.summary = Some(summary_checks(&state));
    }
    (Some(state), outcome)
}

pub fn run_oscillating(
    region: &JordanRegion,
    k_max: usize,
    opts: &ConstructionOptions,
) -> Result<(Polynomial, OscillatingOutcome), ConstructionError> {
    let (state, outcome) = run_oscillating_outcome(region, k_max, opts);
    match (&outcome.error, state) {
        (None, Some(s)) => Ok((s.f.clone(), outcome)),
        (Some(msg), _) => Err(ConstructionError::Failed {
            stage: outcome.stages.len() + 1,
            check: outcome.error_kind.clone().unwrap_or_default(),
            details: msg.clone(),
        }),
        (None, None) => unreachable!("a run without a state always records an error"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle;

    #[test]
    fn schedule_identity() {
        for k in 1..20 {
            assert_eq!(schedule(k + 1), schedule(k) + k + 1);
        }
        assert_eq!((1..=3).map(schedule).collect::<Vec<_>>(), vec![1, 3, 6]);
    }

    #[test]
    fn unit_disk_into_first_annulus() {
        let a1 = AnnulusSpec::level(1);
        let h = linear_into_annulus((C64::new(0.0, 0.0), 1.0), &a1);
        assert!((h.alpha.re - (1.0 / 3.0 - 0.2) / 4.0).abs() < 1e-15);
        for z in circle(C64::new(0.0, 0.0), 1.0, 256) {
            assert!(a1.contains(h.apply(z)));
        }
    }

    #[test]
    fn point_hull_maps_to_midpoint() {
        let a = AnnulusSpec::level(2);
        let c = C64::new(3.0, -1.0);
        let w = linear_into_annulus((c, 0.0), &a).apply(c);
        assert!((w - C64::new(0.5 * (0.2 + 1.0 / 7.0), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_hulls_land_in_third_annulus() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a3 = AnnulusSpec::level(3);
        for _ in 0..100 {
            let c = C64::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let r = rng.random_range(1e-3..10.0);
            let h = linear_into_annulus((c, r), &a3);
            assert!(circle(c, r, 256).into_iter().all(|z| a3.contains(h.apply(z))));
        }
    }

    #[test]
    fn annuli_nest() {
        for k in 1..30 {
            let (a, b) = (AnnulusSpec::level(k), AnnulusSpec::level(k + 1));
            assert!(b.outer <= a.inner && b.inner < b.outer);
        }
    }
}
