//! Stage-by-stage construction of a map for which Ω is an escaping wandering
//! domain.
//!
//! Stage `k` produces `f_k` with
//!
//! * `|f_{k+1} - f_k| ≤ 2^{-k}` on `Δ̄(0, 4k+1)`,
//! * `f_k^n(U_k) ⊂ Δ(4n+3, 1)` and `f_k^n` univalent on `U_k` for `n ≤ k`,
//! * `f_k^n(x_n) = 0` for `n ≤ k`, with the intermediate orbit points kept,
//! * `f_k(0) = 0` and `f_k'(0) = 1/2`.
//!
//! Each step fits `f_k` on a large disk, pins the next orbit point to the
//! origin and makes the map a translation by 4 near the image of `U_{k+1}`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{ApproxPiece, ApproxProblem, HermiteConstraint, TargetFn};
use crate::construction::{
    cover_image, disk_piece, fit_with_halving, prepare, ConstructionError, ConstructionOptions, StageRecord,
};
use crate::geometry::{AffineMap, CompactSet, JordanRegion, Mode};
use crate::polynomials::{iterate, orbit_at_stage, OrbitTable, Polynomial};
use crate::verification::{
    check_accumulation, check_cauchy, check_containment, check_fixed_point, check_orbits, check_preimages,
    check_univalence, CheckResult, Certificate, Target,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const HALF: C64 = C64::new(0.5, 0.0);

#[derive(Debug, Clone)]
pub struct EscapingState {
    pub k: usize,
    /// `f_k`.
    pub f: Polynomial,
    pub omega: CompactSet,
    /// Normalizing map from input coordinates.
    pub map: AffineMap,
    /// `U_0 … U_N`.
    pub towers: Vec<CompactSet>,
    /// `x_1 … x_N`.
    pub xs: Vec<C64>,
    /// `orbits[n-1]` holds `x_n = x_n^0, x_n^1, …` as recorded so far.
    pub orbits: Vec<OrbitTable>,
    pub eps_history: Vec<f64>,
    /// `½ dist(centroid, ∂Ω)`.
    pub budget: f64,
    pub stages: Vec<StageRecord>,
    pub options: ConstructionOptions,
}

fn translation_target() -> TargetFn {
    TargetFn::Affine { alpha: C64::new(1.0, 0.0), beta: C64::new(4.0, 0.0) }
}

/// Disk `Δ(4n+3, 1)` shrunk by the required slack.
fn escape_disk(n: usize, slack: f64) -> Target {
    Target::Disk { center: C64::new((4 * n + 3) as f64, 0.0), radius: 1.0 - slack }
}

/// Containment and univalence of `f^n` on `u` for `n ≤ k`: the conditions
/// the ε loop must certify.
fn dynamics_checks(f: &Polynomial, u: &CompactSet, k: usize, opts: &ConstructionOptions) -> Certificate {
    let tol = &opts.tolerances;
    let mut cert = Certificate::new(k);
    for n in 1..=k {
        let c = check_containment(f, u, n, &escape_disk(n, tol.containment_slack), tol);
        cert.push(c.renamed(format!("(b) f^{n}(U_{k}) in D({},1)", 4 * n + 3)));
        if !cert.passed() {
            return cert;
        }
    }
    for n in 1..=k {
        cert.push(check_univalence(f, u, n, tol).renamed(format!("(c) f^{n} univalent on U_{k}")));
    }
    cert
}

fn fit_check(margins: &[f64], eps: f64) -> CheckResult {
    let worst = margins.iter().copied().fold(0.0, f64::max);
    CheckResult::from_margin("fit", eps - worst, format!("worst piece margin {worst:.3e} against ε = {eps:.3e}"))
}

/// Full certificate of stage `k`.
fn certify(state: &EscapingState, fit_margins: &[f64], eps: f64, prev: Option<&Polynomial>) -> Certificate {
    let k = state.k;
    let f = &state.f;
    let tol = &state.options.tolerances;
    let mut cert = Certificate::new(k);
    cert.push(fit_check(fit_margins, eps));
    cert.push(CheckResult::from_margin(
        "eps cap",
        if eps <= 0.5f64.powi(k as i32) { f64::MIN_POSITIVE.max(0.5f64.powi(k as i32) - eps) } else { -eps },
        format!("ε_{k} = {eps:.3e} against 2^-{k}"),
    ));
    if let Some(prev) = prev {
        let r = (4 * (k - 1) + 1) as f64;
        cert.push(check_cauchy(f, prev, r, 0.5f64.powi(k as i32 - 1), 4096).renamed(format!("(a) |f_{k} - f_{}| on D(0,{r})", k - 1)));
    }
    cert.checks.extend(dynamics_checks(f, &state.towers[k], k, &state.options).checks);
    let upto = (k + 1).min(state.orbits.len());
    cert.push(check_orbits(f, &state.orbits[..upto], tol).renamed("(d) orbit table"));
    let n = k.min(state.xs.len());
    let schedule: Vec<usize> = (1..=n).collect();
    cert.push(check_preimages(f, &state.xs[..n], &schedule, ZERO, tol).renamed("(e) f^n(x_n) = 0"));
    cert.push(check_fixed_point(f, ZERO, HALF, tol).renamed("(f) fixed point 0"));
    cert
}

/// Records `x_n^j = f^j(x_n)` for `j ≤ upto`.
fn record_orbit(f: &Polynomial, x: C64, upto: usize, stage: usize) -> Result<OrbitTable, ConstructionError> {
    let t = orbit_at_stage(f, x, upto, stage);
    if t.overflowed {
        return Err(ConstructionError::Failed {
            stage,
            check: "orbit record".into(),
            details: format!("orbit of {x} overflowed"),
        });
    }
    Ok(t)
}

/// Builds `f_1`.
pub fn init_escaping(region: &JordanRegion, opts: &ConstructionOptions) -> Result<EscapingState, ConstructionError> {
    if opts.sequence_length < 2 {
        return Err(ConstructionError::InvalidInput("escaping needs at least x_1 and x_2".into()));
    }
    let setup = prepare(region, Mode::Escaping, opts)?;
    let k1 = disk_piece(ZERO, 1.0)?;
    let u1 = setup.towers[1].clone();
    let x1 = setup.xs[0];
    let build = |eps: f64| ApproxProblem {
        pieces: vec![
            ApproxPiece { set: k1.clone(), target: TargetFn::Affine { alpha: HALF, beta: ZERO } },
            ApproxPiece { set: u1.clone(), target: translation_target() },
        ],
        constraints: vec![HermiteConstraint::hermite(ZERO, ZERO, HALF), HermiteConstraint::value(x1, ZERO)],
        epsilon: eps,
        base: None,
    };
    let eps0 = opts.eps_cap(1);
    let accepted = fit_with_halving(1, eps0, opts, build, |p| dynamics_checks(p, &u1, 1, opts))?;
    let f = accepted.fit.poly.clone();
    let budget = 0.5 * setup.omega.boundary_distance(setup.omega.centroid());
    let mut orbits = vec![OrbitTable { base: x1, iterates: vec![x1], map_stage: 1, overflowed: false }];
    orbits.push(record_orbit(&f, setup.xs[1], 1, 1)?);
    let mut state = EscapingState {
        k: 1,
        f,
        omega: setup.omega,
        map: setup.map,
        towers: setup.towers,
        xs: setup.xs,
        orbits,
        eps_history: vec![accepted.epsilon],
        budget,
        stages: Vec::new(),
        options: opts.clone(),
    };
    finish_stage(&mut state, accepted, None)?;
    Ok(state)
}

fn finish_stage(
    state: &mut EscapingState,
    accepted: crate::construction::Accepted,
    prev: Option<&Polynomial>,
) -> Result<(), ConstructionError> {
    let cert = certify(state, &accepted.fit.per_piece_margin, accepted.epsilon, prev);
    let record = StageRecord {
        stage: state.k,
        epsilon: accepted.epsilon,
        halvings: accepted.halvings,
        degree: accepted.fit.degree_used,
        fit_margins: accepted.fit.per_piece_margin.clone(),
        constraint_residual: accepted.fit.constraint_residual,
        poly: state.f.clone(),
        certificate: cert.clone(),
    };
    state.stages.push(record);
    if let Some(bad) = cert.first_failure() {
        return Err(ConstructionError::Failed { stage: state.k, check: bad.name.clone(), details: bad.details.clone() });
    }
    Ok(())
}

/// Builds `f_{k+1}` from `f_k`.
pub fn step_escaping(state: &EscapingState) -> Result<EscapingState, ConstructionError> {
    let k = state.k;
    let stage = k + 1;
    if stage >= state.towers.len() || stage > state.xs.len() {
        return Err(ConstructionError::InvalidInput(format!(
            "stage {stage} needs U_{stage} and x_{stage}; only {} sequence points were prepared",
            state.xs.len()
        )));
    }
    let opts = &state.options;
    let f = &state.f;
    let k1 = disk_piece(ZERO, (4 * k + 1) as f64)?;
    let pin = *state.orbits[k].iterates.last().expect("x_{k+1}^k recorded");
    let u_next = &state.towers[stage];
    let k3 = cover_image(f, u_next, k, &[&k1], &[pin], stage)?;

    let mut constraints = vec![HermiteConstraint::hermite(ZERO, ZERO, HALF)];
    for (idx, table) in state.orbits.iter().take(k + 1).enumerate() {
        let n = idx + 1;
        let last = if n <= k { n } else { k };
        for j in 0..last {
            let point = table.iterates[j];
            // x_n lands on 0 at step n; x_{k+1} is pinned separately below.
            let value = if n <= k && j + 1 == n {
                ZERO
            } else {
                table.iterates[j + 1]
            };
            constraints.push(HermiteConstraint::value(point, value));
        }
    }
    constraints.push(HermiteConstraint::value(pin, ZERO));

    let build = |eps: f64| ApproxProblem {
        pieces: vec![
            ApproxPiece { set: k1.clone(), target: TargetFn::Polynomial(f.clone()) },
            ApproxPiece { set: k3.clone(), target: translation_target() },
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
    if stage < next.xs.len() {
        let x = next.xs[stage];
        next.orbits.push(record_orbit(&next.f, x, stage, stage)?);
    }
    finish_stage(&mut next, accepted, Some(&state.f))?;
    Ok(next)
}

/// Everything a finished (or aborted) run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EscapingOutcome {
    pub stages: Vec<StageRecord>,
    pub eps_history: Vec<f64>,
    pub summary: Option<Certificate>,
    pub stay_away: Option<StayAway>,
    pub error: Option<String>,
    pub error_kind: Option<String>,
    pub xs: Vec<C64>,
    pub map: Option<AffineMap>,
}

/// Runs stages `1 … k_max`, keeping whatever was built before a failure.
pub fn run_escaping_outcome(region: &JordanRegion, k_max: usize, opts: &ConstructionOptions) -> (Option<EscapingState>, EscapingOutcome) {
    let mut outcome = EscapingOutcome {
        stages: Vec::new(),
        eps_history: Vec::new(),
        summary: None,
        stay_away: None,
        error: None,
        error_kind: None,
        xs: Vec::new(),
        map: None,
    };
    let fail = |outcome: &mut EscapingOutcome, e: ConstructionError| {
        outcome.error_kind = Some(e.kind().to_string());
        outcome.error = Some(e.to_string());
    };
    if k_max < 1 {
        fail(&mut outcome, ConstructionError::InvalidInput("K must be at least 1".into()));
        return (None, outcome);
    }
    let mut opts = opts.clone();
    opts.sequence_length = opts.sequence_length.max(k_max + 1);
    let mut state = match init_escaping(region, &opts) {
        Ok(s) => s,
        Err(e) => {
            fail(&mut outcome, e);
            return (None, outcome);
        }
    };
    while state.k < k_max {
        match step_escaping(&state) {
            Ok(next) => state = next,
            Err(e) => {
                // A failed certificate still leaves a stage record behind.
                fail(&mut outcome, e);
                break;
            }
        }
    }
    outcome.stages = state.stages.clone();
    outcome.eps_history = state.eps_history.clone();
    outcome.xs = state.xs.clone();
    outcome.map = Some(state.map);
    if outcome.error.is_none() {
        outcome.summary = Some(summary_checks(&state));
        outcome.stay_away = Some(stay_away_budget(&state, state.omega.centroid()));
    }
    (Some(state), outcome)
}

/// Runs the construction to stage `k_max`.
pub fn run_escaping(
    region: &JordanRegion,
    k_max: usize,
    opts: &ConstructionOptions,
) -> Result<(Polynomial, EscapingOutcome), ConstructionError> {
    let (state, outcome) = run_escaping_outcome(region, k_max, opts);
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

/// Re-runs every check that needs only `f_k` (and `f_{k-1}` when given)
/// from freshly prepared geometry.  The fit margins and the orbit table are
/// construction-time quantities and are not repeated.
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
    let setup = prepare(region, Mode::Escaping, &opts)?;
    let tol = opts.tolerances;
    let mut cert = Certificate::new(k);
    if let (Some(prev), true) = (prev, k > 1) {
        let r = (4 * (k - 1) + 1) as f64;
        cert.push(check_cauchy(f, prev, r, 0.5f64.powi(k as i32 - 1), 4096).renamed(format!("(a) |f_{k} - f_{}| on D(0,{r})", k - 1)));
    }
    cert.checks.extend(dynamics_checks(f, &setup.towers[k], k, &opts).checks);
    let schedule: Vec<usize> = (1..=k).collect();
    cert.push(check_preimages(f, &setup.xs[..k], &schedule, ZERO, &tol).renamed("(e) f^n(x_n) = 0"));
    cert.push(check_fixed_point(f, ZERO, HALF, &tol).renamed("(f) fixed point 0"));
    let state = EscapingState {
        k,
        f: f.clone(),
        omega: setup.omega,
        map: setup.map,
        towers: setup.towers,
        xs: setup.xs,
        orbits: Vec::new(),
        eps_history: Vec::new(),
        budget: 0.0,
        stages: Vec::new(),
        options: opts,
    };
    cert.checks.extend(summary_checks(&state).checks);
    Ok(cert)
}

/// Final checks on Ω itself at the last stage.
pub fn summary_checks(state: &EscapingState) -> Certificate {
    let f = &state.f;
    let tol = &state.options.tolerances;
    let k = state.k;
    let mut cert = Certificate::new(k);
    for n in 1..=k {
        let c = check_containment(f, &state.omega, n, &escape_disk(n, 0.0), tol);
        cert.push(c.renamed(format!("(1) f^{n}(Ω) in D({},1)", 4 * n + 3)));
        cert.push(check_univalence(f, &state.omega, n, tol).renamed(format!("(2) f^{n} univalent on Ω")));
    }
    let schedule: Vec<usize> = (1..=k).collect();
    cert.push(check_preimages(f, &state.xs[..k], &schedule, ZERO, tol).renamed("(3) f^n(x_n) = 0"));
    cert.push(check_fixed_point(f, ZERO, HALF, tol).renamed("(4) fixed point 0"));
    let delta = state.omega.perimeter() / state.xs.len() as f64;
    cert.push(check_accumulation(&state.xs, &state.omega, delta));
    cert
}

/// Result of the stay-away test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StayAway {
    pub holds: bool,
    pub budget_ok: bool,
    /// `Σ_{n ≥ 0} Σ_{j > n} ε_j`, recorded ε followed by the caps.
    pub tail: f64,
    /// `dist(z_ref, ∂Ω)`.
    pub distance: f64,
    /// `dist(f^n(z_ref), f^n(∂Ω))` for `n = 0 … K`.
    pub orbit_distances: Vec<f64>,
}

/// `Σ_{n ≥ 0} Σ_{j > n} ε_j` with `ε_j` from the history and `c · 2^{-j}`
/// beyond it.
pub fn eps_double_tail(eps_history: &[f64], eps_scale: f64) -> f64 {
    let k = eps_history.len();
    let eps = |j: usize| if j <= k { eps_history[j - 1] } else { eps_scale * 0.5f64.powi(j as i32) };
    // For n ≥ k the inner sum is exactly c · 2^{-n}; summing over n gives 2c · 2^{-k}.
    let beyond = eps_scale * 0.5f64.powi(k as i32);
    let mut total = 2.0 * beyond;
    for n in 0..k {
        let inner: f64 = (n + 1..=k).map(eps).sum::<f64>() + beyond;
        total += inner;
    }
    total
}

/// Checks the stay-away budget for `z_ref` and, when it holds, that the
/// orbit of `z_ref` keeps its distance from the iterated boundary.
pub fn stay_away_budget(state: &EscapingState, z_ref: C64) -> StayAway {
    let distance = if state.omega.contains(z_ref) { state.omega.boundary_distance(z_ref) } else { 0.0 };
    let tail = eps_double_tail(&state.eps_history, state.options.eps_scale);
    let budget_ok = tail < 0.5 * distance;
    let samples = state.omega.samples(state.options.tolerances.containment_samples);
    let orbit_distances: Vec<f64> = (0..=state.k)
        .map(|n| {
            let Some(w) = iterate(&state.f, z_ref, n) else { return 0.0 };
            samples
                .par_iter()
                .map(|&z| iterate(&state.f, z, n).map_or(0.0, |v| (v - w).norm()))
                .reduce(|| f64::INFINITY, f64::min)
        })
        .collect();
    let holds = budget_ok && orbit_distances.iter().all(|&d| d > distance - 2.0 * tail && d > 0.0);
    StayAway { holds, budget_ok, tail, distance, orbit_distances }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_tail_of_pure_caps() {
        // With every ε_j = c 2^{-j}: Σ_n Σ_{j>n} c 2^{-j} = Σ_n c 2^{-n} = 2c.
        let c = 0.01;
        let hist: Vec<f64> = (1..=3).map(|j| c * 0.5f64.powi(j)).collect();
        assert!((eps_double_tail(&hist, c) - 2.0 * c).abs() < 1e-15);
        assert!((eps_double_tail(&[], c) - 2.0 * c).abs() < 1e-15);
    }

    #[test]
    fn larger_history_grows_tail() {
        let base = eps_double_tail(&[0.001, 0.0005], 0.002);
        let big = eps_double_tail(&[0.5, 0.0005], 0.002);
        assert!(big > base + 0.49);
    }
}
