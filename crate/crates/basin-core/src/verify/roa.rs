//! Certification orchestration: quadratic basin, level selection, and the
//! end-to-end report.
//!
//! The quadratic stage proves that a small sublevel set of `V_P = x^T P x`
//! is an attraction basin of the identified field even under the configured
//! identification error: outside a linearization ball the relaxed
//! derivative condition is checked by branch and bound; inside the ball the
//! argument is dominance of the linear part, established by (a) a strict
//! Gershgorin decrease rate `q0` of `P A + A^T P`, and (b) an interval
//! remainder bound on `f - A x` over the ball, in centered mean-value form
//! so the bound scales with the ball radius squared rather than the field
//! magnitude. Candidate levels `c1 < c2` are then maximized by bisection
//! under their respective checks, always returning the certified (lower)
//! bisection endpoint.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::bnb::{
    explore, BandCheck, CheckOutcome, InclusionCheck, LevelExceedsCheck, ScalarCertificate,
    Verdict,
};
use super::{
    bound_gradient_norm, bound_lipschitz, compute_alpha, grid_points, required_beta, select_beta,
    BoundsReport, FieldRef, VerifierConfig, VerifyError,
};
use crate::certificates::{solve_matrix_lyapunov, LyapunovCandidate, QuadraticLyapunov};
use crate::dynamics::OdeSystem;
use crate::fmath;
use crate::interval::{norm_sq_bound, Interval, IntervalBox};
use crate::koopman::VectorFieldModel;

/// Scalars backing the quadratic-basin argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadDiagnostics {
    /// Linearization-ball radius actually used (the configured value, or
    /// larger when the derivative margin demands it).
    pub rho_used: f64,
    /// Strict decrease rate of the linear part: `lambda_max(PA + A^T P)`
    /// is at most `-q0`.
    pub q0: f64,
    /// Gradient-norm bound of `V_P` over the certified sublevel set.
    pub nu_p: f64,
    /// Derivative margin used on the annulus.
    pub beta_p: f64,
    /// Interval bound on `||f(x) - A x||` over the linearization ball.
    pub remainder_bound: f64,
}

/// One named check with its outcome, as stored in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub outcome: CheckOutcome,
}

/// Result of the quadratic-basin stage.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCertification {
    /// Certified level: `{V_P <= c}` is an attraction basin of the
    /// identified field with the configured error margin.
    pub c: f64,
    pub diagnostics: QuadDiagnostics,
    pub checks: Vec<CheckReport>,
}

/// Aggregate exploration counters for a report.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportStats {
    pub boxes_explored: u64,
    pub max_depth: u32,
    /// Filled by callers that track time; zero from the core library.
    pub wall_time_ms: f64,
}

/// Everything the certification pipeline concludes.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    /// True only when every stored check certified and `c1 < c2`.
    pub certified: bool,
    /// True when no candidate level could be certified and the report
    /// falls back to the quadratic basin alone.
    pub degenerate: bool,
    /// Certified quadratic level (the set called the basin anchor).
    pub c_quad: f64,
    /// Inner candidate level: `{V <= c1}` is included in the anchor.
    pub c1: f64,
    /// Outer candidate level: the certified region of attraction estimate.
    pub c2: f64,
    pub bounds: BoundsReport,
    pub quad: QuadDiagnostics,
    pub checks: Vec<CheckReport>,
    pub stats: ReportStats,
}

fn lambda_min_lower(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    let mut lower = f64::INFINITY;
    for i in 0..n {
        let mut row = p[(i, i)];
        for j in 0..n {
            if j != i {
                row -= p[(i, j)].abs();
            }
        }
        lower = lower.min(row);
    }
    if lower > 0.0 {
        lower
    } else {
        // Gershgorin failed to see positivity; fall back to the smallest
        // singular value (equal to the smallest eigenvalue for symmetric
        // positive definite matrices), shaved for rounding.
        p.clone().svd(false, false).singular_values.min() * (1.0 - 1e-9)
    }
}

/// Smallest sampled value of a certificate over the faces of a box.
fn face_min(cert: &dyn ScalarCertificate, domain: &IntervalBox, per_axis: usize) -> f64 {
    let mut worst = f64::INFINITY;
    for face in domain.faces() {
        for x in grid_points(&face, per_axis) {
            worst = worst.min(cert.value(&x));
        }
    }
    worst
}

fn face_max(cert: &dyn ScalarCertificate, domain: &IntervalBox, per_axis: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for face in domain.faces() {
        for x in grid_points(&face, per_axis) {
            best = best.max(cert.value(&x));
        }
    }
    best
}

/// Certifies an attraction basin `{V_P <= c}` for the identified field.
///
/// `mismatch` is the identification-error budget `(K_f + K_fhat) delta +
/// alpha`; the annulus margin is `beta_p = mismatch * nu_p` with `nu_p` a
/// gradient bound over the sublevel set, so the certificate survives the
/// transfer to the true field. Pass zero for exact models. The returned
/// level is the largest certifiable one found by bisection, rounded down to
/// the certified endpoint.
pub fn certify_quadratic_roa(
    quad: &QuadraticLyapunov,
    field: &VectorFieldModel,
    mismatch: f64,
    domain: &IntervalBox,
    cfg: &VerifierConfig,
) -> Result<QuadCertification, VerifyError> {
    cfg.validate()?;
    let n = quad.p.nrows();
    if field.dim() != n || domain.dim() != n {
        return Err(VerifyError::Invalid(
            "quadratic form, field, and domain dimensions disagree",
        ));
    }
    if !field.corrected {
        return Err(VerifyError::Invalid(
            "field must be equilibrium-corrected before basin certification",
        ));
    }
    if mismatch < 0.0 {
        return Err(VerifyError::Invalid("mismatch budget must be non-negative"));
    }
    let zero = vec![0.0; n];
    let a_hat = field.jacobian_at(&zero);
    // Symmetric part S = P A + A^T P in outward-rounded interval arithmetic,
    // then a Gershgorin upper bound on its largest eigenvalue.
    let mut upper = f64::NEG_INFINITY;
    for i in 0..n {
        let mut row = Interval::point(0.0);
        for j in 0..n {
            let mut entry = Interval::point(0.0);
            for k in 0..n {
                entry = entry
                    + Interval::point(quad.p[(i, k)]) * Interval::point(a_hat[(k, j)])
                    + Interval::point(a_hat[(k, i)]) * Interval::point(quad.p[(k, j)]);
            }
            row = if j == i { row + entry } else { row + entry.abs() };
        }
        upper = upper.max(row.hi());
    }
    let q0 = -upper;
    if q0 <= 0.0 {
        return Err(VerifyError::CertificationImpossible(
            "the linearization does not decrease the quadratic form strictly",
        ));
    }
    let p_frob = quad.p.norm() * (1.0 + 1e-12);
    let lam_min = lambda_min_lower(&quad.p);
    let p_inv = quad
        .p
        .clone()
        .try_inverse()
        .ok_or(VerifyError::Invalid("quadratic form is singular"))?;
    let c_cap = face_min(quad, domain, 33);
    if !(c_cap > 0.0) {
        return Err(VerifyError::CertificationImpossible(
            "the domain boundary touches the zero level of the quadratic form",
        ));
    }

    let attempt = |c: f64| -> Option<(QuadDiagnostics, Vec<CheckReport>)> {
        let nu_p = 2.0 * p_frob * fmath::sqrt(c / lam_min);
        let beta_p = mismatch * nu_p;
        // The annulus condition needs q0 rho^2 >= beta_p with headroom for
        // the nonlinear remainder, hence the 1.25 factor.
        let rho_needed = fmath::sqrt(1.25 * beta_p / q0);
        let rho = cfg.rho.max(rho_needed);
        let ball = IntervalBox::from_bounds(&vec![(-rho, rho); n]).ok()?;
        // Bound sup ||f(x) - A x|| over the ball by a mean-value form on
        // each cell of a subdivision: for x in a cell S with midpoint m,
        // f(x) - A x lies in f(m) - A m + (Jf(S) - A)(S - m). The cell
        // count per axis shrinks with dimension to keep the total bounded.
        let parts = match n {
            1 => 64,
            2 => 16,
            3 => 8,
            _ => 4,
        };
        let mut remainder: f64 = 0.0;
        for cell in ball.subdivide(parts) {
            let mid = cell.midpoint();
            let fm = field.eval(&mid);
            let jac = field.interval_jacobian(&cell);
            let mut components = Vec::with_capacity(n);
            for j in 0..n {
                let mut base = fm[j];
                for k in 0..n {
                    base -= a_hat[(j, k)] * mid[k];
                }
                let mut acc = Interval::point(base);
                for k in 0..n {
                    let dev = cell.interval(k) - Interval::point(mid[k]);
                    acc = acc + (jac[j][k] - Interval::point(a_hat[(j, k)])) * dev;
                }
                components.push(acc);
            }
            remainder = remainder.max(fmath::sqrt(norm_sq_bound(&components).hi()));
        }
        if remainder > q0 * rho / (2.0 * p_frob) {
            return None;
        }
        // Explore only the bounding box of the ellipsoid, clipped to the
        // domain.
        let mut bounds = Vec::with_capacity(n);
        for i in 0..n {
            let half = fmath::sqrt((c * p_inv[(i, i)]).max(0.0)) * (1.0 + 1e-9);
            let iv = domain.interval(i);
            bounds.push(((-half).max(iv.lo()), half.min(iv.hi())));
        }
        let root = IntervalBox::from_bounds(&bounds).ok()?;
        let band = BandCheck {
            certificate: quad,
            field,
            band: (f64::NEG_INFINITY, c),
            beta: beta_p,
            min_radius: rho,
            label: "quad_band",
        };
        let band_out = explore(&band, core::slice::from_ref(&root), cfg);
        if !band_out.verdict.is_certified() {
            return None;
        }
        let cont = LevelExceedsCheck {
            certificate: quad,
            level: c,
            label: "quad_containment",
        };
        let cont_out = explore(&cont, &domain.faces(), cfg);
        if !cont_out.verdict.is_certified() {
            return None;
        }
        Some((
            QuadDiagnostics {
                rho_used: rho,
                q0,
                nu_p,
                beta_p,
                remainder_bound: remainder,
            },
            vec![
                CheckReport {
                    name: "quad_band",
                    outcome: band_out,
                },
                CheckReport {
                    name: "quad_containment",
                    outcome: cont_out,
                },
            ],
        ))
    };

    let mut hi = c_cap;
    let mut lo = 0.0;
    let mut accepted = None;
    for k in 1..=60 {
        let c = c_cap * fmath::powu(0.5, k);
        match attempt(c) {
            Some(data) => {
                lo = c;
                accepted = Some(data);
                break;
            }
            None => hi = c,
        }
    }
    if accepted.is_none() {
        return Err(VerifyError::CertificationImpossible(
            "no quadratic level certifies under the configured error budget",
        ));
    }
    while hi - lo > cfg.bisect_tol * hi {
        let mid = 0.5 * (lo + hi);
        match attempt(mid) {
            Some(data) => {
                lo = mid;
                accepted = Some(data);
            }
            None => hi = mid,
        }
    }
    let (diagnostics, checks) = accepted.expect("feasible level recorded");
    Ok(QuadCertification {
        c: lo,
        diagnostics,
        checks,
    })
}

/// Largest `c1` whose sublevel set provably sits inside the quadratic
/// basin, with the outcome backing it. `None` when no level certifies; the
/// returned reports then describe the failure.
pub fn select_c1(
    candidate: &dyn ScalarCertificate,
    quad: &QuadraticLyapunov,
    c_quad: f64,
    domain: &IntervalBox,
    cfg: &VerifierConfig,
) -> Result<(Option<f64>, Vec<CheckReport>), VerifyError> {
    cfg.validate()?;
    if !(c_quad > 0.0) {
        return Err(VerifyError::Invalid("quadratic level must be positive"));
    }
    let run = |c1: f64| {
        let check = InclusionCheck {
            candidate,
            c1,
            quad,
            c_quad,
        };
        explore(&check, core::slice::from_ref(domain), cfg)
    };
    let grid_hi = grid_points(domain, 65)
        .into_iter()
        .map(|x| candidate.value(&x))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(grid_hi > 0.0) {
        // A candidate that is nowhere positive has no meaningful sublevel
        // sets; record the failure at an arbitrary small level.
        let outcome = run(1e-6);
        return Ok((
            None,
            vec![CheckReport {
                name: "inclusion",
                outcome,
            }],
        ));
    }
    let mut hi = grid_hi;
    let mut lo = 0.0;
    let mut accepted = None;
    let mut failing: Option<CheckOutcome> = None;
    for k in 1..=60 {
        let c1 = grid_hi * fmath::powu(0.5, k);
        let outcome = run(c1);
        if outcome.verdict.is_certified() {
            lo = c1;
            accepted = Some(outcome);
            break;
        }
        hi = c1;
        // Keep the most informative failure: a concrete counterexample
        // beats a probe that merely hit the resolution floor.
        let keep = failing
            .as_ref()
            .map_or(true, |f| !matches!(f.verdict, Verdict::Counterexample { .. }));
        if keep {
            failing = Some(outcome);
        }
    }
    let Some(mut best) = accepted else {
        let outcome = failing.expect("sixty failing probes recorded");
        return Ok((
            None,
            vec![CheckReport {
                name: "inclusion",
                outcome,
            }],
        ));
    };
    while hi - lo > cfg.bisect_tol * hi {
        let mid = 0.5 * (lo + hi);
        let outcome = run(mid);
        if outcome.verdict.is_certified() {
            lo = mid;
            best = outcome;
        } else {
            hi = mid;
        }
    }
    Ok((
        Some(lo),
        vec![CheckReport {
            name: "inclusion",
            outcome: best,
        }],
    ))
}

/// Largest `c2 > c1` such that both the derivative band on `{c1 <= V <= c2}`
/// and containment of `{V <= c2}` in the domain interior certify. `None`
/// when no level certifies (degenerate certification: only the quadratic
/// basin stands); the reports then describe the failing attempt.
pub fn maximize_c2(
    candidate: &dyn ScalarCertificate,
    field: &VectorFieldModel,
    c1: f64,
    beta: f64,
    domain: &IntervalBox,
    cfg: &VerifierConfig,
) -> Result<(Option<f64>, Vec<CheckReport>), VerifyError> {
    cfg.validate()?;
    if !(c1 > 0.0) || !(beta > 0.0) {
        return Err(VerifyError::Invalid(
            "band levels and margin must be positive",
        ));
    }
    let faces = domain.faces();
    let attempt = |c2: f64| -> (bool, Vec<CheckReport>) {
        let band = BandCheck {
            certificate: candidate,
            field,
            band: (c1, c2),
            beta,
            min_radius: 0.0,
            label: "band",
        };
        let band_out = explore(&band, core::slice::from_ref(domain), cfg);
        if !band_out.verdict.is_certified() {
            return (
                false,
                vec![CheckReport {
                    name: "band",
                    outcome: band_out,
                }],
            );
        }
        let cont = LevelExceedsCheck {
            certificate: candidate,
            level: c2,
            label: "containment",
        };
        let cont_out = explore(&cont, &faces, cfg);
        let ok = cont_out.verdict.is_certified();
        (
            ok,
            vec![
                CheckReport {
                    name: "band",
                    outcome: band_out,
                },
                CheckReport {
                    name: "containment",
                    outcome: cont_out,
                },
            ],
        )
    };
    let cap = face_max(candidate, domain, 33);
    if !(cap > c1) {
        let (_, reports) = attempt(c1 * 1.01);
        return Ok((None, reports));
    }
    let mut hi = cap;
    let mut lo = 0.0;
    let mut accepted = None;
    let mut failing: Option<Vec<CheckReport>> = None;
    for k in 1..=50 {
        let c2 = c1 + (cap - c1) * fmath::powu(0.5, k);
        let (ok, reports) = attempt(c2);
        if ok {
            lo = c2;
            accepted = Some(reports);
            break;
        }
        hi = c2;
        let keep = failing.as_ref().map_or(true, |f| {
            !f.iter()
                .any(|r| matches!(r.outcome.verdict, Verdict::Counterexample { .. }))
        });
        if keep {
            failing = Some(reports);
        }
    }
    let Some(mut best) = accepted else {
        return Ok((None, failing.expect("fifty failing probes recorded")));
    };
    while hi - lo > cfg.bisect_tol * hi {
        let mid = 0.5 * (lo + hi);
        let (ok, reports) = attempt(mid);
        if ok {
            lo = mid;
            best = reports;
        } else {
            hi = mid;
        }
    }
    Ok((Some(lo), best))
}

fn aggregate_stats(checks: &[CheckReport]) -> ReportStats {
    let mut stats = ReportStats::default();
    for check in checks {
        stats.boxes_explored += check.outcome.stats.boxes_explored;
        stats.max_depth = stats.max_depth.max(check.outcome.stats.max_depth);
    }
    stats
}

/// End-to-end certification under the error-transfer argument.
///
/// Computes the quadratic basin, the rigorous constants, the derivative
/// margin, and the certified levels `c1 < c2`. A structurally impossible
/// certification (non-Hurwitz linearization, no quadratic level) is an
/// error; a failed candidate-level search returns a non-certified report
/// whose checks carry the counterexample or unknown verdicts.
#[allow(clippy::too_many_arguments)]
pub fn certify_roa(
    candidate: &LyapunovCandidate,
    field: &VectorFieldModel,
    oracle: &dyn OdeSystem,
    samples: &[DVector<f64>],
    delta: f64,
    q: &DMatrix<f64>,
    domain: &IntervalBox,
    cfg: &VerifierConfig,
) -> Result<CertificationReport, VerifyError> {
    cfg.validate()?;
    if delta < 0.0 {
        return Err(VerifyError::Invalid("covering radius must be non-negative"));
    }
    let n = field.dim();
    let zero = vec![0.0; n];
    let a_hat = field.jacobian_at(&zero);
    let quad = solve_matrix_lyapunov(&a_hat, q.clone())?;
    let k_f = bound_lipschitz(&FieldRef::Oracle(oracle), domain)?;
    let k_fhat = bound_lipschitz(&FieldRef::Model(field), domain)?;
    let nu = bound_gradient_norm(candidate, domain);
    let alpha = compute_alpha(field, samples, oracle)?;
    let beta_required = required_beta(k_f, k_fhat, delta, alpha, nu);
    let beta_used = select_beta(beta_required);
    let bounds = BoundsReport {
        k_f,
        k_fhat,
        nu,
        alpha,
        delta,
        beta_required,
        beta_used,
    };
    let mismatch = (k_f + k_fhat) * delta + alpha;
    let quad_cert = certify_quadratic_roa(&quad, field, mismatch, domain, cfg)?;
    let mut checks = quad_cert.checks.clone();

    let degenerate_report = |mut checks: Vec<CheckReport>, extra: Vec<CheckReport>| {
        checks.extend(extra);
        let stats = aggregate_stats(&checks);
        CertificationReport {
            certified: false,
            degenerate: true,
            c_quad: quad_cert.c,
            c1: 0.0,
            c2: 0.0,
            bounds,
            quad: quad_cert.diagnostics,
            checks,
            stats,
        }
    };

    let (c1_opt, c1_checks) = select_c1(candidate, &quad, quad_cert.c, domain, cfg)?;
    let Some(c1) = c1_opt else {
        return Ok(degenerate_report(checks, c1_checks));
    };
    checks.extend(c1_checks);
    let (c2_opt, c2_checks) = maximize_c2(candidate, field, c1, beta_used, domain, cfg)?;
    let Some(c2) = c2_opt else {
        return Ok(degenerate_report(checks, c2_checks));
    };
    checks.extend(c2_checks);
    let certified = c1 < c2 && checks.iter().all(|c| c.outcome.verdict.is_certified());
    let stats = aggregate_stats(&checks);
    Ok(CertificationReport {
        certified,
        degenerate: false,
        c_quad: quad_cert.c,
        c1,
        c2,
        bounds,
        quad: quad_cert.diagnostics,
        checks,
        stats,
    })
}
