//! Acceptance gate. Each test covers one shipped criterion and prints a
//! single `ACCEPTANCE <n>: PASS/FAIL` line with the measured quantities
//! (visible under `--nocapture`).

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use basin::config::PipelineConfig;
use basin::pipeline::{self, LearnedModel, Route};
use basin_core::certificates::{zubov_lsq, LyapunovCandidate, QuadraticLyapunov};
use basin_core::dictionary::{Dictionary, SharedDictionary};
use basin_core::dynamics::{
    integrate, sample_initial_conditions_iid, sample_trajectories, Builtin, TrajectoryDataset,
};
use basin_core::interval::IntervalBox;
use basin_core::koopman::{
    assemble_dictionary_matrix, correct_equilibrium, extract_vector_field, learn_generator,
    resolvent_quadrature, VectorFieldModel,
};
use basin_core::verify::{
    audit_check, certify_roa, compute_alpha, explore, required_beta, BandCheck,
    CertificationReport, InclusionCheck, LevelExceedsCheck, ScalarCertificate, Verdict,
    VerifierConfig,
};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use tempfile::TempDir;

fn verdict_line(n: u32, ok: bool, detail: &str) -> bool {
    println!("ACCEPTANCE {n}: {} - {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Agreement in the first three significant digits (relative error below
/// half a unit in the third digit).
fn three_sig_figs(computed: f64, quoted: f64) -> bool {
    (computed - quoted).abs() / quoted.abs() <= 5e-3
}

// ---------------------------------------------------------------------------
// Shared benchmark runs (built once, reused across criteria)
// ---------------------------------------------------------------------------

struct LearnPhase {
    _tmp: TempDir,
    cfg: PipelineConfig,
    dataset: TrajectoryDataset,
    model: LearnedModel,
}

struct CertPhase {
    candidate: LyapunovCandidate,
    report: CertificationReport,
    quad: QuadraticLyapunov,
}

fn learn_config(name: &str) -> LearnPhase {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name);
    let mut cfg = PipelineConfig::load(&path).expect("bundled config loads");
    let tmp = TempDir::new().expect("tempdir");
    cfg.output.dir = tmp.path().to_path_buf();
    let dataset = pipeline::run_simulate(&cfg).expect("simulate");
    let model = pipeline::run_learn(&cfg, &dataset).expect("learn");
    LearnPhase {
        _tmp: tmp,
        cfg,
        dataset,
        model,
    }
}

fn certify_phase(learn: &LearnPhase) -> CertPhase {
    let candidate = pipeline::run_solve(&learn.cfg, &learn.model, Route::Operator).expect("solve");
    let (_, report) =
        pipeline::run_certify(&learn.cfg, &learn.model, &candidate, &learn.dataset, false)
            .expect("certify");
    let quad = pipeline::quadratic_from_model(&learn.cfg, &learn.model).expect("quadratic form");
    CertPhase {
        candidate,
        report,
        quad,
    }
}

static VDP_LEARN: OnceLock<LearnPhase> = OnceLock::new();
static VDP_CERT: OnceLock<CertPhase> = OnceLock::new();
static TM_LEARN: OnceLock<LearnPhase> = OnceLock::new();
static TM_CERT: OnceLock<CertPhase> = OnceLock::new();

fn vdp_learn() -> &'static LearnPhase {
    VDP_LEARN.get_or_init(|| learn_config("vdp.json"))
}

fn vdp_cert() -> &'static CertPhase {
    VDP_CERT.get_or_init(|| certify_phase(vdp_learn()))
}

fn tm_learn() -> &'static LearnPhase {
    TM_LEARN.get_or_init(|| learn_config("two_machine.json"))
}

fn tm_cert() -> &'static CertPhase {
    TM_CERT.get_or_init(|| certify_phase(tm_learn()))
}

/// Replays every stored box cover against a freshly built copy of the check
/// it came from; all classifications must reproduce.
fn replay_covers(learn: &LearnPhase, cert: &CertPhase) -> bool {
    let rep = &cert.report;
    rep.checks.iter().all(|cr| match cr.name {
        "quad_band" => audit_check(
            &BandCheck {
                certificate: &cert.quad,
                field: &learn.model.field,
                band: (f64::NEG_INFINITY, rep.c_quad),
                beta: rep.quad.beta_p,
                min_radius: rep.quad.rho_used,
                label: "quad_band",
            },
            &cr.outcome,
        ),
        "quad_containment" => audit_check(
            &LevelExceedsCheck {
                certificate: &cert.quad,
                level: rep.c_quad,
                label: "quad_containment",
            },
            &cr.outcome,
        ),
        "inclusion" => audit_check(
            &InclusionCheck {
                candidate: &cert.candidate,
                c1: rep.c1,
                quad: &cert.quad,
                c_quad: rep.c_quad,
            },
            &cr.outcome,
        ),
        "band" => audit_check(
            &BandCheck {
                certificate: &cert.candidate,
                field: &learn.model.field,
                band: (rep.c1, rep.c2),
                beta: rep.bounds.beta_used,
                min_radius: 0.0,
                label: "band",
            },
            &cr.outcome,
        ),
        "containment" => audit_check(
            &LevelExceedsCheck {
                certificate: &cert.candidate,
                level: rep.c2,
                label: "containment",
            },
            &cr.outcome,
        ),
        _ => false,
    })
}

fn grid_1d(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Containment of the quadratic basin in the certified sublevel set on a
/// uniform grid, plus the two cell counts.
fn grid_containment(
    window: &IntervalBox,
    n: usize,
    cert: &CertPhase,
) -> (bool, usize, usize) {
    let xs = grid_1d(window.interval(0).lo(), window.interval(0).hi(), n);
    let ys = grid_1d(window.interval(1).lo(), window.interval(1).hi(), n);
    let mut contained = true;
    let mut quad_cells = 0usize;
    let mut zubov_cells = 0usize;
    for &y in &ys {
        for &x in &xs {
            let vp = cert.quad.value(&[x, y]);
            let v = cert.candidate.value(&[x, y]);
            if vp <= cert.report.c_quad {
                quad_cells += 1;
                if v > cert.report.c2 {
                    contained = false;
                }
            }
            if v <= cert.report.c2 {
                zubov_cells += 1;
            }
        }
    }
    (contained, quad_cells, zubov_cells)
}

// ---------------------------------------------------------------------------
// 1. Derivative-margin formula on the two benchmark parameter sets
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_margin_formula() {
    let vdp = required_beta(4.90, 4.90, 3e-4, 4.16e-6, 7.07e-1);
    let tm = required_beta(1.52, 1.52, 1e-4, 2.72e-4, 1.45);
    let ok = three_sig_figs(vdp, 2.08e-3) && three_sig_figs(tm, 8.34e-4);
    assert!(verdict_line(
        1,
        ok,
        &format!("required margins {vdp:.4e} vs 2.08e-3 and {tm:.4e} vs 8.34e-4"),
    ));
}

// ---------------------------------------------------------------------------
// 2. Linear-system identification through the generator
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_linear_identification() {
    let started = Instant::now();
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
    let sys = Builtin::Linear(a.clone());
    let domain = IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let inits = sample_initial_conditions_iid(&domain, 50, 20_240_001);
    let dataset =
        sample_trajectories(&sys, &inits, 50.0, 5.0, domain.clone(), 1e-10).expect("simulate");
    let dict: SharedDictionary = Arc::new(Dictionary::monomial_2d(2, 2).unwrap());
    let b = assemble_dictionary_matrix(&dataset, &dict).unwrap();
    let resolvent = resolvent_quadrature(&dataset, &dict, 2.5, 5).unwrap();
    let generator = learn_generator(&b, &resolvent, dict, 1e8, 5.0, 1e-12).unwrap();
    let field = correct_equilibrium(&extract_vector_field(&generator).unwrap());

    let probes = sample_initial_conditions_iid(&domain, 500, 77);
    let worst = probes
        .iter()
        .map(|x| (field.eval(x.as_slice()) - &a * x).norm())
        .fold(0.0, f64::max);
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-5 && elapsed < 10.0;
    assert!(verdict_line(
        2,
        ok,
        &format!("max field error {worst:.3e} (<= 1e-5) in {elapsed:.1} s"),
    ));
}

// ---------------------------------------------------------------------------
// 3. Scalar closed-form solution of the basin PDE
// ---------------------------------------------------------------------------

#[test]
fn acceptance_03_scalar_closed_form() {
    let started = Instant::now();
    let sys = Builtin::ScalarLinear(-1.0);
    let domain = IntervalBox::from_bounds(&[(-2.0, 2.0)]).unwrap();
    let inits = sample_initial_conditions_iid(&domain, 48, 5);
    let dataset =
        sample_trajectories(&sys, &inits, 50.0, 5.0, domain.clone(), 1e-10).expect("simulate");
    let dict: SharedDictionary = Arc::new(
        Dictionary::monomial_custom(1, vec![vec![2], vec![4], vec![6], vec![8], vec![10]])
            .unwrap(),
    );
    let b = assemble_dictionary_matrix(&dataset, &dict).unwrap();
    let resolvent = resolvent_quadrature(&dataset, &dict, 2.5, 5).unwrap();
    let generator = learn_generator(&b, &resolvent, dict, 1e8, 5.0, 1e-12).unwrap();

    let interior = sample_initial_conditions_iid(&domain, 400, 9);
    let boundary = [(DVector::zeros(1), 0.0)];
    let candidate = zubov_lsq(&generator, &interior, &boundary, 100.0, 0.1, 1e-12).unwrap();

    let worst = grid_1d(-1.5, 1.5, 3001)
        .into_iter()
        .map(|x| {
            let truth = 1.0 - (-0.05 * x * x).exp();
            (candidate.value(&[x]) - truth).abs()
        })
        .fold(0.0, f64::max);
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 5e-3 && elapsed < 30.0;
    assert!(verdict_line(
        3,
        ok,
        &format!("sup deviation from closed form {worst:.3e} (<= 5e-3) in {elapsed:.1} s"),
    ));
}

// ---------------------------------------------------------------------------
// 4. Van der Pol identification accuracy at the shipped parameters
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_vdp_identification() {
    let started = Instant::now();
    let learn = vdp_learn();
    let samples: Vec<DVector<f64>> = learn
        .dataset
        .trajectories
        .iter()
        .map(|t| t.initial().clone_owned())
        .collect();
    let alpha = compute_alpha(&learn.model.field, &samples, &Builtin::VdpReversed).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let ok = alpha <= 1e-3 && elapsed < 120.0;
    assert!(verdict_line(
        4,
        ok,
        &format!("identification error alpha = {alpha:.3e} (<= 1e-3) in {elapsed:.1} s"),
    ));
}

// ---------------------------------------------------------------------------
// 5. Van der Pol certification with basin enlargement and audit replay
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_vdp_certified_enlargement() {
    let started = Instant::now();
    let learn = vdp_learn();
    let cert = vdp_cert();
    let window = learn.cfg.plot_window().unwrap();
    let (contained, quad_cells, zubov_cells) = grid_containment(&window, 200, cert);
    let audit = replay_covers(learn, cert);
    let elapsed = started.elapsed().as_secs_f64();
    let ok = cert.report.certified
        && contained
        && zubov_cells > quad_cells
        && audit
        && elapsed < 300.0;
    assert!(verdict_line(
        5,
        ok,
        &format!(
            "certified={} containment={contained} cells {zubov_cells} > {quad_cells} audit={audit} in {elapsed:.0} s",
            cert.report.certified
        ),
    ));
}

// ---------------------------------------------------------------------------
// 6. Two-machine pipeline certification with strict containment
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_two_machine_certified() {
    let started = Instant::now();
    let learn = tm_learn();
    let cert = tm_cert();
    let window = learn.cfg.plot_window().unwrap();
    let (contained, quad_cells, zubov_cells) = grid_containment(&window, 200, cert);
    let elapsed = started.elapsed().as_secs_f64();
    let ok = cert.report.certified && contained && zubov_cells > quad_cells && elapsed < 600.0;
    assert!(verdict_line(
        6,
        ok,
        &format!(
            "certified={} containment={contained} cells {zubov_cells} > {quad_cells} in {elapsed:.0} s",
            cert.report.certified
        ),
    ));
}

// ---------------------------------------------------------------------------
// 7. Verifier soundness: counterexamples, negation, replay
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_verifier_soundness() {
    let started = Instant::now();

    // (a) growing scalar system with V = x^2 must be refuted.
    let grow = VectorFieldModel::from_linear(&DMatrix::from_row_slice(1, 1, &[1.0]));
    let vq = QuadraticLyapunov {
        p: DMatrix::from_row_slice(1, 1, &[1.0]),
        q: DMatrix::from_row_slice(1, 1, &[2.0]),
    };
    let domain = IntervalBox::from_bounds(&[(-1.5, 1.5)]).unwrap();
    let cfg = VerifierConfig {
        eps_box: 1e-3,
        max_boxes: 100_000,
        rho: 0.05,
        bisect_tol: 1e-3,
    };
    let check = BandCheck {
        certificate: &vq,
        field: &grow,
        band: (0.01, 1.0),
        beta: 1e-3,
        min_radius: 0.0,
        label: "band",
    };
    let outcome = explore(&check, core::slice::from_ref(&domain), &cfg);
    let (counterexample_found, ce_valid) = match &outcome.verdict {
        Verdict::Counterexample { point, value } => {
            // (c) for this check a violation means the derivative fails to
            // drop below -beta somewhere inside the band.
            let dot = vq
                .gradient(point)
                .dot(&grow.eval(point));
            let v = vq.value(point);
            (true, dot >= -1e-3 && v > 0.01 && v < 1.0 && (dot - value).abs() <= 1e-9)
        }
        _ => (false, false),
    };

    // (b) the negated benchmark candidate must never certify.
    let learn = vdp_learn();
    let cert = vdp_cert();
    let negated = LyapunovCandidate {
        theta: -cert.candidate.theta.clone(),
        dictionary: cert.candidate.dictionary.clone(),
        form: cert.candidate.form,
        r: cert.candidate.r,
        lambda_b: cert.candidate.lambda_b,
        fit_stats: cert.candidate.fit_stats,
        diagnostics: cert.candidate.diagnostics.clone(),
    };
    let samples: Vec<DVector<f64>> = learn
        .dataset
        .trajectories
        .iter()
        .map(|t| t.initial().clone_owned())
        .collect();
    let neg_report = certify_roa(
        &negated,
        &learn.model.field,
        &Builtin::VdpReversed,
        &samples,
        learn.cfg.verify.delta,
        &learn.cfg.q_matrix(),
        &learn.cfg.verify_domain().unwrap(),
        &learn.cfg.verifier_config(),
    )
    .expect("negated certification runs");
    let negated_rejected = !neg_report.certified;

    // (c) every stored counterexample re-evaluates as a true violation of
    // the condition its check enforces.
    let stored_valid = neg_report.checks.iter().all(|cr| match &cr.outcome.verdict {
        Verdict::Counterexample { point, value } => match cr.name {
            // Inclusion stores the quadratic value of a point that sits in
            // the candidate sublevel set but outside the quadratic basin.
            "inclusion" => {
                let vp = cert.quad.value(point);
                (vp - value).abs() <= 1e-9 && vp > neg_report.c_quad
            }
            "band" => {
                let dot = negated.gradient(point).dot(&learn.model.field.eval(point));
                (dot - value).abs() <= 1e-6 && dot + neg_report.bounds.beta_used > 0.0
            }
            "quad_band" => {
                let dot = cert.quad.gradient(point).dot(&learn.model.field.eval(point));
                (dot - value).abs() <= 1e-6 && dot + neg_report.quad.beta_p > 0.0
            }
            // Level checks store the certificate value that failed to clear
            // the required level; the exact level of the failing probe is
            // internal, so recompute the value itself.
            "containment" => (negated.value(point) - value).abs() <= 1e-9,
            "quad_containment" => (cert.quad.value(point) - value).abs() <= 1e-9,
            _ => false,
        },
        _ => true,
    });

    // (d) audit replay of the certified covers.
    let audit = replay_covers(learn, cert);

    let elapsed = started.elapsed().as_secs_f64();
    let ok = counterexample_found && ce_valid && negated_rejected && stored_valid && audit;
    assert!(verdict_line(
        7,
        ok,
        &format!(
            "counterexample={counterexample_found} revalidated={} negated_rejected={negated_rejected} audit={audit} in {elapsed:.0} s",
            ce_valid && stored_valid
        ),
    ));
}

// ---------------------------------------------------------------------------
// 8. Quadrature against closed-form resolvents
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_quadrature_oracle() {
    let domain = IntervalBox::from_bounds(&[(-2.0, 2.0)]).unwrap();
    let inits = [0.5, -1.2, 2.0]
        .iter()
        .map(|&v| DVector::from_row_slice(&[v]))
        .collect::<Vec<_>>();
    let constant: SharedDictionary =
        Arc::new(Dictionary::monomial_custom(1, vec![vec![0]]).unwrap());
    let mut worst_const = 0.0f64;
    for mu in [2.5, 3.0] {
        for tau in [1.0, 5.0] {
            let dataset = sample_trajectories(
                &Builtin::ScalarLinear(-1.0),
                &inits,
                50.0,
                tau,
                domain.clone(),
                1e-12,
            )
            .unwrap();
            let resolvent = resolvent_quadrature(&dataset, &constant, mu, 5).unwrap();
            let truth = (1.0 - (-mu * tau).exp()) / mu;
            for row in 0..resolvent.matrix.nrows() {
                worst_const = worst_const.max((resolvent.matrix[(row, 0)] - truth).abs() / truth);
            }
        }
    }

    let coordinate: SharedDictionary =
        Arc::new(Dictionary::monomial_custom(1, vec![vec![1]]).unwrap());
    let dataset = sample_trajectories(
        &Builtin::ScalarLinear(-1.0),
        &inits,
        100.0,
        5.0,
        domain.clone(),
        1e-12,
    )
    .unwrap();
    let resolvent = resolvent_quadrature(&dataset, &coordinate, 2.5, 5).unwrap();
    let rate: f64 = 2.5 + 1.0;
    let factor = (1.0 - (-rate * 5.0).exp()) / rate;
    let mut worst_coord = 0.0f64;
    for (row, x0) in inits.iter().enumerate() {
        let truth = x0[0] * factor;
        worst_coord = worst_coord.max((resolvent.matrix[(row, 0)] - truth).abs() / truth.abs());
    }

    let ok = worst_const <= 1e-10 && worst_coord <= 1e-6;
    assert!(verdict_line(
        8,
        ok,
        &format!("constant rel err {worst_const:.2e} (<= 1e-10), coordinate rel err {worst_coord:.2e} (<= 1e-6)"),
    ));
}

// ---------------------------------------------------------------------------
// 9. Integrator semigroup property on both benchmarks
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_semigroup() {
    let started = Instant::now();
    let states = IntervalBox::from_bounds(&[(-0.8, 0.8), (-0.8, 0.8)]).unwrap();
    let horizons = IntervalBox::from_bounds(&[(0.25, 2.0), (0.25, 2.0)]).unwrap();
    let mut worst = 0.0f64;
    for sys in [Builtin::VdpReversed, Builtin::TwoMachine] {
        let xs = sample_initial_conditions_iid(&states, 50, 13);
        let ts = sample_initial_conditions_iid(&horizons, 50, 31);
        for (x, ts_pair) in xs.iter().zip(&ts) {
            let (t, s) = (ts_pair[0], ts_pair[1]);
            let mid = integrate(&sys, x, t, 1e-10).unwrap().end_state().clone_owned();
            let two_leg = integrate(&sys, &mid, s, 1e-10)
                .unwrap()
                .end_state()
                .clone_owned();
            let direct = integrate(&sys, x, t + s, 1e-10)
                .unwrap()
                .end_state()
                .clone_owned();
            worst = worst.max((two_leg - direct).norm());
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-6 && elapsed < 10.0;
    assert!(verdict_line(
        9,
        ok,
        &format!("semigroup defect {worst:.2e} (<= 1e-6) over 100 pairs in {elapsed:.1} s"),
    ));
}
