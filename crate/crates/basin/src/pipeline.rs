//! The pipeline stages behind the CLI verbs.
//!
//! Every stage reads its inputs from the configured output directory (or
//! produces them in memory when stages are chained) and writes its artifact
//! back there, stamped with the configuration hash. Stages refuse artifacts
//! carrying a different hash so runs cannot silently mix configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use basin_core::certificates::{
    lyapunov_lsq, lyapunov_lsq_direct, solve_matrix_lyapunov, zubov_lsq, zubov_lsq_direct,
    LyapunovCandidate, QuadraticLyapunov,
};
use basin_core::dictionary::SharedDictionary;
use basin_core::dynamics::{
    sample_initial_conditions_grid, sample_initial_conditions_iid, sample_trajectories, Builtin,
    TrajectoryDataset,
};
use basin_core::interval::IntervalBox;
use basin_core::koopman::{
    assemble_dictionary_matrix, correct_equilibrium, extract_vector_field, learn_generator,
    linearize_at_origin, resolvent_quadrature, GeneratorModel, VectorFieldModel,
};
use basin_core::verify::{certify_roa, CertificationReport, ScalarCertificate};
use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::config::{PdeForm, PipelineConfig, SamplingMode};
use crate::formats::{
    self, CandidateFile, DatasetMeta, LevelsFile, ModelFile, ReportFile, SeedsFile,
};

/// Which row assembly the PDE solve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Rows from the learned generator matrix.
    Operator,
    /// Rows from the extracted vector field (`grad Z . f_hat`).
    Direct,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Operator => "operator",
            Route::Direct => "direct",
        }
    }
}

// ---------------------------------------------------------------------------
// Artifact locations
// ---------------------------------------------------------------------------

pub fn dataset_csv_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("dataset.csv")
}

pub fn dataset_meta_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("dataset.meta.json")
}

pub fn model_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("model.json")
}

pub fn candidate_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("candidate.json")
}

pub fn report_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("report.json")
}

pub fn cover_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("cover.csv")
}

pub fn contours_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("contours.csv")
}

pub fn levels_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output.dir.join("levels.json")
}

pub fn ensure_output_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output.dir).with_context(|| {
        format!("cannot create output directory {}", cfg.output.dir.display())
    })
}

fn require_builtin(cfg: &PipelineConfig, verb: &str) -> Result<Builtin> {
    cfg.builtin().with_context(|| {
        format!(
            "`{verb}` needs a built-in system, but {:?} is not one \
             (file-backed systems carry no oracle)",
            cfg.system
        )
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Integrates the configured trajectories and writes `dataset.csv` plus its
/// metadata sidecar.
pub fn run_simulate(cfg: &PipelineConfig) -> Result<TrajectoryDataset> {
    let sys = require_builtin(cfg, "simulate")?;
    let domain = cfg.sampling_domain()?;
    let inits = match cfg.sampling.mode {
        SamplingMode::Iid => {
            sample_initial_conditions_iid(&domain, cfg.sampling.m, cfg.sampling.seed)
        }
        SamplingMode::Grid => sample_initial_conditions_grid(&domain, cfg.grid_side()?),
    };
    let dataset = sample_trajectories(
        &sys,
        &inits,
        cfg.sampling.gamma,
        cfg.sampling.tau_s,
        domain,
        1e-10,
    )
    .map_err(|e| anyhow::anyhow!("trajectory integration failed: {e}"))?;
    ensure_output_dir(cfg)?;
    let meta = DatasetMeta {
        config_hash: cfg.hash(),
        system: cfg.system.clone(),
        gamma: cfg.sampling.gamma,
        tau_s: cfg.sampling.tau_s,
        domain: cfg.sampling.domain.clone(),
        seed: cfg.sampling.seed,
        mode: match cfg.sampling.mode {
            SamplingMode::Iid => "iid".to_string(),
            SamplingMode::Grid => "grid".to_string(),
        },
        m: cfg.sampling.m,
    };
    formats::write_dataset(
        &dataset_csv_path(cfg),
        &dataset_meta_path(cfg),
        &dataset,
        &meta,
    )?;
    Ok(dataset)
}

/// Loads the stage-input dataset: the file named by `system` when it is a
/// path, otherwise the artifact a previous `simulate` left in the output
/// directory (whose hash must match).
pub fn load_dataset(cfg: &PipelineConfig) -> Result<TrajectoryDataset> {
    if cfg.builtin().is_some() {
        let csv = dataset_csv_path(cfg);
        if !csv.exists() {
            bail!(
                "no dataset at {} — run `simulate` with this config first",
                csv.display()
            );
        }
        let (dataset, meta) = formats::read_dataset(&csv, &dataset_meta_path(cfg))?;
        if meta.config_hash != cfg.hash() {
            bail!(
                "dataset at {} was produced by a different configuration",
                csv.display()
            );
        }
        Ok(dataset)
    } else {
        let csv = Path::new(&cfg.system);
        let meta = csv.with_extension("meta.json");
        let (dataset, _) = formats::read_dataset(csv, &meta)?;
        if dataset.state_dim() != cfg.sampling.domain.len() {
            bail!("trajectory file state dimension does not match the configuration");
        }
        Ok(dataset)
    }
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

pub struct LearnedModel {
    pub generator: GeneratorModel,
    pub field: VectorFieldModel,
    pub a_hat: DMatrix<f64>,
}

/// Learns the generator from a dataset, extracts and corrects the vector
/// field, and writes `model.json`.
pub fn run_learn(cfg: &PipelineConfig, dataset: &TrajectoryDataset) -> Result<LearnedModel> {
    let dictionary: SharedDictionary = Arc::new(cfg.build_dictionary()?);
    let b = assemble_dictionary_matrix(dataset, &dictionary)
        .map_err(|e| anyhow::anyhow!("dictionary assembly failed: {e}"))?;
    let resolvent = resolvent_quadrature(dataset, &dictionary, cfg.generator.mu, cfg.generator.nodes)
        .map_err(|e| anyhow::anyhow!("resolvent quadrature failed: {e}"))?;
    let generator = learn_generator(
        &b,
        &resolvent,
        dictionary,
        cfg.generator.lambda,
        dataset.tau_s,
        cfg.generator.svd_tol,
    )
    .map_err(|e| anyhow::anyhow!("generator solve failed: {e}"))?;
    let raw = extract_vector_field(&generator)
        .map_err(|e| anyhow::anyhow!("vector-field extraction failed: {e}"))?;
    let field = correct_equilibrium(&raw);
    let a_hat = linearize_at_origin(&field)
        .map_err(|e| anyhow::anyhow!("linearization failed: {e}"))?;
    ensure_output_dir(cfg)?;
    let file = ModelFile::new(cfg.hash(), cfg.system.clone(), &generator, &field, &a_hat);
    formats::save_json(&model_path(cfg), &file)?;
    Ok(LearnedModel {
        generator,
        field,
        a_hat,
    })
}

pub fn load_model(cfg: &PipelineConfig) -> Result<LearnedModel> {
    let path = model_path(cfg);
    if !path.exists() {
        bail!(
            "no model at {} — run `learn` with this config first",
            path.display()
        );
    }
    let file: ModelFile = formats::load_json(&path)?;
    if file.config_hash != cfg.hash() {
        bail!(
            "model at {} was produced by a different configuration",
            path.display()
        );
    }
    Ok(LearnedModel {
        generator: file.generator()?,
        field: file.field()?,
        a_hat: file.a_hat()?,
    })
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

/// Uniform points on the box boundary, faces weighted by their area.
fn sample_boundary_points(domain: &IntervalBox, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let n = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths: Vec<f64> = domain.dims().iter().map(|iv| iv.width()).collect();
    let mut cumulative = Vec::with_capacity(2 * n);
    let mut total = 0.0;
    for axis in 0..n {
        let area: f64 = (0..n).filter(|&j| j != axis).map(|j| widths[j]).product();
        for _ in 0..2 {
            total += area;
            cumulative.push(total);
        }
    }
    let dists: Vec<Uniform<f64>> = domain
        .dims()
        .iter()
        .map(|iv| Uniform::new_inclusive(iv.lo(), iv.hi()).expect("valid interval bounds"))
        .collect();
    (0..count)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..total);
            let face = cumulative.iter().position(|&c| u < c).unwrap_or(2 * n - 1);
            let axis = face / 2;
            let pinned = if face % 2 == 0 {
                domain.interval(axis).lo()
            } else {
                domain.interval(axis).hi()
            };
            DVector::from_fn(n, |j, _| {
                if j == axis {
                    pinned
                } else {
                    dists[j].sample(&mut rng)
                }
            })
        })
        .collect()
}

/// Collocation seed for the boundary stream, decorrelated from the interior
/// stream that uses `pde.seed` directly.
fn boundary_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Fits the configured PDE over the solve domain and writes
/// `candidate.json`.
pub fn run_solve(cfg: &PipelineConfig, model: &LearnedModel, route: Route) -> Result<LyapunovCandidate> {
    let domain = cfg.solve_domain()?;
    let interior = sample_initial_conditions_iid(&domain, cfg.pde.interior, cfg.pde.seed);
    let candidate = match cfg.pde.form {
        PdeForm::Zubov => {
            let mut boundary = vec![(DVector::zeros(domain.dim()), 0.0)];
            boundary.extend(
                sample_boundary_points(&domain, cfg.pde.boundary, boundary_seed(cfg.pde.seed))
                    .into_iter()
                    .map(|x| (x, 1.0)),
            );
            match route {
                Route::Operator => zubov_lsq(
                    &model.generator,
                    &interior,
                    &boundary,
                    cfg.pde.lambda_b,
                    cfg.pde.r,
                    cfg.pde.ridge,
                ),
                Route::Direct => zubov_lsq_direct(
                    &model.field,
                    &interior,
                    &boundary,
                    cfg.pde.lambda_b,
                    cfg.pde.r,
                    cfg.pde.ridge,
                ),
            }
        }
        PdeForm::Lyapunov => match route {
            Route::Operator => lyapunov_lsq(
                &model.generator,
                &interior,
                cfg.pde.lambda_b,
                cfg.pde.r,
                cfg.pde.ridge,
            ),
            Route::Direct => lyapunov_lsq_direct(
                &model.field,
                &interior,
                cfg.pde.lambda_b,
                cfg.pde.r,
                cfg.pde.ridge,
            ),
        },
    }
    .map_err(|e| anyhow::anyhow!("PDE solve failed: {e}"))?;
    ensure_output_dir(cfg)?;
    let file = CandidateFile::new(cfg.hash(), &candidate, route.as_str());
    formats::save_json(&candidate_path(cfg), &file)?;
    Ok(candidate)
}

pub fn load_candidate(cfg: &PipelineConfig) -> Result<LyapunovCandidate> {
    let path = candidate_path(cfg);
    if !path.exists() {
        bail!(
            "no candidate at {} — run `solve` with this config first",
            path.display()
        );
    }
    let file: CandidateFile = formats::load_json(&path)?;
    if file.config_hash != cfg.hash() {
        bail!(
            "candidate at {} was produced by a different configuration",
            path.display()
        );
    }
    file.candidate()
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

/// Runs the full certification and writes `report.json` (and the box cover
/// when requested). Returns the report file for exit-code mapping.
pub fn run_certify(
    cfg: &PipelineConfig,
    model: &LearnedModel,
    candidate: &LyapunovCandidate,
    dataset: &TrajectoryDataset,
    dump_cover: bool,
) -> Result<(ReportFile, CertificationReport)> {
    let oracle = require_builtin(cfg, "certify")?;
    let samples: Vec<DVector<f64>> = dataset
        .trajectories
        .iter()
        .map(|t| t.initial().clone_owned())
        .collect();
    let q = cfg.q_matrix();
    let domain = cfg.verify_domain()?;
    let vcfg = cfg.verifier_config();
    let started = Instant::now();
    let report = certify_roa(
        candidate,
        &model.field,
        &oracle,
        &samples,
        cfg.verify.delta,
        &q,
        &domain,
        &vcfg,
    )
    .map_err(|e| anyhow::anyhow!("certification failed: {e}"))?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    ensure_output_dir(cfg)?;
    let seeds = SeedsFile {
        sampling: cfg.sampling.seed,
        pde: cfg.pde.seed,
        dictionary: dictionary_seed(cfg),
    };
    let file = ReportFile::new(cfg.hash(), cfg.system.clone(), seeds, &report, wall_ms);
    formats::save_json(&report_path(cfg), &file)?;
    if dump_cover {
        formats::write_cover_csv(&cover_path(cfg), &report)?;
    }
    Ok((file, report))
}

pub fn load_report(cfg: &PipelineConfig) -> Result<ReportFile> {
    let path = report_path(cfg);
    if !path.exists() {
        bail!(
            "no report at {} — run `certify` with this config first",
            path.display()
        );
    }
    let file: ReportFile = formats::load_json(&path)?;
    if file.config_hash != cfg.hash() {
        bail!(
            "report at {} was produced by a different configuration",
            path.display()
        );
    }
    Ok(file)
}

fn dictionary_seed(cfg: &PipelineConfig) -> Option<u64> {
    match cfg.dictionary {
        crate::config::DictionarySpec::Tanh { seed, .. } => Some(seed),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// export-contours
// ---------------------------------------------------------------------------

/// Evaluates `V` and `V_P` on a uniform grid over the plot window and writes
/// `contours.csv` plus `levels.json` (levels copied from the report).
pub fn run_export_contours(
    cfg: &PipelineConfig,
    model: &LearnedModel,
    candidate: &LyapunovCandidate,
    report: &ReportFile,
    grid_override: Option<usize>,
) -> Result<()> {
    let window = cfg.plot_window()?;
    if window.dim() != 2 {
        bail!("contour export is only defined for planar systems");
    }
    let grid = grid_override.unwrap_or(cfg.output.grid);
    if grid < 2 {
        bail!("contour grid must be at least 2 per axis");
    }
    let quad = solve_matrix_lyapunov(&model.a_hat, cfg.q_matrix())
        .map_err(|e| anyhow::anyhow!("matrix Lyapunov solve failed: {e}"))?;
    let axis = |i: usize| -> Vec<f64> {
        let iv = window.interval(i);
        (0..grid)
            .map(|k| iv.lo() + iv.width() * k as f64 / (grid - 1) as f64)
            .collect()
    };
    let xs = axis(0);
    let ys = axis(1);
    ensure_output_dir(cfg)?;
    formats::write_contours(
        &contours_path(cfg),
        &xs,
        &ys,
        |x, y| candidate.value(&[x, y]),
        |x, y| quad.value(&[x, y]),
    )?;
    let levels = LevelsFile {
        config_hash: cfg.hash(),
        c: report.c,
        c1: report.c1,
        c2: report.c2,
    };
    formats::save_json(&levels_path(cfg), &levels)
}

/// Reconstructs the quadratic certificate a report's levels refer to.
pub fn quadratic_from_model(cfg: &PipelineConfig, model: &LearnedModel) -> Result<QuadraticLyapunov> {
    solve_matrix_lyapunov(&model.a_hat, cfg.q_matrix())
        .map_err(|e| anyhow::anyhow!("matrix Lyapunov solve failed: {e}"))
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

/// `simulate -> learn -> solve -> certify -> export-contours` in one go.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    route: Route,
    dump_cover: bool,
    grid_override: Option<usize>,
) -> Result<ReportFile> {
    let dataset = run_simulate(cfg)?;
    let model = run_learn(cfg, &dataset)?;
    let candidate = run_solve(cfg, &model, route)?;
    let (file, _) = run_certify(cfg, &model, &candidate, &dataset, dump_cover)?;
    if cfg.sampling.domain.len() == 2 {
        run_export_contours(cfg, &model, &candidate, &file, grid_override)?;
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> IntervalBox {
        IntervalBox::from_bounds(&[(-1.0, 1.0), (-2.0, 2.0)]).unwrap()
    }

    #[test]
    fn boundary_points_sit_on_the_perimeter() {
        let domain = square();
        let pts = sample_boundary_points(&domain, 200, 7);
        assert_eq!(pts.len(), 200);
        for p in &pts {
            let on_x = p[0] == -1.0 || p[0] == 1.0;
            let on_y = p[1] == -2.0 || p[1] == 2.0;
            assert!(on_x || on_y, "interior point {p:?}");
            assert!(p[0] >= -1.0 && p[0] <= 1.0 && p[1] >= -2.0 && p[1] <= 2.0);
        }
    }

    #[test]
    fn boundary_sampling_is_deterministic_and_weighted() {
        let domain = square();
        let a = sample_boundary_points(&domain, 500, 3);
        let b = sample_boundary_points(&domain, 500, 3);
        assert_eq!(a, b);
        // The y-pinned faces have length 2 against 4 for the x-pinned ones,
        // so roughly a third of the points should pin y.
        let pinned_y = a.iter().filter(|p| p[1].abs() == 2.0).count();
        assert!(pinned_y > 80 && pinned_y < 280, "pinned_y = {pinned_y}");
    }
}
