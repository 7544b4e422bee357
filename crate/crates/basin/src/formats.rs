//! On-disk artifact formats.
//!
//! Trajectories go to CSV with a JSON metadata sidecar; models, candidates,
//! and certification reports are JSON documents that fully reconstruct
//! their in-memory counterparts, each stamped with the configuration hash.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use basin_core::certificates::{CandidateForm, FitStats, LyapunovCandidate};
use basin_core::dictionary::Dictionary;
use basin_core::dynamics::{Trajectory, TrajectoryDataset};
use basin_core::interval::IntervalBox;
use basin_core::koopman::{GeneratorModel, SolveDiagnostics, VectorFieldModel};
use basin_core::verify::{
    BoundsReport, CertificationReport, CoverClass, UnknownReason, Verdict,
};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serialization failed")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        bail!("matrix payload is empty");
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        bail!("matrix payload is ragged");
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

// ---------------------------------------------------------------------------
// Trajectory datasets
// ---------------------------------------------------------------------------

/// Sidecar describing a trajectory CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config_hash: String,
    pub system: String,
    pub gamma: f64,
    pub tau_s: f64,
    pub domain: Vec<[f64; 2]>,
    pub seed: u64,
    pub mode: String,
    pub m: usize,
}

/// Writes `traj_id,t,x1,...,xn` rows plus the metadata sidecar.
pub fn write_dataset(
    csv_path: &Path,
    meta_path: &Path,
    dataset: &TrajectoryDataset,
    meta: &DatasetMeta,
) -> Result<()> {
    let n = dataset.state_dim();
    let mut writer = csv::Writer::from_path(csv_path)
        .with_context(|| format!("cannot create {}", csv_path.display()))?;
    let mut header = vec!["traj_id".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    writer.write_record(&header)?;
    for (id, traj) in dataset.trajectories.iter().enumerate() {
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let mut record = vec![id.to_string(), format_float(*t)];
            record.extend(state.iter().map(|v| format_float(*v)));
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    save_json(meta_path, meta)
}

/// `Display` for `f64` is the shortest decimal that parses back bit-exactly,
/// which keeps CSV round-trips lossless.
fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(csv_path: &Path, meta_path: &Path) -> Result<(TrajectoryDataset, DatasetMeta)> {
    let meta: DatasetMeta = load_json(meta_path)?;
    let mut reader = csv::Reader::from_path(csv_path)
        .with_context(|| format!("cannot read {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "traj_id" || &headers[1] != "t" {
        bail!("unexpected trajectory CSV header");
    }
    let n = headers.len() - 2;
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut current: Option<(usize, Trajectory)> = None;
    for record in reader.records() {
        let record = record?;
        let id: usize = record[0].parse().context("bad traj_id")?;
        let t: f64 = record[1].parse().context("bad time value")?;
        let state = DVector::from_iterator(
            n,
            (0..n).map(|i| record[2 + i].parse::<f64>().unwrap_or(f64::NAN)),
        );
        if state.iter().any(|v| !v.is_finite()) {
            bail!("non-finite state in trajectory CSV");
        }
        match &mut current {
            Some((cur_id, traj)) if *cur_id == id => {
                traj.times.push(t);
                traj.states.push(state);
            }
            _ => {
                if let Some((_, done)) = current.take() {
                    trajectories.push(done);
                }
                current = Some((
                    id,
                    Trajectory {
                        times: vec![t],
                        states: vec![state],
                    },
                ));
            }
        }
    }
    if let Some((_, done)) = current.take() {
        trajectories.push(done);
    }
    if trajectories.is_empty() {
        bail!("trajectory CSV holds no rows");
    }
    let bounds: Vec<(f64, f64)> = meta.domain.iter().map(|p| (p[0], p[1])).collect();
    let domain = IntervalBox::from_bounds(&bounds).context("bad domain in dataset metadata")?;
    Ok((
        TrajectoryDataset {
            trajectories,
            gamma: meta.gamma,
            tau_s: meta.tau_s,
            domain,
        },
        meta,
    ))
}

// ---------------------------------------------------------------------------
// Dictionaries
// ---------------------------------------------------------------------------

/// Serializable dictionary description; tanh weights are stored verbatim,
/// with seed and scale kept for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryFile {
    Monomial {
        n: usize,
        exponents: Vec<Vec<u32>>,
    },
    Tanh {
        n: usize,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        append_state: bool,
        seed: u64,
        weight_scale: f64,
    },
}

impl DictionaryFile {
    pub fn from_dictionary(dict: &Dictionary) -> Self {
        if let Some(exponents) = dict.monomial_exponents() {
            return Self::Monomial {
                n: dict.state_dim(),
                exponents: exponents.to_vec(),
            };
        }
        let (w, b, append_state, seed, weight_scale) =
            dict.tanh_parts().expect("dictionary is monomial or tanh");
        Self::Tanh {
            n: dict.state_dim(),
            weights: matrix_rows(w),
            bias: b.iter().copied().collect(),
            append_state,
            seed,
            weight_scale,
        }
    }

    pub fn build(&self) -> Result<Dictionary> {
        match self {
            Self::Monomial { n, exponents } => {
                Dictionary::monomial_custom(*n, exponents.clone())
                    .map_err(|e| anyhow::anyhow!("bad monomial dictionary: {e}"))
            }
            Self::Tanh {
                n,
                weights,
                bias,
                append_state,
                seed,
                weight_scale,
            } => {
                let w = rows_matrix(weights)?;
                if w.ncols() != *n {
                    bail!("tanh weight width does not match the state dimension");
                }
                Dictionary::tanh_from_parts(
                    w,
                    DVector::from_vec(bias.clone()),
                    *append_state,
                    *seed,
                    *weight_scale,
                )
                .map_err(|e| anyhow::anyhow!("bad tanh dictionary: {e}"))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub rank: usize,
    pub truncated: usize,
    pub sigma_max: f64,
    pub sigma_min_kept: f64,
    pub residual_rel: f64,
}

impl From<&SolveDiagnostics> for DiagnosticsFile {
    fn from(d: &SolveDiagnostics) -> Self {
        Self {
            rank: d.rank,
            truncated: d.truncated,
            sigma_max: d.sigma_max,
            sigma_min_kept: d.sigma_min_kept,
            residual_rel: d.residual_rel,
        }
    }
}

impl DiagnosticsFile {
    fn to_core(&self) -> SolveDiagnostics {
        SolveDiagnostics {
            rank: self.rank,
            truncated: self.truncated,
            sigma_max: self.sigma_max,
            sigma_min_kept: self.sigma_min_kept,
            residual_rel: self.residual_rel,
        }
    }
}

/// Learned generator and extracted field in one document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub config_hash: String,
    pub system: String,
    pub dictionary: DictionaryFile,
    pub lambda: f64,
    pub mu: f64,
    pub tau_s: f64,
    pub svd_tol: f64,
    pub diagnostics: DiagnosticsFile,
    /// Generator matrix, row-major.
    pub l: Vec<Vec<f64>>,
    /// Vector-field coefficients, row-major (`n x N`).
    pub field_coeffs: Vec<Vec<f64>>,
    pub field_offset: Vec<f64>,
    pub corrected: bool,
    /// Linearization of the corrected field at the origin.
    pub a_hat: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn new(
        config_hash: String,
        system: String,
        generator: &GeneratorModel,
        field: &VectorFieldModel,
        a_hat: &DMatrix<f64>,
    ) -> Self {
        Self {
            config_hash,
            system,
            dictionary: DictionaryFile::from_dictionary(&generator.dictionary),
            lambda: generator.lambda,
            mu: generator.mu,
            tau_s: generator.tau_s,
            svd_tol: generator.svd_tol,
            diagnostics: DiagnosticsFile::from(&generator.diagnostics),
            l: matrix_rows(&generator.l),
            field_coeffs: matrix_rows(&field.coeffs),
            field_offset: field.offset.iter().copied().collect(),
            corrected: field.corrected,
            a_hat: matrix_rows(a_hat),
        }
    }

    pub fn generator(&self) -> Result<GeneratorModel> {
        let dictionary = Arc::new(self.dictionary.build()?);
        let l = rows_matrix(&self.l)?;
        if l.nrows() != dictionary.len() || l.ncols() != dictionary.len() {
            bail!("generator matrix does not match the dictionary size");
        }
        Ok(GeneratorModel {
            l,
            lambda: self.lambda,
            mu: self.mu,
            tau_s: self.tau_s,
            svd_tol: self.svd_tol,
            dictionary,
            diagnostics: self.diagnostics.to_core(),
        })
    }

    pub fn field(&self) -> Result<VectorFieldModel> {
        let dictionary = Arc::new(self.dictionary.build()?);
        let coeffs = rows_matrix(&self.field_coeffs)?;
        if coeffs.ncols() != dictionary.len() || coeffs.nrows() != dictionary.state_dim() {
            bail!("field coefficients do not match the dictionary");
        }
        if self.field_offset.len() != coeffs.nrows() {
            bail!("field offset dimension mismatch");
        }
        Ok(VectorFieldModel {
            coeffs,
            offset: DVector::from_vec(self.field_offset.clone()),
            corrected: self.corrected,
            dictionary,
        })
    }

    pub fn a_hat(&self) -> Result<DMatrix<f64>> {
        rows_matrix(&self.a_hat)
    }
}

// ---------------------------------------------------------------------------
// Candidates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitStatsFile {
    pub interior_rms: f64,
    pub boundary_rms: f64,
    pub interior_count: usize,
    pub boundary_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateFile {
    pub config_hash: String,
    pub dictionary: DictionaryFile,
    pub theta: Vec<f64>,
    /// `zubov` or `lyapunov`.
    pub form: String,
    pub r: f64,
    pub lambda_b: f64,
    /// `operator` (generator rows) or `direct` (field rows).
    pub route: String,
    pub fit_stats: FitStatsFile,
    pub diagnostics: DiagnosticsFile,
}

impl CandidateFile {
    pub fn new(config_hash: String, candidate: &LyapunovCandidate, route: &str) -> Self {
        Self {
            config_hash,
            dictionary: DictionaryFile::from_dictionary(&candidate.dictionary),
            theta: candidate.theta.iter().copied().collect(),
            form: match candidate.form {
                CandidateForm::Zubov => "zubov".to_string(),
                CandidateForm::Lyapunov => "lyapunov".to_string(),
            },
            r: candidate.r,
            lambda_b: candidate.lambda_b,
            route: route.to_string(),
            fit_stats: FitStatsFile {
                interior_rms: candidate.fit_stats.interior_rms,
                boundary_rms: candidate.fit_stats.boundary_rms,
                interior_count: candidate.fit_stats.interior_count,
                boundary_count: candidate.fit_stats.boundary_count,
            },
            diagnostics: DiagnosticsFile::from(&candidate.diagnostics),
        }
    }

    pub fn candidate(&self) -> Result<LyapunovCandidate> {
        let dictionary = Arc::new(self.dictionary.build()?);
        if self.theta.len() != dictionary.len() {
            bail!("theta length does not match the dictionary");
        }
        let form = match self.form.as_str() {
            "zubov" => CandidateForm::Zubov,
            "lyapunov" => CandidateForm::Lyapunov,
            other => bail!("unknown candidate form {other:?}"),
        };
        Ok(LyapunovCandidate {
            theta: DVector::from_vec(self.theta.clone()),
            dictionary,
            form,
            r: self.r,
            lambda_b: self.lambda_b,
            fit_stats: FitStats {
                interior_rms: self.fit_stats.interior_rms,
                boundary_rms: self.fit_stats.boundary_rms,
                interior_count: self.fit_stats.interior_count,
                boundary_count: self.fit_stats.boundary_count,
            },
            diagnostics: self.diagnostics.to_core(),
        })
    }
}

// ---------------------------------------------------------------------------
// Certification reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedsFile {
    pub sampling: u64,
    pub pde: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsFile {
    pub k_f: f64,
    pub k_fhat: f64,
    pub nu: f64,
    pub alpha: f64,
    pub delta: f64,
    pub beta_required: f64,
    pub beta_used: f64,
}

impl From<&BoundsReport> for BoundsFile {
    fn from(b: &BoundsReport) -> Self {
        Self {
            k_f: b.k_f,
            k_fhat: b.k_fhat,
            nu: b.nu,
            alpha: b.alpha,
            delta: b.delta,
            beta_required: b.beta_required,
            beta_used: b.beta_used,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadFile {
    pub rho_used: f64,
    pub q0: f64,
    pub nu_p: f64,
    pub beta_p: f64,
    pub remainder_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictFile {
    /// `certified`, `counterexample`, or `unknown`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&Verdict> for VerdictFile {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Certified => Self {
                kind: "certified".to_string(),
                point: None,
                value: None,
                reason: None,
            },
            Verdict::Counterexample { point, value } => Self {
                kind: "counterexample".to_string(),
                point: Some(point.clone()),
                value: Some(*value),
                reason: None,
            },
            Verdict::Unknown(reason) => Self {
                kind: "unknown".to_string(),
                point: None,
                value: None,
                reason: Some(match reason {
                    UnknownReason::BudgetExhausted { explored } => {
                        format!("budget exhausted after {explored} boxes")
                    }
                    UnknownReason::ResolutionLimit { .. } => {
                        "box width reached the resolution floor".to_string()
                    }
                }),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckFile {
    pub name: String,
    pub verdict: VerdictFile,
    pub boxes_explored: u64,
    pub max_depth: u32,
    pub cover_boxes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsFile {
    pub boxes_explored: u64,
    pub max_depth: u32,
    /// Excluded from reproducibility comparisons.
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub config_hash: String,
    pub system: String,
    pub seeds: SeedsFile,
    pub certified: bool,
    pub degenerate: bool,
    /// Certified quadratic level.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub bounds: BoundsFile,
    pub quad: QuadFile,
    pub checks: Vec<CheckFile>,
    pub stats: StatsFile,
}

impl ReportFile {
    pub fn new(
        config_hash: String,
        system: String,
        seeds: SeedsFile,
        report: &CertificationReport,
        wall_time_ms: f64,
    ) -> Self {
        Self {
            config_hash,
            system,
            seeds,
            certified: report.certified,
            degenerate: report.degenerate,
            c: report.c_quad,
            c1: report.c1,
            c2: report.c2,
            bounds: BoundsFile::from(&report.bounds),
            quad: QuadFile {
                rho_used: report.quad.rho_used,
                q0: report.quad.q0,
                nu_p: report.quad.nu_p,
                beta_p: report.quad.beta_p,
                remainder_bound: report.quad.remainder_bound,
            },
            checks: report
                .checks
                .iter()
                .map(|c| CheckFile {
                    name: c.name.to_string(),
                    verdict: VerdictFile::from(&c.outcome.verdict),
                    boxes_explored: c.outcome.stats.boxes_explored,
                    max_depth: c.outcome.stats.max_depth,
                    cover_boxes: c.outcome.cover.len(),
                })
                .collect(),
            stats: StatsFile {
                boxes_explored: report.stats.boxes_explored,
                max_depth: report.stats.max_depth,
                wall_time_ms,
            },
        }
    }

    /// Contract: 0 certified, 2 counterexample/not-certified, 3 unknown.
    pub fn exit_code(&self) -> u8 {
        if self.certified {
            return 0;
        }
        let has_counterexample = self.checks.iter().any(|c| c.verdict.kind == "counterexample");
        let has_unknown = self.checks.iter().any(|c| c.verdict.kind == "unknown");
        if !has_counterexample && has_unknown {
            3
        } else {
            2
        }
    }
}

/// Box-cover dump for external audits: one row per cover box per check.
pub fn write_cover_csv(path: &Path, report: &CertificationReport) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let dim = report
        .checks
        .iter()
        .flat_map(|c| c.outcome.cover.first())
        .map(|(b, _)| b.dim())
        .next()
        .unwrap_or(0);
    let mut header = vec!["check".to_string(), "class".to_string()];
    for i in 1..=dim {
        header.push(format!("lo{i}"));
        header.push(format!("hi{i}"));
    }
    writer.write_record(&header)?;
    for check in &report.checks {
        for (boxed, class) in &check.outcome.cover {
            let mut record = vec![
                check.name.to_string(),
                match class {
                    CoverClass::Irrelevant => "irrelevant".to_string(),
                    CoverClass::Certified => "certified".to_string(),
                },
            ];
            for i in 0..boxed.dim() {
                record.push(format_float(boxed.interval(i).lo()));
                record.push(format_float(boxed.interval(i).hi()));
            }
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Contours
// ---------------------------------------------------------------------------

/// Level values accompanying a contour CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelsFile {
    pub config_hash: String,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `x1,x2,V,VP` over a uniform grid (row-major, `x1` fastest).
pub fn write_contours(
    path: &Path,
    xs: &[f64],
    ys: &[f64],
    v: impl Fn(f64, f64) -> f64,
    vp: impl Fn(f64, f64) -> f64,
) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(["x1", "x2", "V", "VP"])?;
    for &y in ys {
        for &x in xs {
            writer.write_record([
                format_float(x),
                format_float(y),
                format_float(v(x, y)),
                format_float(vp(x, y)),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
