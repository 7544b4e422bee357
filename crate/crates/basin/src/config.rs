//! The single JSON configuration file every command reads.
//!
//! One file holds the full parameter set of an experiment — system,
//! dictionary, sampling, generator, PDE, verification, and output paths —
//! so a run is replayable from that one artifact. A SHA-256 hash of the
//! canonical serialization is embedded in every output file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use basin_core::dictionary::Dictionary;
use basin_core::dynamics::Builtin;
use basin_core::interval::IntervalBox;
use basin_core::verify::VerifierConfig;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Top-level configuration; see `configs/vdp.json` for a complete example.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Built-in system name (`vdp_reversed`, `two_machine`) or a path to a
    /// trajectory CSV produced by `simulate` (then `simulate` and `certify`
    /// are unavailable: no oracle).
    pub system: String,
    pub dictionary: DictionarySpec,
    pub sampling: SamplingConfig,
    pub generator: GeneratorConfig,
    pub pde: PdeConfig,
    pub verify: VerifySection,
    pub output: OutputConfig,
}

/// Observable dictionary families available from configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// Planar monomial grid `x1^p x2^q`, `p < j`, `q < k`.
    Monomial { j: usize, k: usize },
    /// Caller-chosen monomial exponent tuples.
    MonomialCustom {
        state_dim: usize,
        exponents: Vec<Vec<u32>>,
    },
    /// Random tanh features plus the raw coordinates.
    Tanh {
        features: usize,
        seed: u64,
        weight_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Iid,
    Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Number of trajectories (grid mode: must be a perfect n-th power).
    pub m: usize,
    /// Snapshot rate in Hz.
    pub gamma: f64,
    /// Trajectory horizon in seconds.
    pub tau_s: f64,
    /// Initial-condition box, one `[lo, hi]` pair per state dimension.
    pub domain: Vec<[f64; 2]>,
    pub seed: u64,
    pub mode: SamplingMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Resolvent abscissa.
    pub mu: f64,
    /// Yosida parameter.
    pub lambda: f64,
    /// Relative SVD truncation threshold.
    pub svd_tol: f64,
    /// Gauss-Legendre nodes per inter-snapshot panel.
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeForm {
    Zubov,
    Lyapunov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub form: PdeForm,
    /// Forcing coefficient: `eta(x) = r |x|^2`.
    pub r: f64,
    /// Boundary-row weight.
    pub lambda_b: f64,
    /// Relative ridge of the stacked least squares.
    pub ridge: f64,
    /// Interior collocation points (i.i.d. over the solve domain).
    pub interior: usize,
    /// Exterior boundary points (on the solve-domain perimeter, value 1);
    /// ignored for the Lyapunov form, which anchors only the origin.
    pub boundary: usize,
    pub solve_domain: Vec<[f64; 2]>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Minimum box width before a check gives up as unknown.
    pub eps_box: f64,
    /// Exploration budget per check.
    pub max_boxes: u64,
    /// Linearization-ball radius for the quadratic stage.
    pub rho: f64,
    /// Relative tolerance of the level bisections.
    pub bisect_tol: f64,
    /// Covering radius of the sample set (Proposition-style error budget).
    pub delta: f64,
    /// Right-hand side of the matrix Lyapunov solve; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    /// Window the derivative/containment checks run over; the solve domain
    /// when absent. The Lipschitz constants are bounded over this window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
}

fn default_grid() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory all artifacts are written into (created if missing).
    pub dir: PathBuf,
    /// Contour-export resolution per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Window for contour export; the verify window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_window: Option<Vec<[f64; 2]>>,
}

fn boxed(pairs: &[[f64; 2]]) -> Result<IntervalBox> {
    let bounds: Vec<(f64, f64)> = pairs.iter().map(|p| (p[0], p[1])).collect();
    IntervalBox::from_bounds(&bounds).context("invalid box bounds in configuration")
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical serialization, embedded in all outputs.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sampling.domain.len();
        if n == 0 {
            bail!("sampling.domain must have at least one dimension");
        }
        if self.sampling.m == 0 {
            bail!("sampling.m must be positive");
        }
        if !(self.sampling.gamma > 0.0) {
            bail!("sampling.gamma must be positive");
        }
        if !(self.sampling.tau_s > 0.0) {
            bail!("sampling.tau_s must be positive");
        }
        if self.sampling.mode == SamplingMode::Grid && self.grid_side()?.pow(n as u32) != self.sampling.m {
            bail!("grid sampling needs m to be a perfect n-th power");
        }
        if !(self.generator.mu > 0.0) {
            bail!("generator.mu must be positive");
        }
        if !(self.generator.lambda > self.generator.mu) {
            bail!("generator.lambda must exceed generator.mu");
        }
        if !(self.generator.svd_tol >= 0.0) {
            bail!("generator.svd_tol must be non-negative");
        }
        if self.generator.nodes == 0 {
            bail!("generator.nodes must be positive");
        }
        if !(self.pde.r > 0.0) || !(self.pde.lambda_b > 0.0) {
            bail!("pde.r and pde.lambda_b must be positive");
        }
        if !(self.pde.ridge >= 0.0) {
            bail!("pde.ridge must be non-negative");
        }
        if self.pde.interior == 0 {
            bail!("pde.interior must be positive");
        }
        if self.pde.solve_domain.len() != n {
            bail!("pde.solve_domain dimension does not match sampling.domain");
        }
        boxed(&self.sampling.domain)?;
        boxed(&self.pde.solve_domain)?;
        if let Some(window) = &self.verify.domain {
            if window.len() != n {
                bail!("verify.domain dimension does not match sampling.domain");
            }
            boxed(window)?;
        }
        if let Some(q) = &self.verify.q {
            if q.len() != n || q.iter().any(|row| row.len() != n) {
                bail!("verify.q must be an n x n matrix");
            }
        }
        self.verifier_config()
            .validate()
            .context("verify section is invalid")?;
        if !(self.verify.delta >= 0.0) {
            bail!("verify.delta must be non-negative");
        }
        if self.output.grid < 2 {
            bail!("output.grid must be at least 2 per axis");
        }
        if let Some(window) = &self.output.plot_window {
            boxed(window)?;
        }
        match &self.dictionary {
            DictionarySpec::Monomial { .. } if n != 2 => {
                bail!("the planar monomial dictionary needs a 2-D state");
            }
            DictionarySpec::MonomialCustom { state_dim, .. } if *state_dim != n => {
                bail!("dictionary state_dim does not match sampling.domain");
            }
            _ => {}
        }
        Ok(())
    }

    /// Points per axis in grid sampling mode.
    pub fn grid_side(&self) -> Result<usize> {
        let n = self.sampling.domain.len() as f64;
        let side = (self.sampling.m as f64).powf(1.0 / n).round() as usize;
        if side == 0 {
            bail!("sampling.m too small for a grid");
        }
        Ok(side)
    }

    /// The built-in system, when `system` names one.
    pub fn builtin(&self) -> Option<Builtin> {
        Builtin::from_name(&self.system).ok()
    }

    pub fn sampling_domain(&self) -> Result<IntervalBox> {
        boxed(&self.sampling.domain)
    }

    pub fn solve_domain(&self) -> Result<IntervalBox> {
        boxed(&self.pde.solve_domain)
    }

    /// Window the certification checks run over.
    pub fn verify_domain(&self) -> Result<IntervalBox> {
        match &self.verify.domain {
            Some(window) => boxed(window),
            None => self.solve_domain(),
        }
    }

    /// Window used for contour export.
    pub fn plot_window(&self) -> Result<IntervalBox> {
        match &self.output.plot_window {
            Some(window) => boxed(window),
            None => self.verify_domain(),
        }
    }

    pub fn verifier_config(&self) -> VerifierConfig {
        VerifierConfig {
            eps_box: self.verify.eps_box,
            max_boxes: self.verify.max_boxes,
            rho: self.verify.rho,
            bisect_tol: self.verify.bisect_tol,
        }
    }

    /// The matrix Lyapunov right-hand side (identity when unspecified).
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.sampling.domain.len();
        match &self.verify.q {
            Some(rows) => {
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            None => DMatrix::identity(n, n),
        }
    }

    /// Builds the configured dictionary.
    pub fn build_dictionary(&self) -> Result<Dictionary> {
        let dict = match &self.dictionary {
            DictionarySpec::Monomial { j, k } => Dictionary::monomial_2d(*j, *k),
            DictionarySpec::MonomialCustom {
                state_dim,
                exponents,
            } => Dictionary::monomial_custom(*state_dim, exponents.clone()),
            DictionarySpec::Tanh {
                features,
                seed,
                weight_scale,
            } => Dictionary::tanh_random(
                self.sampling.domain.len(),
                *features,
                *seed,
                *weight_scale,
            ),
        };
        dict.map_err(|e| anyhow::anyhow!("dictionary construction failed: {e}"))
    }
}
