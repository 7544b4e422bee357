//! Learning a matrix representation of the Koopman generator from snapshot
//! data, and extracting a vector-field model from it.
//!
//! The pipeline never differentiates trajectories numerically. Instead it
//! computes, for each trajectory `x(.)` and observable `z_i`, the truncated
//! resolvent integral
//!
//! ```text
//! R[m, i] = integral over [0, tau_s] of exp(-mu s) z_i(x(s)) ds
//! ```
//!
//! by composite Gauss-Legendre quadrature on a natural cubic spline through
//! the sampled observable values, and then solves a resolvent identity for
//! the generator matrix `L`: with `B[m, i] = z_i(x(0))`, the matrices
//! `X = ((lambda - mu) R + B) / lambda` and `Y = (lambda mu R - lambda B) /
//! lambda` satisfy `X L ~= Y` whenever the dictionary span is approximately
//! invariant under the flow. `L` acts on coefficient vectors: if `h = Z .
//! zeta` then the generator applied to `h` is approximately `Z . (L zeta)`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dictionary::{Dictionary, SharedDictionary};
use crate::dynamics::TrajectoryDataset;
use crate::fmath;
use crate::interval::{Interval, IntervalBox};
use crate::linalg::{self, LinalgError};

/// Errors from the learning stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KoopmanError {
    /// Input shapes or parameters are inconsistent.
    #[error("invalid input: {0}")]
    Invalid(&'static str),
    /// Spline interpolation needs at least four snapshots per trajectory.
    #[error("trajectories have {got} snapshots; cubic spline quadrature needs at least 4")]
    TooFewSnapshots {
        /// Snapshots actually present.
        got: usize,
    },
    /// The dense solve failed.
    #[error("least-squares solve failed: {0}")]
    Solve(#[from] LinalgError),
    /// The dictionary lacks observables required by an extraction step.
    #[error("dictionary does not contain every state coordinate as an observable")]
    MissingCoordinates,
    /// Operation requires an equilibrium-corrected model.
    #[error("operation requires an equilibrium-corrected vector field model")]
    NotCorrected,
}

/// Truncated-resolvent matrix estimated from one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventMatrix {
    /// `M x N` matrix; entry `(m, i)` is the quadrature estimate of the
    /// resolvent integral of observable `i` along trajectory `m`.
    pub matrix: DMatrix<f64>,
    /// Resolvent abscissa `mu`.
    pub mu: f64,
    /// Gauss-Legendre nodes used per inter-snapshot panel.
    pub nodes_per_panel: usize,
}

/// Diagnostics of an SVD-based solve, kept for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Singular values kept.
    pub rank: usize,
    /// Singular values truncated.
    pub truncated: usize,
    /// Largest singular value.
    pub sigma_max: f64,
    /// Smallest kept singular value.
    pub sigma_min_kept: f64,
    /// Relative residual of the solve.
    pub residual_rel: f64,
}

impl From<&linalg::LstsqSolution> for SolveDiagnostics {
    fn from(s: &linalg::LstsqSolution) -> Self {
        Self {
            rank: s.rank,
            truncated: s.truncated,
            sigma_max: s.sigma_max,
            sigma_min_kept: s.sigma_min_kept,
            residual_rel: s.residual_rel,
        }
    }
}

/// Learned generator matrix with its provenance.
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    /// `N x N` generator matrix acting on dictionary coefficients.
    pub l: DMatrix<f64>,
    /// Yosida parameter `lambda` used in the solve.
    pub lambda: f64,
    /// Resolvent abscissa `mu`.
    pub mu: f64,
    /// Trajectory horizon the resolvent was truncated to.
    pub tau_s: f64,
    /// Relative SVD truncation threshold of the solve.
    pub svd_tol: f64,
    /// Dictionary the matrix is expressed in.
    pub dictionary: SharedDictionary,
    /// Solve diagnostics.
    pub diagnostics: SolveDiagnostics,
}

/// Stacks dictionary evaluations at the initial condition of every
/// trajectory: row `m` is `Z(x_m(0))`.
pub fn assemble_dictionary_matrix(
    dataset: &TrajectoryDataset,
    dictionary: &SharedDictionary,
) -> Result<DMatrix<f64>, KoopmanError> {
    if dataset.is_empty() {
        return Err(KoopmanError::Invalid("dataset has no trajectories"));
    }
    if dataset.state_dim() != dictionary.state_dim() {
        return Err(KoopmanError::Invalid(
            "dictionary and dataset disagree on the state dimension",
        ));
    }
    let m = dataset.len();
    let n = dictionary.len();
    let mut b = DMatrix::zeros(m, n);
    for (row, traj) in dataset.trajectories.iter().enumerate() {
        let z = dictionary.eval(traj.initial().as_slice());
        b.row_mut(row).copy_from(&z.transpose());
    }
    Ok(b)
}

/// Composite Gauss-Legendre estimate of the truncated resolvent integrals.
///
/// Each trajectory's observable time series is interpolated by a natural
/// cubic spline on the uniform snapshot grid; the integrand
/// `exp(-mu s) z_i(x(s))` is then integrated panel by panel with an
/// `nodes_per_panel`-point rule. A zero-horizon dataset (one snapshot per
/// trajectory) yields the zero matrix; otherwise at least four snapshots
/// are required for the spline.
pub fn resolvent_quadrature(
    dataset: &TrajectoryDataset,
    dictionary: &SharedDictionary,
    mu: f64,
    nodes_per_panel: usize,
) -> Result<ResolventMatrix, KoopmanError> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(KoopmanError::Invalid("resolvent abscissa mu must be positive"));
    }
    if nodes_per_panel == 0 {
        return Err(KoopmanError::Invalid("quadrature needs at least one node"));
    }
    if dataset.is_empty() {
        return Err(KoopmanError::Invalid("dataset has no trajectories"));
    }
    if dataset.state_dim() != dictionary.state_dim() {
        return Err(KoopmanError::Invalid(
            "dictionary and dataset disagree on the state dimension",
        ));
    }
    let m = dataset.len();
    let n = dictionary.len();
    let snapshots = dataset.snapshots_per_trajectory();
    if dataset
        .trajectories
        .iter()
        .any(|t| t.states.len() != snapshots)
    {
        return Err(KoopmanError::Invalid(
            "trajectories have inconsistent snapshot counts",
        ));
    }
    if snapshots == 1 {
        // Zero horizon: the integral over [0, 0] vanishes identically.
        return Ok(ResolventMatrix {
            matrix: DMatrix::zeros(m, n),
            mu,
            nodes_per_panel,
        });
    }
    if snapshots < 4 {
        return Err(KoopmanError::TooFewSnapshots { got: snapshots });
    }
    let h = 1.0 / dataset.gamma;
    let (nodes, weights) = linalg::gauss_legendre(nodes_per_panel);
    // Map nodes from [-1, 1] to panel offsets in [0, h] once.
    let offsets: Vec<f64> = nodes.iter().map(|&x| 0.5 * h * (x + 1.0)).collect();
    let half_h = 0.5 * h;
    let panels = snapshots - 1;
    // exp(-mu t) at every (panel, node), shared across observables and
    // trajectories.
    let mut decay = Vec::with_capacity(panels * nodes_per_panel);
    for k in 0..panels {
        let t_k = k as f64 * h;
        for (q, &u) in offsets.iter().enumerate() {
            decay.push(half_h * weights[q] * fmath::exp(-mu * (t_k + u)));
        }
    }
    let integrate_row = |traj: &crate::dynamics::Trajectory| -> DVector<f64> {
        // Observable series: snapshots x N.
        let mut zvals = DMatrix::zeros(snapshots, n);
        for (k, state) in traj.states.iter().enumerate() {
            let z = dictionary.eval(state.as_slice());
            zvals.row_mut(k).copy_from(&z.transpose());
        }
        let moments = linalg::natural_spline_moments(&zvals, h);
        let mut row = DVector::zeros(n);
        for k in 0..panels {
            for (q, &u) in offsets.iter().enumerate() {
                let w = decay[k * nodes_per_panel + q];
                for i in 0..n {
                    row[i] += w
                        * linalg::spline_eval(
                            zvals[(k, i)],
                            zvals[(k + 1, i)],
                            moments[(k, i)],
                            moments[(k + 1, i)],
                            h,
                            u,
                        );
                }
            }
        }
        row
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<DVector<f64>> = {
        use rayon::prelude::*;
        dataset.trajectories.par_iter().map(integrate_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<DVector<f64>> = dataset.trajectories.iter().map(integrate_row).collect();
    let mut matrix = DMatrix::zeros(m, n);
    for (r, row) in rows.iter().enumerate() {
        matrix.row_mut(r).copy_from(&row.transpose());
    }
    Ok(ResolventMatrix {
        matrix,
        mu,
        nodes_per_panel,
    })
}

/// Solves the resolvent identity for the generator matrix.
///
/// `b` and `resolvent` must come from the same dataset and dictionary.
/// `lambda` is the Yosida parameter; it must exceed `mu`, and in practice
/// should be much larger (1e8 by convention). Both sides of the identity
/// are pre-scaled by `1 / lambda` so the solve stays well-conditioned, and
/// the system is solved column-by-column in one SVD with relative truncation
/// `svd_tol`.
pub fn learn_generator(
    b: &DMatrix<f64>,
    resolvent: &ResolventMatrix,
    dictionary: SharedDictionary,
    lambda: f64,
    tau_s: f64,
    svd_tol: f64,
) -> Result<GeneratorModel, KoopmanError> {
    let mu = resolvent.mu;
    if !(lambda > mu) {
        return Err(KoopmanError::Invalid(
            "Yosida parameter lambda must exceed the resolvent abscissa mu",
        ));
    }
    if b.shape() != resolvent.matrix.shape() {
        return Err(KoopmanError::Invalid(
            "dictionary matrix and resolvent matrix shapes differ",
        ));
    }
    if b.ncols() != dictionary.len() {
        return Err(KoopmanError::Invalid(
            "matrix column count does not match the dictionary size",
        ));
    }
    if !(svd_tol >= 0.0) {
        return Err(KoopmanError::Invalid("svd tolerance must be non-negative"));
    }
    // X = ((lambda - mu) R + B) / lambda, Y = mu R - B  (already / lambda).
    let r = &resolvent.matrix;
    let x = r * ((lambda - mu) / lambda) + b / lambda;
    let y = r * mu - b;
    let sol = linalg::lstsq_svd(&x, &y, svd_tol)?;
    let diagnostics = SolveDiagnostics::from(&sol);
    Ok(GeneratorModel {
        l: sol.solution,
        lambda,
        mu,
        tau_s,
        svd_tol,
        dictionary,
        diagnostics,
    })
}

impl GeneratorModel {
    /// Applies the learned generator to the observable `h = Z . zeta` at a
    /// point: returns `Z(x) . (L zeta)`, the estimate of `grad h . f` there.
    pub fn apply(&self, zeta: &DVector<f64>, x: &[f64]) -> f64 {
        let lz = &self.l * zeta;
        self.dictionary.eval(x).dot(&lz)
    }

    /// The coefficient vector of the generator applied to observable `i`.
    pub fn column(&self, i: usize) -> DVector<f64> {
        self.l.column(i).into_owned()
    }
}

/// A vector field expressed in dictionary coordinates:
/// `f(x) = coeffs . Z(x) - offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldModel {
    /// `n x N` coefficient matrix.
    pub coeffs: DMatrix<f64>,
    /// Constant subtracted from the raw dictionary combination. Zero for
    /// freshly extracted models and for corrected models whose dictionary
    /// contains a constant observable (the correction folds in there).
    pub offset: DVector<f64>,
    /// Whether [`correct_equilibrium`] has pinned `f(0) = 0`.
    pub corrected: bool,
    /// Dictionary the coefficients refer to.
    pub dictionary: SharedDictionary,
}

impl VectorFieldModel {
    /// Wraps an exact linear field `f(x) = A x` over the coordinate
    /// dictionary — handy as a ground-truth model in verification tests.
    pub fn from_linear(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "linear field matrix must be square");
        let exponents = (0..n)
            .map(|j| {
                let mut e = alloc::vec![0u32; n];
                e[j] = 1;
                e
            })
            .collect();
        let dictionary: SharedDictionary =
            Arc::new(Dictionary::monomial_custom(n, exponents).expect("coordinate dictionary"));
        Self {
            coeffs: a.clone(),
            offset: DVector::zeros(n),
            corrected: true,
            dictionary,
        }
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Evaluates the modeled field at a point.
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        &self.coeffs * self.dictionary.eval(x) - &self.offset
    }

    /// Interval enclosure of the field over a box.
    ///
    /// Intersects the direct dictionary enclosure with the mean-value form
    /// `f(m) + Jf(region) . (region - m)` around the box midpoint; the
    /// latter shrinks quadratically with the box, which keeps wide-feature
    /// dictionaries (many terms whose direct enclosures do not cancel)
    /// usable in branch-and-bound.
    pub fn eval_interval(&self, region: &IntervalBox) -> Vec<Interval> {
        let z = self.dictionary.eval_interval(region);
        let naive: Vec<Interval> = (0..self.dim())
            .map(|i| {
                let mut acc = Interval::point(-self.offset[i]);
                for (k, zi) in z.iter().enumerate() {
                    let c = self.coeffs[(i, k)];
                    if c != 0.0 {
                        acc = acc + zi.scale(c);
                    }
                }
                acc
            })
            .collect();
        let mid = region.midpoint();
        let fm = self.eval(&mid);
        let jac = self.interval_jacobian(region);
        naive
            .into_iter()
            .enumerate()
            .map(|(i, direct)| {
                let mut acc = Interval::point(fm[i]);
                for j in 0..region.dim() {
                    let dev = region.interval(j) - Interval::point(mid[j]);
                    acc = acc + jac[i][j] * dev;
                }
                direct.tighten(acc)
            })
            .collect()
    }

    /// Jacobian of the modeled field at a point.
    pub fn jacobian_at(&self, x: &[f64]) -> DMatrix<f64> {
        &self.coeffs * self.dictionary.grad(x)
    }

    /// Interval enclosure of the Jacobian over a box
    /// (`result[i][j]` encloses `df_i/dx_j`).
    ///
    /// Each entry is the intersection of the direct enclosure with the
    /// mean-value form `Jf(m) + sum_e Hf_i(region)[j][e] . (region_e - m_e)`
    /// built from the combined-Hessian enclosure of each component.
    pub fn interval_jacobian(&self, region: &IntervalBox) -> Vec<Vec<Interval>> {
        let gz = self.dictionary.grad_interval(region);
        let n = self.dim();
        let dims = self.dictionary.state_dim();
        let mid = region.midpoint();
        let jm = self.jacobian_at(&mid);
        let devs: Vec<Interval> = (0..dims)
            .map(|e| region.interval(e) - Interval::point(mid[e]))
            .collect();
        (0..n)
            .map(|i| {
                let row_coeffs: Vec<f64> = (0..self.dictionary.len())
                    .map(|k| self.coeffs[(i, k)])
                    .collect();
                let hess = self.dictionary.hess_combo_interval(&row_coeffs, region);
                (0..dims)
                    .map(|j| {
                        let mut acc = Interval::point(0.0);
                        for (k, row) in gz.iter().enumerate() {
                            let c = self.coeffs[(i, k)];
                            if c != 0.0 {
                                acc = acc + row[j].scale(c);
                            }
                        }
                        let mut centered = Interval::point(jm[(i, j)]);
                        for (e, dev) in devs.iter().enumerate() {
                            centered = centered + hess[j][e] * *dev;
                        }
                        acc.tighten(centered)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Reads the vector field out of a generator model.
///
/// The generator applied to the coordinate observable `x_j` is exactly
/// `f_j`, so the columns of `L` at the coordinate indices are the dictionary
/// coefficients of the learned field. Errors if the dictionary does not
/// contain every coordinate.
pub fn extract_vector_field(g: &GeneratorModel) -> Result<VectorFieldModel, KoopmanError> {
    let idx = g
        .dictionary
        .coordinate_indices()
        .ok_or(KoopmanError::MissingCoordinates)?;
    let n = g.dictionary.state_dim();
    let nn = g.dictionary.len();
    let mut coeffs = DMatrix::zeros(n, nn);
    for (j, &col) in idx.iter().enumerate() {
        for k in 0..nn {
            coeffs[(j, k)] = g.l[(k, col)];
        }
    }
    Ok(VectorFieldModel {
        coeffs,
        offset: DVector::zeros(n),
        corrected: false,
        dictionary: g.dictionary.clone(),
    })
}

/// Pins the model's equilibrium to the origin: returns a model with
/// `f(0) = 0` exactly (in floating point).
///
/// When the dictionary has a constant observable the residue `f(0)` is
/// folded into its coefficient; otherwise it is kept as an explicit offset.
/// The Jacobian is unchanged either way. Idempotent.
pub fn correct_equilibrium(model: &VectorFieldModel) -> VectorFieldModel {
    let n = model.dim();
    let origin = alloc::vec![0.0; n];
    let residue = model.eval(&origin);
    let mut out = model.clone();
    out.corrected = true;
    if residue.iter().all(|&v| v == 0.0) {
        return out;
    }
    match model.dictionary.constant_index() {
        Some(c0) => {
            for i in 0..n {
                out.coeffs[(i, c0)] -= residue[i];
            }
        }
        None => {
            out.offset += residue;
        }
    }
    out
}

/// Linearization `A = d f / d x` at the origin of a corrected model.
pub fn linearize_at_origin(model: &VectorFieldModel) -> Result<DMatrix<f64>, KoopmanError> {
    if !model.corrected {
        return Err(KoopmanError::NotCorrected);
    }
    let origin = alloc::vec![0.0; model.dim()];
    Ok(model.jacobian_at(&origin))
}
