//! Lyapunov machinery: the quadratic certificate at the linearization and
//! dictionary-coefficient candidates obtained by collocating the Lyapunov or
//! Zubov PDE with the learned generator (or directly with the identified
//! vector field).
//!
//! The Zubov equation `grad W . f = -eta (1 - W)` is linear in the
//! coefficient vector `theta` once `W = Z . theta`, so a candidate is the
//! solution of a stacked weighted least-squares system: one row per interior
//! collocation point and one per boundary anchor. The boundary anchors pin
//! the solution — with a constant observable in the dictionary, `W = 1`
//! solves the interior rows exactly, and only the origin row `W(0) = 0`
//! (plus optional exterior rows `W = 1` far outside the region of interest)
//! selects the meaningful solution.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::fmath;
use crate::dictionary::SharedDictionary;
use crate::interval::{Interval, IntervalBox};
use crate::koopman::{GeneratorModel, SolveDiagnostics, VectorFieldModel};
use crate::linalg::{self, LinalgError};

/// Errors from the certificate stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    /// The linearization has an eigenvalue with non-negative real part, so
    /// no quadratic certificate exists and the pipeline cannot proceed.
    #[error("linearization is not Hurwitz (max eigenvalue real part {max_real}); certification is impossible")]
    NonHurwitz {
        /// Largest real part among the eigenvalues.
        max_real: f64,
    },
    /// The requested weighting matrix `Q` is not symmetric positive definite.
    #[error("Q must be symmetric positive definite")]
    QNotSpd,
    /// The computed `P` failed its definiteness or residual check.
    #[error("Lyapunov solve failed a posteriori checks: {0}")]
    BadSolve(&'static str),
    /// Dense solver failure.
    #[error("least-squares solve failed: {0}")]
    Solve(#[from] LinalgError),
    /// Parameters or shapes are inconsistent.
    #[error("invalid input: {0}")]
    Invalid(&'static str),
    /// Interior collocation set is empty.
    #[error("interior collocation set is empty")]
    EmptyInterior,
    /// Boundary anchor set is empty or lacks the origin row.
    #[error("boundary anchors must include the origin with value 0")]
    MissingOriginAnchor,
}

/// Quadratic Lyapunov function `V_P(x) = x^T P x` for the linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLyapunov {
    /// Symmetric positive definite certificate matrix.
    pub p: DMatrix<f64>,
    /// Right-hand side used in the solve (`P A + A^T P = -Q`).
    pub q: DMatrix<f64>,
}

impl QuadraticLyapunov {
    /// `x^T P x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.p.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.p[(i, j)] * x[j];
            }
        }
        acc
    }

    /// `2 P x`.
    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        let n = self.p.nrows();
        DVector::from_fn(n, |i, _| {
            2.0 * (0..n).map(|j| self.p[(i, j)] * x[j]).sum::<f64>()
        })
    }

    /// Interval enclosure of `x^T P x` over a box, exploiting symmetry so
    /// diagonal terms use the tight even-power rule. The direct enclosure
    /// is intersected with the exact Taylor expansion about the midpoint,
    /// `V(m) + 2 (P m) . d + d^T P d` with `d = region - m`, whose loss is
    /// confined to the second-order cross terms.
    pub fn eval_interval(&self, region: &IntervalBox) -> Interval {
        let n = self.p.nrows();
        let mut acc = Interval::point(0.0);
        for i in 0..n {
            acc = acc + region.interval(i).powi(2).scale(self.p[(i, i)]);
            for j in (i + 1)..n {
                acc = acc
                    + (region.interval(i) * region.interval(j)).scale(2.0 * self.p[(i, j)]);
            }
        }
        let mid = region.midpoint();
        let gm = self.grad(&mid);
        let devs: Vec<Interval> = (0..n)
            .map(|i| region.interval(i) - Interval::point(mid[i]))
            .collect();
        let mut centered = Interval::point(self.eval(&mid));
        for i in 0..n {
            centered = centered + devs[i].scale(gm[i]);
            centered = centered + devs[i].powi(2).scale(self.p[(i, i)]);
            for j in (i + 1)..n {
                centered = centered + (devs[i] * devs[j]).scale(2.0 * self.p[(i, j)]);
            }
        }
        acc.tighten(centered)
    }

    /// Interval enclosure of the gradient `2 P x` over a box.
    pub fn grad_interval(&self, region: &IntervalBox) -> Vec<Interval> {
        let n = self.p.nrows();
        (0..n)
            .map(|i| {
                let mut acc = Interval::point(0.0);
                for j in 0..n {
                    acc = acc + region.interval(j).scale(2.0 * self.p[(i, j)]);
                }
                acc
            })
            .collect()
    }
}

fn is_symmetric(m: &DMatrix<f64>, rel: f64) -> bool {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > rel * scale {
                return false;
            }
        }
    }
    true
}

/// Solves `P A + A^T P = -Q` for the quadratic certificate.
///
/// The system is vectorized with Kronecker products —
/// `(I (x) A^T + A^T (x) I) vec(P) = -vec(Q)` in column-major `vec` — and
/// solved by LU. The result is symmetrized, residual-checked to 1e-10
/// relative, and verified positive definite by Cholesky. A non-Hurwitz `A`
/// is rejected up front via its eigenvalues.
pub fn solve_matrix_lyapunov(
    a_hat: &DMatrix<f64>,
    q: DMatrix<f64>,
) -> Result<QuadraticLyapunov, CertificateError> {
    let n = a_hat.nrows();
    if a_hat.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(CertificateError::Invalid(
            "A and Q must be square with matching dimensions",
        ));
    }
    if !is_symmetric(&q, 1e-12) || Cholesky::new(q.clone()).is_none() {
        return Err(CertificateError::QNotSpd);
    }
    let eigs = a_hat.clone().complex_eigenvalues();
    let max_real = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if max_real >= 0.0 {
        return Err(CertificateError::NonHurwitz { max_real });
    }
    // K = I (x) A^T + A^T (x) I acting on vec(P) (column-major stacking):
    // vec(A^T P) = (I (x) A^T) vec(P), vec(P A) = (A^T (x) I) vec(P).
    let at = a_hat.transpose();
    let mut k = DMatrix::zeros(n * n, n * n);
    for col in 0..n {
        for row in 0..n {
            // Block (col, col) accumulates A^T (from I (x) A^T).
            for r in 0..n {
                k[(col * n + r, col * n + row)] += at[(r, row)];
            }
            // Kron(A^T, I): block (i, j) is at[(i, j)] * I.
            for r in 0..n {
                k[(row * n + r, col * n + r)] += at[(row, col)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, q.iter().map(|&v| -v));
    let lu = k.lu();
    let vec_p = lu
        .solve(&rhs)
        .ok_or(CertificateError::BadSolve("Kronecker system is singular"))?;
    let p_raw = DMatrix::from_iterator(n, n, vec_p.iter().copied());
    let p = (&p_raw + p_raw.transpose()) * 0.5;
    // Residual check against the defining equation.
    let residual = &p * a_hat + a_hat.transpose() * &p + &q;
    if residual.norm() > 1e-10 * q.norm() {
        return Err(CertificateError::BadSolve("residual exceeds tolerance"));
    }
    if Cholesky::new(p.clone()).is_none() {
        return Err(CertificateError::BadSolve("P is not positive definite"));
    }
    Ok(QuadraticLyapunov { p, q })
}

/// The forcing function `eta(x) = r ||x||^2` of the PDE right-hand side.
pub fn eta(x: &[f64], r: f64) -> f64 {
    r * x.iter().map(|&v| v * v).sum::<f64>()
}

/// Which PDE a candidate solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateForm {
    /// `grad V . f = -eta`; unbounded analogue, boundary anchor `V(0) = 0`.
    Lyapunov,
    /// `grad W . f = -eta (1 - W)`; ranges in `[0, 1)` on the attraction
    /// basin with boundary anchors `W(0) = 0` and exterior values 1.
    Zubov,
}

/// Residual summary of the stacked solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitStats {
    /// Unweighted RMS residual over interior collocation rows.
    pub interior_rms: f64,
    /// Unweighted RMS residual over boundary anchor rows.
    pub boundary_rms: f64,
    /// Interior row count.
    pub interior_count: usize,
    /// Boundary row count.
    pub boundary_count: usize,
}

/// A Lyapunov or Zubov candidate in dictionary coordinates.
#[derive(Debug, Clone)]
pub struct LyapunovCandidate {
    /// Coefficient vector: `V(x) = Z(x) . theta`.
    pub theta: DVector<f64>,
    /// Dictionary the coefficients refer to.
    pub dictionary: SharedDictionary,
    /// Which PDE the candidate was fitted to.
    pub form: CandidateForm,
    /// Forcing coefficient in `eta(x) = r ||x||^2`.
    pub r: f64,
    /// Boundary weight used in the stacked solve.
    pub lambda_b: f64,
    /// Residuals of the fit.
    pub fit_stats: FitStats,
    /// Diagnostics of the SVD solve.
    pub diagnostics: SolveDiagnostics,
}

impl LyapunovCandidate {
    /// `V(x) = Z(x) . theta`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.dictionary.eval(x).dot(&self.theta)
    }

    /// `grad V(x) = (grad Z(x))^T theta`.
    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        self.dictionary.grad(x).transpose() * &self.theta
    }

    /// Interval enclosure of `V` over a box.
    ///
    /// The direct dictionary enclosure is intersected with the mean-value
    /// form `V(m) + grad V(region) . (region - m)`, which stays tight even
    /// when the dictionary combines many non-cancelling features.
    pub fn eval_interval(&self, region: &IntervalBox) -> Interval {
        let z = self.dictionary.eval_interval(region);
        let mut acc = Interval::point(0.0);
        for (k, zi) in z.iter().enumerate() {
            let c = self.theta[k];
            if c != 0.0 {
                acc = acc + zi.scale(c);
            }
        }
        let mid = region.midpoint();
        let grad = self.grad_interval(region);
        let mut centered = Interval::point(self.eval(&mid));
        for (d, g) in grad.iter().enumerate() {
            let dev = region.interval(d) - Interval::point(mid[d]);
            centered = centered + *g * dev;
        }
        acc.tighten(centered)
    }

    /// Interval enclosure of `grad V` over a box, intersecting the direct
    /// enclosure with the mean-value form built from the combined-Hessian
    /// enclosure of the candidate.
    pub fn grad_interval(&self, region: &IntervalBox) -> Vec<Interval> {
        let gz = self.dictionary.grad_interval(region);
        let n = self.dictionary.state_dim();
        let mid = region.midpoint();
        let gm = self.grad(&mid);
        let hess = self
            .dictionary
            .hess_combo_interval(self.theta.as_slice(), region);
        let devs: Vec<Interval> = (0..n)
            .map(|e| region.interval(e) - Interval::point(mid[e]))
            .collect();
        (0..n)
            .map(|d| {
                let mut acc = Interval::point(0.0);
                for (k, row) in gz.iter().enumerate() {
                    let c = self.theta[k];
                    if c != 0.0 {
                        acc = acc + row[d].scale(c);
                    }
                }
                let mut centered = Interval::point(gm[d]);
                for (e, dev) in devs.iter().enumerate() {
                    centered = centered + hess[d][e] * *dev;
                }
                acc.tighten(centered)
            })
            .collect()
    }
}

/// How interior PDE rows are produced.
enum InteriorRows<'a> {
    /// `Z(x) L` via the learned generator.
    Operator(&'a GeneratorModel),
    /// `grad Z(x) . f(x)` via the identified vector field.
    Direct(&'a VectorFieldModel),
}

impl InteriorRows<'_> {
    fn dictionary(&self) -> &SharedDictionary {
        match self {
            Self::Operator(g) => &g.dictionary,
            Self::Direct(v) => &v.dictionary,
        }
    }

    /// The row vector whose dot with `theta` approximates `grad V . f` at x.
    fn directional_row(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Self::Operator(g) => g.l.tr_mul(&g.dictionary.eval(x)),
            Self::Direct(v) => v.dictionary.grad(x) * v.eval(x),
        }
    }
}

struct StackedProblem {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    interior_count: usize,
    boundary_count: usize,
}

fn assemble_stacked(
    rows: InteriorRows<'_>,
    form: CandidateForm,
    interior: &[DVector<f64>],
    boundary: &[(DVector<f64>, f64)],
    lambda_b: f64,
    r: f64,
) -> Result<StackedProblem, CertificateError> {
    let dict = rows.dictionary();
    let n_obs = dict.len();
    let dim = dict.state_dim();
    if interior.is_empty() {
        return Err(CertificateError::EmptyInterior);
    }
    if !(lambda_b > 0.0) || !(r > 0.0) {
        return Err(CertificateError::Invalid(
            "boundary weight and forcing coefficient must be positive",
        ));
    }
    let origin_anchored = boundary
        .iter()
        .any(|(y, b)| y.iter().all(|&v| v == 0.0) && *b == 0.0);
    if !origin_anchored {
        return Err(CertificateError::MissingOriginAnchor);
    }
    if interior.iter().any(|x| x.len() != dim) || boundary.iter().any(|(y, _)| y.len() != dim) {
        return Err(CertificateError::Invalid(
            "collocation point dimension does not match the dictionary",
        ));
    }
    let m = interior.len();
    let p = boundary.len();
    let wi = fmath::sqrt(1.0 / m as f64);
    let wb = fmath::sqrt(lambda_b / p as f64);
    let mut matrix = DMatrix::zeros(m + p, n_obs);
    let mut rhs = DVector::zeros(m + p);
    for (row, x) in interior.iter().enumerate() {
        let e = eta(x.as_slice(), r);
        let mut coeff = rows.directional_row(x.as_slice());
        if form == CandidateForm::Zubov {
            // grad W . f = -eta (1 - W)  <=>  [row - eta Z] theta = -eta.
            coeff -= dict.eval(x.as_slice()) * e;
        }
        matrix.row_mut(row).copy_from(&(coeff * wi).transpose());
        rhs[row] = -e * wi;
    }
    for (j, (y, b)) in boundary.iter().enumerate() {
        let z = dict.eval(y.as_slice());
        matrix.row_mut(m + j).copy_from(&(z * wb).transpose());
        rhs[m + j] = b * wb;
    }
    Ok(StackedProblem {
        matrix,
        rhs,
        interior_count: m,
        boundary_count: p,
    })
}

fn finish_candidate(
    rows: InteriorRows<'_>,
    form: CandidateForm,
    interior: &[DVector<f64>],
    boundary: &[(DVector<f64>, f64)],
    lambda_b: f64,
    r: f64,
    ridge: f64,
) -> Result<LyapunovCandidate, CertificateError> {
    let dict = rows.dictionary().clone();
    let problem = assemble_stacked(rows, form, interior, boundary, lambda_b, r)?;
    // Dictionary columns span wildly different magnitudes on physical
    // domains (high-degree monomials dwarf low-degree ones), so a ridge
    // tied to the raw spectrum would flatten the low-order directions that
    // carry the solution. Equilibrate to unit column norm, solve there, and
    // map the coefficients back.
    let mut scaled = problem.matrix.clone();
    let mut scales = DVector::from_element(scaled.ncols(), 1.0);
    for j in 0..scaled.ncols() {
        let norm = scaled.column(j).norm();
        if norm > 0.0 {
            scales[j] = norm;
            scaled.column_mut(j).unscale_mut(norm);
        }
    }
    let sol = linalg::lstsq_ridge(&scaled, &problem.rhs, ridge)?;
    let theta = DVector::from_fn(scales.len(), |i, _| sol.solution[(i, 0)] / scales[i]);
    let m = problem.interior_count;
    let p = problem.boundary_count;
    let residual = &problem.matrix * &theta - &problem.rhs;
    // Undo the row weights so the stats report plain PDE/anchor residuals.
    let wi = fmath::sqrt(1.0 / m as f64);
    let wb = fmath::sqrt(lambda_b / p as f64);
    let interior_rms =
        fmath::sqrt(residual.rows(0, m).norm_squared() / (wi * wi) / m as f64);
    let boundary_rms =
        fmath::sqrt(residual.rows(m, p).norm_squared() / (wb * wb) / p as f64);
    Ok(LyapunovCandidate {
        theta,
        dictionary: dict,
        form,
        r,
        lambda_b,
        fit_stats: FitStats {
            interior_rms,
            boundary_rms,
            interior_count: m,
            boundary_count: p,
        },
        diagnostics: SolveDiagnostics::from(&sol),
    })
}

/// Fits a Zubov candidate with generator rows.
///
/// `boundary` must contain the origin anchor `(0, 0)`; exterior anchors with
/// value 1 pin the solution scale whenever the collocation domain has an
/// escape boundary and should be supplied by the caller in that case (the
/// pipeline always does). They are not mandatory because globally stable
/// systems have no finite point where the true `W` reaches 1, and forcing
/// one distorts the fit.
pub fn zubov_lsq(
    g: &GeneratorModel,
    interior: &[DVector<f64>],
    boundary: &[(DVector<f64>, f64)],
    lambda_b: f64,
    r: f64,
    ridge: f64,
) -> Result<LyapunovCandidate, CertificateError> {
    finish_candidate(
        InteriorRows::Operator(g),
        CandidateForm::Zubov,
        interior,
        boundary,
        lambda_b,
        r,
        ridge,
    )
}

/// Fits a Zubov candidate with direct vector-field rows (`grad Z . f`),
/// the alternate route that skips the generator matrix.
pub fn zubov_lsq_direct(
    field: &VectorFieldModel,
    interior: &[DVector<f64>],
    boundary: &[(DVector<f64>, f64)],
    lambda_b: f64,
    r: f64,
    ridge: f64,
) -> Result<LyapunovCandidate, CertificateError> {
    finish_candidate(
        InteriorRows::Direct(field),
        CandidateForm::Zubov,
        interior,
        boundary,
        lambda_b,
        r,
        ridge,
    )
}

/// Fits a Lyapunov candidate (`grad V . f = -eta`) with generator rows and
/// the single boundary anchor `V(0) = 0`.
pub fn lyapunov_lsq(
    g: &GeneratorModel,
    interior: &[DVector<f64>],
    lambda_b: f64,
    r: f64,
    ridge: f64,
) -> Result<LyapunovCandidate, CertificateError> {
    let origin = DVector::zeros(g.dictionary.state_dim());
    let boundary = [(origin, 0.0)];
    finish_candidate(
        InteriorRows::Operator(g),
        CandidateForm::Lyapunov,
        interior,
        &boundary,
        lambda_b,
        r,
        ridge,
    )
}

/// Lyapunov fit with directional rows from the identified field instead of
/// generator rows; the alternative route offered alongside [`zubov_lsq_direct`].
pub fn lyapunov_lsq_direct(
    field: &VectorFieldModel,
    interior: &[DVector<f64>],
    lambda_b: f64,
    r: f64,
    ridge: f64,
) -> Result<LyapunovCandidate, CertificateError> {
    let origin = DVector::zeros(field.dictionary.state_dim());
    let boundary = [(origin, 0.0)];
    finish_candidate(
        InteriorRows::Direct(field),
        CandidateForm::Lyapunov,
        interior,
        &boundary,
        lambda_b,
        r,
        ridge,
    )
}

/// PDE residual statistics of a candidate on a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    /// Root-mean-square PDE residual.
    pub rms: f64,
    /// Largest absolute PDE residual.
    pub max: f64,
    /// Fraction of points where a Zubov candidate leaves `[-0.05, 1.05]`
    /// (always 0 for Lyapunov candidates, whose range is unconstrained).
    pub out_of_range_fraction: f64,
}

/// Evaluates the fitted PDE's residual at each point with the generator
/// rows, plus the Zubov range diagnostic.
pub fn residual_stats(
    candidate: &LyapunovCandidate,
    g: &GeneratorModel,
    points: &[DVector<f64>],
) -> ResidualStats {
    let mut sq = 0.0;
    let mut max = 0.0f64;
    let mut out = 0usize;
    for x in points {
        let row = g.l.tr_mul(&g.dictionary.eval(x.as_slice()));
        let directional = row.dot(&candidate.theta);
        let e = eta(x.as_slice(), candidate.r);
        let value = candidate.eval(x.as_slice());
        let residual = match candidate.form {
            CandidateForm::Lyapunov => directional + e,
            CandidateForm::Zubov => {
                if !(-0.05..=1.05).contains(&value) {
                    out += 1;
                }
                directional + e * (1.0 - value)
            }
        };
        sq += residual * residual;
        max = max.max(residual.abs());
    }
    let count = points.len().max(1);
    ResidualStats {
        rms: fmath::sqrt(sq / count as f64),
        max,
        out_of_range_fraction: out as f64 / count as f64,
    }
}
