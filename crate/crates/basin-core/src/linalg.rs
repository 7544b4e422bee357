//! Dense linear-algebra helpers shared by the learning and certificate
//! stages: SVD least squares (truncated and ridge-regularized), Gauss-Legendre
//! quadrature nodes, and natural cubic spline second-derivative moments.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fmath;

/// Errors from the dense solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    /// Shapes of the operands are incompatible.
    #[error("shape mismatch: {context}")]
    ShapeMismatch {
        /// Human-readable description of the offending shapes.
        context: &'static str,
    },
    /// The SVD routine failed to converge (pathological input).
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    /// All singular values were truncated; the system carries no information.
    #[error("matrix is numerically zero at the requested tolerance")]
    RankZero,
}

/// Outcome of an SVD-based least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    /// Minimum-norm solution matrix (one column per right-hand side).
    pub solution: DMatrix<f64>,
    /// Number of singular values kept.
    pub rank: usize,
    /// Number of singular values discarded by the tolerance.
    pub truncated: usize,
    /// Largest singular value of the system matrix.
    pub sigma_max: f64,
    /// Smallest singular value that was kept.
    pub sigma_min_kept: f64,
    /// Relative Frobenius residual `||A X - B|| / max(||B||, eps)`.
    pub residual_rel: f64,
}

fn svd_parts(
    a: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>), LinalgError> {
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(LinalgError::SvdFailed)?;
    let u = svd.u.ok_or(LinalgError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(LinalgError::SvdFailed)?;
    Ok((u, svd.singular_values, v_t))
}

/// Minimum-norm least-squares solve `A X ~= B` via SVD with relative
/// truncation: singular values below `rel_tol * sigma_max` are dropped.
pub fn lstsq_svd(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<LstsqSolution, LinalgError> {
    if a.nrows() != b.nrows() {
        return Err(LinalgError::ShapeMismatch {
            context: "row counts of system matrix and right-hand side differ",
        });
    }
    let (u, sigma, v_t) = svd_parts(a)?;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Err(LinalgError::RankZero);
    }
    let cutoff = rel_tol * sigma_max;
    // U^T B once, then scale the kept rows by 1/sigma.
    let mut utb = u.transpose() * b;
    let mut rank = 0;
    let mut sigma_min_kept = f64::INFINITY;
    for (i, &s) in sigma.iter().enumerate() {
        if s > cutoff {
            rank += 1;
            sigma_min_kept = sigma_min_kept.min(s);
            let inv = 1.0 / s;
            for j in 0..utb.ncols() {
                utb[(i, j)] *= inv;
            }
        } else {
            for j in 0..utb.ncols() {
                utb[(i, j)] = 0.0;
            }
        }
    }
    if rank == 0 {
        return Err(LinalgError::RankZero);
    }
    let solution = v_t.transpose() * utb;
    let residual = a * &solution - b;
    let b_norm = b.norm();
    let residual_rel = residual.norm() / b_norm.max(f64::MIN_POSITIVE);
    Ok(LstsqSolution {
        solution,
        rank,
        truncated: sigma.len() - rank,
        sigma_max,
        sigma_min_kept,
        residual_rel,
    })
}

/// Ridge-regularized least squares for a single right-hand side:
/// minimizes `||A x - b||^2 + ridge_rel * sigma_max^2 * ||x||^2`.
///
/// The regularization scales with the spectrum so a single relative knob
/// works across problems of very different conditioning.
pub fn lstsq_ridge(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    ridge_rel: f64,
) -> Result<LstsqSolution, LinalgError> {
    if a.nrows() != b.nrows() {
        return Err(LinalgError::ShapeMismatch {
            context: "row counts of system matrix and right-hand side differ",
        });
    }
    let (u, sigma, v_t) = svd_parts(a)?;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Err(LinalgError::RankZero);
    }
    let ridge = ridge_rel * sigma_max * sigma_max;
    let mut utb = u.transpose() * b;
    let mut sigma_min_kept = f64::INFINITY;
    for (i, &s) in sigma.iter().enumerate() {
        let factor = s / (s * s + ridge);
        utb[i] *= factor;
        if s > 0.0 {
            sigma_min_kept = sigma_min_kept.min(s);
        }
    }
    let solution = v_t.transpose() * utb;
    let residual = a * &solution - b;
    let residual_rel = residual.norm() / b.norm().max(f64::MIN_POSITIVE);
    let rank = sigma.iter().filter(|&&s| s > 0.0).count();
    Ok(LstsqSolution {
        solution: DMatrix::from_column_slice(solution.len(), 1, solution.as_slice()),
        rank,
        truncated: sigma.len() - rank,
        sigma_max,
        sigma_min_kept,
        residual_rel,
    })
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre polynomial from the
/// Chebyshev-based initial guess. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut nodes = alloc::vec![0.0f64; n];
    let mut weights = alloc::vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = fmath::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: evaluates P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if fmath::abs(dx) < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Second-derivative moments of natural cubic splines through uniformly
/// spaced samples, one spline per column of `values`.
///
/// Row `k` of the result holds the spline second derivative at sample `k`;
/// the first and last rows are zero (natural boundary conditions). The
/// symmetric tridiagonal system (diagonal 4, off-diagonal 1) is factored once
/// and reused across columns.
pub fn natural_spline_moments(values: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let rows = values.nrows();
    let cols = values.ncols();
    assert!(rows >= 3, "a cubic spline needs at least three samples");
    assert!(h > 0.0, "sample spacing must be positive");
    let interior = rows - 2;
    // Thomas forward sweep on the constant tridiagonal (1, 4, 1).
    let mut cp = alloc::vec![0.0f64; interior];
    cp[0] = 1.0 / 4.0;
    for i in 1..interior {
        cp[i] = 1.0 / (4.0 - cp[i - 1]);
    }
    let mut moments = DMatrix::zeros(rows, cols);
    let scale = 6.0 / (h * h);
    let mut dp = alloc::vec![0.0f64; interior];
    for j in 0..cols {
        for i in 0..interior {
            let d = scale * (values[(i, j)] - 2.0 * values[(i + 1, j)] + values[(i + 2, j)]);
            dp[i] = if i == 0 {
                d / 4.0
            } else {
                (d - dp[i - 1]) / (4.0 - cp[i - 1])
            };
        }
        let mut prev = 0.0;
        for i in (0..interior).rev() {
            let m = dp[i] - cp[i] * prev;
            moments[(i + 1, j)] = m;
            prev = m;
        }
    }
    moments
}

/// Evaluates the natural cubic spline on panel `k` (between samples `k` and
/// `k+1`) at offset `u` in `[0, h]`, given sample values and moments.
#[inline]
pub fn spline_eval(z_k: f64, z_k1: f64, m_k: f64, m_k1: f64, h: f64, u: f64) -> f64 {
    let b = (z_k1 - z_k) / h - h * (2.0 * m_k + m_k1) / 6.0;
    z_k + u * (b + u * (0.5 * m_k + u * (m_k1 - m_k) / (6.0 * h)))
}
