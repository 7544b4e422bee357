//! Adaptive Dormand-Prince 5(4) integrator with dense output.
//!
//! The embedded pair takes seven stages per step, reuses the last stage as
//! the first of the next (FSAL), and controls the step from the difference
//! between the fifth- and fourth-order solutions. Dense output uses cubic
//! Hermite interpolation on accepted steps, which is more than accurate
//! enough at the tolerances this crate runs (1e-8 and below): snapshot
//! queries land on step endpoints exactly and never use the interpolant.

use alloc::vec::Vec;

use nalgebra::DVector;

use super::{DynamicsError, OdeSystem};

// Dormand-Prince coefficients. c-values are implicit in the a-rows because
// the system is autonomous.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order weights (also the seventh a-row, giving FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between fifth- and fourth-order weights (error estimator).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;
const SAFETY: f64 = 0.9;

/// One accepted integration step, with endpoint derivatives for Hermite
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Step start time.
    pub t0: f64,
    /// Step end time.
    pub t1: f64,
    /// State at `t0`.
    pub y0: DVector<f64>,
    /// State at `t1`.
    pub y1: DVector<f64>,
    /// Derivative at `t0`.
    pub f0: DVector<f64>,
    /// Derivative at `t1`.
    pub f1: DVector<f64>,
}

/// Adaptive stepper carrying FSAL state between calls.
pub(super) struct Stepper<'a> {
    sys: &'a dyn OdeSystem,
    tol: f64,
    t: f64,
    y: DVector<f64>,
    /// `f(y)` at the current state (FSAL cache).
    f: DVector<f64>,
    h: f64,
    /// Stages 2..=6; stage 1 is the FSAL cache `f`.
    k: [DVector<f64>; 5],
    scratch: DVector<f64>,
}

impl<'a> Stepper<'a> {
    pub(super) fn new(sys: &'a dyn OdeSystem, x0: &DVector<f64>, tol: f64) -> Self {
        let n = sys.dim();
        let mut f = DVector::zeros(n);
        sys.eval(x0.as_slice(), f.as_mut_slice());
        // Conservative initial guess; the controller converges within a
        // couple of steps either way.
        let h = 1e-3 * (1.0 + x0.norm()) / (1.0 + f.norm());
        Self {
            sys,
            tol,
            t: 0.0,
            y: x0.clone(),
            f,
            h,
            k: core::array::from_fn(|_| DVector::zeros(n)),
            scratch: DVector::zeros(n),
        }
    }

    pub(super) fn state(&self) -> &DVector<f64> {
        &self.y
    }

    fn stage(&mut self, coeffs: &[(f64, usize)], h: f64, out: usize) {
        self.scratch.copy_from(&self.y);
        for &(a, idx) in coeffs {
            if idx == 0 {
                self.scratch.axpy(h * a, &self.f, 1.0);
            } else {
                self.scratch.axpy(h * a, &self.k[idx - 1], 1.0);
            }
        }
        let (evals, dest) = (&self.scratch, &mut self.k[out - 1]);
        self.sys.eval(evals.as_slice(), dest.as_mut_slice());
    }

    /// Advances to exactly `t_target`, invoking `on_step` for each accepted
    /// step. Steps are clamped so the final one ends at `t_target`.
    pub(super) fn advance_to(
        &mut self,
        t_target: f64,
        mut on_step: impl FnMut(StepRecord),
    ) -> Result<(), DynamicsError> {
        let n = self.y.len();
        let reach_tol = 1e-13 * t_target.abs().max(1.0);
        while self.t < t_target - reach_tol {
            let h = self.h.min(t_target - self.t);
            // Six fresh stages; self.f is the FSAL first stage.
            self.stage(&[(A21, 0)], h, 1);
            self.stage(&[(A31, 0), (A32, 1)], h, 2);
            self.stage(&[(A41, 0), (A42, 1), (A43, 2)], h, 3);
            self.stage(&[(A51, 0), (A52, 1), (A53, 2), (A54, 3)], h, 4);
            self.stage(&[(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)], h, 5);
            // Fifth-order solution: weights B over stages 1, 3, 4, 5, 6,
            // which live at f, k[1], k[2], k[3], k[4].
            let mut y1 = self.y.clone();
            y1.axpy(h * B1, &self.f, 1.0);
            y1.axpy(h * B3, &self.k[1], 1.0);
            y1.axpy(h * B4, &self.k[2], 1.0);
            y1.axpy(h * B5, &self.k[3], 1.0);
            y1.axpy(h * B6, &self.k[4], 1.0);
            // Stage 7 at (t + h, y1); FSAL candidate.
            let mut f1 = DVector::zeros(n);
            self.sys.eval(y1.as_slice(), f1.as_mut_slice());
            // Weighted RMS error of the embedded difference.
            let mut err_sq = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * self.f[i]
                        + E3 * self.k[1][i]
                        + E4 * self.k[2][i]
                        + E5 * self.k[3][i]
                        + E6 * self.k[4][i]
                        + E7 * f1[i]);
                let sc = self.tol * (1.0 + self.y[i].abs().max(y1[i].abs()));
                err_sq += (e / sc) * (e / sc);
            }
            let err = crate::fmath::sqrt(err_sq / n as f64);
            if !err.is_finite() || !y1.iter().all(|v| v.is_finite()) {
                // Blow-up inside the step: shrink hard and retry.
                self.h = h * MIN_SHRINK;
                if self.h < f64::EPSILON * self.t.abs().max(1.0) {
                    return Err(DynamicsError::NonFiniteState { t: self.t });
                }
                continue;
            }
            let factor = if err == 0.0 {
                MAX_GROWTH
            } else {
                (SAFETY * crate::fmath::powf(err, -0.2)).clamp(MIN_SHRINK, MAX_GROWTH)
            };
            if err <= 1.0 {
                let t1 = if t_target - (self.t + h) < reach_tol {
                    t_target
                } else {
                    self.t + h
                };
                let y0 = core::mem::replace(&mut self.y, y1);
                let f0 = core::mem::replace(&mut self.f, f1);
                let record = StepRecord {
                    t0: self.t,
                    t1,
                    y0,
                    y1: self.y.clone(),
                    f0,
                    f1: self.f.clone(),
                };
                self.t = t1;
                self.h = h * factor;
                on_step(record);
            } else {
                self.h = h * factor;
                if self.h < 4.0 * f64::EPSILON * self.t.abs().max(1.0) {
                    return Err(DynamicsError::StepSizeUnderflow { t: self.t });
                }
            }
        }
        Ok(())
    }
}

/// Trajectory with dense (continuous-time) query support.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    steps: Vec<StepRecord>,
}

impl DenseTrajectory {
    /// End time of the integrated span.
    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t1)
    }

    /// State at the end of the span.
    pub fn end_state(&self) -> &DVector<f64> {
        &self.steps.last().expect("non-empty trajectory").y1
    }

    /// Accepted steps, in time order.
    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// State at an arbitrary time in `[0, t_end]` by cubic Hermite
    /// interpolation on the containing step.
    pub fn interpolate(&self, t: f64) -> Result<DVector<f64>, DynamicsError> {
        let t_end = self.t_end();
        if t < 0.0 || t > t_end {
            return Err(DynamicsError::OutOfSpan { t, t_end });
        }
        let idx = self
            .steps
            .partition_point(|s| s.t1 < t)
            .min(self.steps.len() - 1);
        let s = &self.steps[idx];
        let h = s.t1 - s.t0;
        if h <= 0.0 {
            return Ok(s.y1.clone());
        }
        let u = ((t - s.t0) / h).clamp(0.0, 1.0);
        // Hermite basis in u.
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        let mut out = &s.y0 * h00;
        out.axpy(h * h10, &s.f0, 1.0);
        out.axpy(h01, &s.y1, 1.0);
        out.axpy(h * h11, &s.f1, 1.0);
        Ok(out)
    }
}

/// Integrates `x' = f(x)` from `x0` over `[0, t_end]` with per-step mixed
/// absolute/relative tolerance `tol`, returning the dense trajectory.
pub fn integrate(
    sys: &dyn OdeSystem,
    x0: &DVector<f64>,
    t_end: f64,
    tol: f64,
) -> Result<DenseTrajectory, DynamicsError> {
    if x0.len() != sys.dim() {
        return Err(DynamicsError::InvalidInput(
            "initial condition dimension does not match the system",
        ));
    }
    if !(t_end >= 0.0) || !(tol > 0.0) {
        return Err(DynamicsError::InvalidInput(
            "horizon must be non-negative and tolerance positive",
        ));
    }
    let mut stepper = Stepper::new(sys, x0, tol);
    let mut steps = Vec::new();
    stepper.advance_to(t_end, |s| steps.push(s))?;
    if steps.is_empty() {
        // Zero-length span: synthesize a degenerate record.
        let f = sys.eval_vec(x0.as_slice());
        steps.push(StepRecord {
            t0: 0.0,
            t1: 0.0,
            y0: x0.clone(),
            y1: x0.clone(),
            f0: f.clone(),
            f1: f,
        });
    }
    Ok(DenseTrajectory { steps })
}

/// Integrates from `x0` and returns the state at each checkpoint time.
/// `times` must start at `0.0` and increase; the stepper lands on every
/// checkpoint exactly.
pub(super) fn integrate_checkpoints(
    sys: &dyn OdeSystem,
    x0: &DVector<f64>,
    times: &[f64],
    tol: f64,
) -> Result<Vec<DVector<f64>>, DynamicsError> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(DynamicsError::InvalidInput(
            "checkpoint times must start at zero",
        ));
    }
    let mut stepper = Stepper::new(sys, x0, tol);
    let mut out = Vec::with_capacity(times.len());
    out.push(x0.clone());
    for &t in &times[1..] {
        stepper.advance_to(t, |_| {})?;
        let y = stepper.state().clone();
        if !y.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFiniteState { t });
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::Builtin;
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    /// Exact flow of x' = A x for the rotation-decay matrix used below.
    fn spiral_exact(t: f64) -> (f64, f64) {
        // A = [[-0.2, -1], [1, -0.2]]: decay e^{-0.2 t} with rotation t.
        let r = (-0.2 * t).exp();
        (r * t.cos(), r * t.sin())
    }

    fn spiral() -> Builtin {
        Builtin::Linear(DMatrix::from_row_slice(2, 2, &[-0.2, -1.0, 1.0, -0.2]))
    }

    #[test]
    fn integrates_linear_spiral_to_tolerance() {
        let sys = spiral();
        let x0 = DVector::from_row_slice(&[1.0, 0.0]);
        let traj = integrate(&sys, &x0, 10.0, 1e-10).unwrap();
        let (ex, ey) = spiral_exact(10.0);
        let end = traj.end_state();
        assert_relative_eq!(end[0], ex, epsilon = 1e-7);
        assert_relative_eq!(end[1], ey, epsilon = 1e-7);
    }

    #[test]
    fn tightening_tolerance_reduces_error_like_a_high_order_method() {
        let sys = spiral();
        let x0 = DVector::from_row_slice(&[1.0, 0.0]);
        let (ex, ey) = spiral_exact(10.0);
        let mut errors = Vec::new();
        for tol in [1e-5, 1e-7, 1e-9, 1e-11] {
            let traj = integrate(&sys, &x0, 10.0, tol).unwrap();
            let end = traj.end_state();
            let err = ((end[0] - ex).powi(2) + (end[1] - ey).powi(2)).sqrt();
            errors.push(err);
        }
        // Errors drop substantially with each 100x tolerance tightening and
        // end far below the loosest request.
        for w in errors.windows(2) {
            assert!(w[1] < w[0] * 0.5, "errors not decreasing: {errors:?}");
        }
        assert!(errors[3] < 1e-9, "final error {} too large", errors[3]);
    }

    #[test]
    fn dense_output_matches_exact_solution_between_steps() {
        let sys = spiral();
        let x0 = DVector::from_row_slice(&[1.0, 0.0]);
        let traj = integrate(&sys, &x0, 5.0, 1e-10).unwrap();
        for k in 0..50 {
            let t = 0.1 * k as f64;
            let y = traj.interpolate(t).unwrap();
            let (ex, ey) = spiral_exact(t);
            assert!(
                ((y[0] - ex).powi(2) + (y[1] - ey).powi(2)).sqrt() < 1e-6,
                "dense output error at t = {t}"
            );
        }
        assert!(traj.interpolate(5.0 + 1e-6).is_err());
        assert!(traj.interpolate(-1e-9).is_err());
    }

    #[test]
    fn checkpoints_hit_snapshot_times_exactly() {
        let sys = spiral();
        let x0 = DVector::from_row_slice(&[1.0, 0.0]);
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let states = integrate_checkpoints(&sys, &x0, &times, 1e-10).unwrap();
        assert_eq!(states.len(), 51);
        for (k, y) in states.iter().enumerate() {
            let (ex, ey) = spiral_exact(times[k]);
            assert_relative_eq!(y[0], ex, epsilon = 1e-7);
            assert_relative_eq!(y[1], ey, epsilon = 1e-7);
        }
    }

    #[test]
    fn finite_time_blowup_is_reported_not_looped() {
        // x' = 1 + x^2 blows up at t = pi/2 from x(0) = 0.
        struct Riccati;
        impl OdeSystem for Riccati {
            fn name(&self) -> &str {
                "riccati"
            }
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, x: &[f64], dx: &mut [f64]) {
                dx[0] = 1.0 + x[0] * x[0];
            }
        }
        let x0 = DVector::from_row_slice(&[0.0]);
        let err = integrate(&Riccati, &x0, 10.0, 1e-8).unwrap_err();
        assert!(matches!(
            err,
            DynamicsError::StepSizeUnderflow { .. } | DynamicsError::NonFiniteState { .. }
        ));
    }
}
