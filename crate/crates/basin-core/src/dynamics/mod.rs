//! Continuous-time dynamical systems and trajectory data.
//!
//! The learning stages only ever see snapshot tables produced here; the
//! certification stage additionally queries the system as an oracle for
//! vector-field values and interval Jacobians on boxes.

mod dopri5;

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fmath;
use crate::interval::{Interval, IntervalBox};

pub use dopri5::{integrate, DenseTrajectory};

/// Default per-step tolerance used by the sampling helpers; tight enough
/// that integration error is negligible against quadrature and fit error.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Errors raised by integration and sampling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    /// The adaptive controller could not meet the tolerance with a
    /// representable step (stiffness or finite-time blow-up).
    #[error("step size underflow at t = {t}: the trajectory is too stiff or escapes in finite time")]
    StepSizeUnderflow {
        /// Time reached before the controller gave up.
        t: f64,
    },
    /// A state component became NaN or infinite.
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState {
        /// Time of the offending step.
        t: f64,
    },
    /// Inconsistent dimensions or parameters.
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    /// Interpolation was requested outside the integrated time span.
    #[error("time {t} is outside the integrated span [0, {t_end}]")]
    OutOfSpan {
        /// Requested time.
        t: f64,
        /// End of the available span.
        t_end: f64,
    },
    /// A builtin system name was not recognized.
    #[error("unknown builtin system `{0}`")]
    UnknownSystem(String),
}

/// A continuous-time autonomous system `x' = f(x)`.
pub trait OdeSystem: Sync {
    /// Short identifier used in reports and file metadata.
    fn name(&self) -> &str;

    /// State dimension.
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `dx`. Both slices have length [`Self::dim`].
    fn eval(&self, x: &[f64], dx: &mut [f64]);

    /// Interval enclosure of the Jacobian over a box, row-major
    /// (`result[i][j]` encloses `df_i/dx_j`). `None` when the system cannot
    /// provide rigorous derivative bounds.
    fn interval_jacobian(&self, _region: &IntervalBox) -> Option<Vec<Vec<Interval>>> {
        None
    }

    /// Convenience wrapper returning `f(x)` as a fresh vector.
    fn eval_vec(&self, x: &[f64]) -> DVector<f64> {
        let mut dx = DVector::zeros(self.dim());
        self.eval(x, dx.as_mut_slice());
        dx
    }
}

impl<T: OdeSystem + ?Sized> OdeSystem for &T {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (**self).eval(x, dx)
    }
    fn interval_jacobian(&self, region: &IntervalBox) -> Option<Vec<Vec<Interval>>> {
        (**self).interval_jacobian(region)
    }
}

/// The benchmark systems shipped with the crate.
///
/// All have an asymptotically stable equilibrium at the origin (for suitable
/// parameters) and rigorous interval Jacobians.
#[derive(Debug, Clone)]
pub enum Builtin {
    /// Time-reversed Van der Pol oscillator:
    /// `x1' = -x2`, `x2' = x1 - (1 - x1^2) x2`.
    /// Its region of attraction is the interior of the forward-time limit
    /// cycle.
    VdpReversed,
    /// Single machine against an infinite bus, damping 0.5, power angle
    /// `a = pi/3`, shifted so the equilibrium sits at the origin:
    /// `x1' = x2`, `x2' = -0.5 x2 - (sin(x1 + a) - sin(a))`.
    TwoMachine,
    /// Linear system `x' = A x`.
    Linear(DMatrix<f64>),
    /// One-dimensional linear system `x' = a x` (stable for `a < 0`).
    ScalarLinear(f64),
}

impl Builtin {
    /// Looks up a parameterless builtin by its name.
    pub fn from_name(name: &str) -> Result<Self, DynamicsError> {
        match name {
            "vdp_reversed" => Ok(Self::VdpReversed),
            "two_machine" => Ok(Self::TwoMachine),
            other => Err(DynamicsError::UnknownSystem(String::from(other))),
        }
    }

    /// Power angle of the two-machine benchmark.
    pub const TWO_MACHINE_ANGLE: f64 = core::f64::consts::FRAC_PI_3;
}

impl OdeSystem for Builtin {
    fn name(&self) -> &str {
        match self {
            Self::VdpReversed => "vdp_reversed",
            Self::TwoMachine => "two_machine",
            Self::Linear(_) => "linear",
            Self::ScalarLinear(_) => "scalar_linear",
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::VdpReversed | Self::TwoMachine => 2,
            Self::Linear(a) => a.nrows(),
            Self::ScalarLinear(_) => 1,
        }
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        match self {
            Self::VdpReversed => {
                dx[0] = -x[1];
                dx[1] = x[0] - (1.0 - x[0] * x[0]) * x[1];
            }
            Self::TwoMachine => {
                let a = Self::TWO_MACHINE_ANGLE;
                dx[0] = x[1];
                dx[1] = -0.5 * x[1] - (fmath::sin(x[0] + a) - fmath::sin(a));
            }
            Self::Linear(m) => {
                for i in 0..m.nrows() {
                    let mut acc = 0.0;
                    for j in 0..m.ncols() {
                        acc += m[(i, j)] * x[j];
                    }
                    dx[i] = acc;
                }
            }
            Self::ScalarLinear(a) => {
                dx[0] = a * x[0];
            }
        }
    }

    fn interval_jacobian(&self, region: &IntervalBox) -> Option<Vec<Vec<Interval>>> {
        let zero = Interval::point(0.0);
        match self {
            Self::VdpReversed => {
                let x1 = region.interval(0);
                let x2 = region.interval(1);
                let one = Interval::point(1.0);
                let two = Interval::point(2.0);
                Some(alloc::vec![
                    alloc::vec![zero, Interval::point(-1.0)],
                    alloc::vec![one + two * x1 * x2, x1.powi(2) - one],
                ])
            }
            Self::TwoMachine => {
                let a = Interval::point(Self::TWO_MACHINE_ANGLE);
                let x1 = region.interval(0);
                Some(alloc::vec![
                    alloc::vec![zero, Interval::point(1.0)],
                    alloc::vec![-((x1 + a).cos()), Interval::point(-0.5)],
                ])
            }
            Self::Linear(m) => Some(
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| Interval::point(m[(i, j)])).collect())
                    .collect(),
            ),
            Self::ScalarLinear(a) => Some(alloc::vec![alloc::vec![Interval::point(*a)]]),
        }
    }
}

/// Snapshot record of one trajectory: states observed at uniform times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Snapshot times, starting at zero with uniform spacing.
    pub times: Vec<f64>,
    /// State at each snapshot time. `states[0]` is the initial condition.
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    /// The initial condition.
    pub fn initial(&self) -> &DVector<f64> {
        &self.states[0]
    }
}

/// A set of trajectories sampled on a common snapshot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    /// One record per initial condition, in sampling order.
    pub trajectories: Vec<Trajectory>,
    /// Snapshot rate in Hz (snapshots are `1/gamma` apart).
    pub gamma: f64,
    /// Horizon of each trajectory.
    pub tau_s: f64,
    /// Box the initial conditions were drawn from.
    pub domain: IntervalBox,
}

impl TrajectoryDataset {
    /// Number of trajectories.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    /// True when the dataset holds no trajectories.
    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Number of snapshots per trajectory (including the initial state).
    pub fn snapshots_per_trajectory(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.states.len())
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }
}

/// The uniform snapshot grid `0, 1/gamma, ..., floor(gamma tau_s)/gamma`.
pub fn snapshot_times(gamma: f64, tau_s: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(gamma > 0.0) || tau_s < 0.0 || !gamma.is_finite() || !tau_s.is_finite() {
        return Err(DynamicsError::InvalidInput(
            "snapshot rate must be positive and the horizon non-negative",
        ));
    }
    // Guard against 249.999... from a decimal gamma * tau_s product.
    let steps = fmath::floor(gamma * tau_s + 1e-9) as usize;
    Ok((0..=steps).map(|k| k as f64 / gamma).collect())
}

/// Integrates every initial condition over `[0, tau_s]` and records states
/// at the uniform snapshot grid. The integrator lands on each snapshot time
/// exactly (steps are clamped, not interpolated), so snapshot accuracy equals
/// step accuracy.
pub fn sample_trajectories(
    sys: &dyn OdeSystem,
    inits: &[DVector<f64>],
    gamma: f64,
    tau_s: f64,
    domain: IntervalBox,
    tol: f64,
) -> Result<TrajectoryDataset, DynamicsError> {
    let times = snapshot_times(gamma, tau_s)?;
    if inits.is_empty() {
        return Err(DynamicsError::InvalidInput("no initial conditions supplied"));
    }
    for x0 in inits {
        if x0.len() != sys.dim() {
            return Err(DynamicsError::InvalidInput(
                "initial condition dimension does not match the system",
            ));
        }
    }
    let run_one = |x0: &DVector<f64>| -> Result<Trajectory, DynamicsError> {
        let states = dopri5::integrate_checkpoints(sys, x0, &times, tol)?;
        Ok(Trajectory {
            times: times.clone(),
            states,
        })
    };
    #[cfg(feature = "parallel")]
    let trajectories = {
        use rayon::prelude::*;
        inits
            .par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let trajectories = inits.iter().map(run_one).collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectoryDataset {
        trajectories,
        gamma,
        tau_s,
        domain,
    })
}

/// Draws `m` initial conditions i.i.d. uniform over the box, reproducibly
/// from the seed.
pub fn sample_initial_conditions_iid(
    domain: &IntervalBox,
    m: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Uniform<f64>> = domain
        .dims()
        .iter()
        .map(|iv| Uniform::new_inclusive(iv.lo(), iv.hi()).expect("valid interval bounds"))
        .collect();
    (0..m)
        .map(|_| DVector::from_iterator(domain.dim(), dists.iter().map(|d| d.sample(&mut rng))))
        .collect()
}

/// Places `per_axis^n` initial conditions on a uniform grid including the
/// box corners (or the midpoint when `per_axis == 1`).
pub fn sample_initial_conditions_grid(domain: &IntervalBox, per_axis: usize) -> Vec<DVector<f64>> {
    assert!(per_axis >= 1, "grid needs at least one point per axis");
    let n = domain.dim();
    let coords: Vec<Vec<f64>> = domain
        .dims()
        .iter()
        .map(|iv| {
            if per_axis == 1 {
                alloc::vec![iv.midpoint()]
            } else {
                (0..per_axis)
                    .map(|k| iv.lo() + iv.width() * k as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let total = per_axis.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut index = alloc::vec![0usize; n];
    loop {
        out.push(DVector::from_iterator(
            n,
            index.iter().enumerate().map(|(d, &k)| coords[d][k]),
        ));
        let mut d = n;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            index[d] += 1;
            if index[d] < per_axis {
                break;
            }
            index[d] = 0;
        }
    }
}

/// Shared handle to a system for use across threads.
pub type SharedSystem = Arc<dyn OdeSystem + Send + Sync>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_fields_match_hand_evaluations() {
        let vdp = Builtin::VdpReversed;
        let mut dx = [0.0; 2];
        vdp.eval(&[1.0, 1.0], &mut dx);
        assert_eq!(dx, [-1.0, 1.0]);
        vdp.eval(&[0.0, 0.0], &mut dx);
        assert_eq!(dx, [0.0, 0.0]);

        let tm = Builtin::TwoMachine;
        tm.eval(&[0.0, 1.0], &mut dx);
        assert_relative_eq!(dx[0], 1.0);
        assert_relative_eq!(dx[1], -0.5, epsilon = 1e-15);
        tm.eval(&[0.0, 0.0], &mut dx);
        assert_eq!(dx, [0.0, 0.0]);
    }

    #[test]
    fn builtin_jacobians_enclose_finite_differences() {
        let systems: [Builtin; 2] = [Builtin::VdpReversed, Builtin::TwoMachine];
        let b = IntervalBox::from_bounds(&[(0.3, 0.3), (-0.7, -0.7)]).unwrap();
        let x = [0.3, -0.7];
        let eps = 1e-6;
        for sys in &systems {
            let jac = sys.interval_jacobian(&b).unwrap();
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += eps;
                xm[j] -= eps;
                let fp = sys.eval_vec(&xp);
                let fm = sys.eval_vec(&xm);
                for i in 0..2 {
                    let fd = (fp[i] - fm[i]) / (2.0 * eps);
                    let iv = jac[i][j];
                    assert!(
                        iv.lo() - 1e-8 <= fd && fd <= iv.hi() + 1e-8,
                        "{}: J[{i}][{j}] = [{}, {}] does not enclose {fd}",
                        sys.name(),
                        iv.lo(),
                        iv.hi()
                    );
                }
            }
        }
    }

    #[test]
    fn snapshot_grid_has_expected_size_and_spacing() {
        let times = snapshot_times(50.0, 5.0).unwrap();
        assert_eq!(times.len(), 251);
        assert_eq!(times[0], 0.0);
        assert_relative_eq!(times[250], 5.0, epsilon = 1e-12);
        assert_relative_eq!(times[1] - times[0], 0.02, epsilon = 1e-15);
    }

    #[test]
    fn iid_sampling_is_reproducible_and_in_bounds() {
        let domain = IntervalBox::from_bounds(&[(-1.2, 1.2), (-1.2, 1.2)]).unwrap();
        let a = sample_initial_conditions_iid(&domain, 25, 42);
        let b = sample_initial_conditions_iid(&domain, 25, 42);
        let c = sample_initial_conditions_iid(&domain, 25, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for x in &a {
            assert!(domain.contains_point(x.as_slice()));
        }
    }

    #[test]
    fn grid_sampling_covers_corners() {
        let domain = IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let pts = sample_initial_conditions_grid(&domain, 5);
        assert_eq!(pts.len(), 25);
        assert_eq!(pts[0].as_slice(), &[-1.0, -1.0]);
        assert_eq!(pts[24].as_slice(), &[1.0, 1.0]);
    }
}
