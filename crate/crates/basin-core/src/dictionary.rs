//! Observable dictionaries shared by the learning, PDE, and verification
//! stages.
//!
//! A dictionary is a list of scalar observables `z_i(x)`. The same object
//! must serve four roles: point evaluation, point gradients, and rigorous
//! interval enclosures of both — the verifier is only sound if the interval
//! routines enclose the point routines, so they are implemented from the
//! same expression trees and covered by enclosure property tests.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fmath;
use crate::interval::{Interval, IntervalBox};

/// Errors from dictionary construction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DictionaryError {
    /// Construction parameters were inconsistent.
    #[error("invalid dictionary: {0}")]
    Invalid(&'static str),
}

/// The families of observables supported.
#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// Monomials `x^e` with explicit exponent tuples, one per observable.
    Monomial { exponents: Vec<Vec<u32>> },
    /// Random-feature map `tanh(W x + b)`, optionally followed by the raw
    /// state coordinates.
    Tanh {
        weights: DMatrix<f64>,
        bias: DVector<f64>,
        append_state: bool,
        seed: u64,
        weight_scale: f64,
    },
}

/// A fixed set of scalar observables over an `n`-dimensional state.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    state_dim: usize,
    kind: Kind,
}

impl Dictionary {
    /// Planar monomial grid: observable `i` is `x1^p * x2^q` with
    /// `p = i mod j` and `q = i div j`, for `p < j`, `q < k`.
    ///
    /// The grid includes the constant (`i = 0`) and both coordinates.
    pub fn monomial_2d(j: usize, k: usize) -> Result<Self, DictionaryError> {
        if j < 2 || k < 2 {
            return Err(DictionaryError::Invalid(
                "planar monomial grid needs at least degree 1 per axis (j, k >= 2)",
            ));
        }
        let exponents = (0..j * k)
            .map(|i| alloc::vec![(i % j) as u32, (i / j) as u32])
            .collect();
        Ok(Self {
            state_dim: 2,
            kind: Kind::Monomial { exponents },
        })
    }

    /// Monomials with caller-chosen exponent tuples (`exponents[i][d]` is
    /// the power of `x_{d+1}` in observable `i`).
    pub fn monomial_custom(
        state_dim: usize,
        exponents: Vec<Vec<u32>>,
    ) -> Result<Self, DictionaryError> {
        if state_dim == 0 {
            return Err(DictionaryError::Invalid("state dimension must be positive"));
        }
        if exponents.is_empty() {
            return Err(DictionaryError::Invalid("dictionary must not be empty"));
        }
        if exponents.iter().any(|e| e.len() != state_dim) {
            return Err(DictionaryError::Invalid(
                "every exponent tuple must match the state dimension",
            ));
        }
        Ok(Self {
            state_dim,
            kind: Kind::Monomial { exponents },
        })
    }

    /// All monomials of total degree at most `max_degree` (graded
    /// lexicographic order), including the constant.
    pub fn monomial_total_degree(
        state_dim: usize,
        max_degree: u32,
    ) -> Result<Self, DictionaryError> {
        if state_dim == 0 {
            return Err(DictionaryError::Invalid("state dimension must be positive"));
        }
        let mut exponents = Vec::new();
        let mut stack = alloc::vec![0u32; state_dim];
        fn rec(
            d: usize,
            remaining: u32,
            stack: &mut Vec<u32>,
            out: &mut Vec<Vec<u32>>,
        ) {
            if d + 1 == stack.len() {
                for p in 0..=remaining {
                    stack[d] = p;
                    out.push(stack.clone());
                }
                stack[d] = 0;
                return;
            }
            for p in 0..=remaining {
                stack[d] = p;
                rec(d + 1, remaining - p, stack, out);
            }
            stack[d] = 0;
        }
        for total in 0..=max_degree {
            let mut of_degree = Vec::new();
            rec(0, total, &mut stack, &mut of_degree);
            exponents.extend(of_degree.into_iter().filter(|e| {
                e.iter().sum::<u32>() == total
            }));
        }
        Self::monomial_custom(state_dim, exponents)
    }

    /// Random tanh feature map `z_i(x) = tanh(w_i . x + b_i)` for
    /// `i < n_features`, followed by the raw coordinates `x_1..x_n`.
    /// Weights are uniform on `[-weight_scale, weight_scale]`, biases on
    /// `[-1, 1]`, drawn reproducibly from the seed.
    pub fn tanh_random(
        state_dim: usize,
        n_features: usize,
        seed: u64,
        weight_scale: f64,
    ) -> Result<Self, DictionaryError> {
        if state_dim == 0 {
            return Err(DictionaryError::Invalid("state dimension must be positive"));
        }
        if n_features == 0 {
            return Err(DictionaryError::Invalid(
                "tanh dictionary needs at least one feature",
            ));
        }
        if !(weight_scale > 0.0) {
            return Err(DictionaryError::Invalid("weight scale must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_dist = Uniform::new_inclusive(-weight_scale, weight_scale)
            .map_err(|_| DictionaryError::Invalid("weight scale must be finite"))?;
        let b_dist = Uniform::new_inclusive(-1.0, 1.0)
            .map_err(|_| DictionaryError::Invalid("bias range invalid"))?;
        // Row-major draw order: feature by feature, coordinate by coordinate.
        let mut weights = DMatrix::zeros(n_features, state_dim);
        for i in 0..n_features {
            for d in 0..state_dim {
                weights[(i, d)] = w_dist.sample(&mut rng);
            }
        }
        let bias = DVector::from_iterator(n_features, (0..n_features).map(|_| b_dist.sample(&mut rng)));
        Ok(Self {
            state_dim,
            kind: Kind::Tanh {
                weights,
                bias,
                append_state: true,
                seed,
                weight_scale,
            },
        })
    }

    /// Rebuilds a tanh dictionary from stored weights (used by file loaders;
    /// `seed`/`weight_scale` are carried for provenance only).
    pub fn tanh_from_parts(
        weights: DMatrix<f64>,
        bias: DVector<f64>,
        append_state: bool,
        seed: u64,
        weight_scale: f64,
    ) -> Result<Self, DictionaryError> {
        if weights.nrows() != bias.len() || weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(DictionaryError::Invalid(
                "tanh weights and bias shapes are inconsistent",
            ));
        }
        Ok(Self {
            state_dim: weights.ncols(),
            kind: Kind::Tanh {
                weights,
                bias,
                append_state,
                seed,
                weight_scale,
            },
        })
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Number of observables `N`.
    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::Monomial { exponents } => exponents.len(),
            Kind::Tanh {
                weights,
                append_state,
                ..
            } => weights.nrows() + if *append_state { self.state_dim } else { 0 },
        }
    }

    /// True when the dictionary has no observables (unreachable through the
    /// constructors, provided for completeness).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exponent tuples when this is a monomial dictionary.
    pub fn monomial_exponents(&self) -> Option<&[Vec<u32>]> {
        match &self.kind {
            Kind::Monomial { exponents } => Some(exponents),
            Kind::Tanh { .. } => None,
        }
    }

    /// Tanh parameters `(weights, bias, append_state, seed, weight_scale)`
    /// when this is a feature-map dictionary.
    pub fn tanh_parts(&self) -> Option<(&DMatrix<f64>, &DVector<f64>, bool, u64, f64)> {
        match &self.kind {
            Kind::Tanh {
                weights,
                bias,
                append_state,
                seed,
                weight_scale,
            } => Some((weights, bias, *append_state, *seed, *weight_scale)),
            Kind::Monomial { .. } => None,
        }
    }

    /// Index of the constant observable, if the dictionary contains one.
    pub fn constant_index(&self) -> Option<usize> {
        match &self.kind {
            Kind::Monomial { exponents } => {
                exponents.iter().position(|e| e.iter().all(|&p| p == 0))
            }
            Kind::Tanh { .. } => None,
        }
    }

    /// For each state coordinate `x_{d+1}`, the index of the observable that
    /// equals it exactly, or `None` if some coordinate is missing. Vector
    /// field extraction needs all of them.
    pub fn coordinate_indices(&self) -> Option<Vec<usize>> {
        match &self.kind {
            Kind::Monomial { exponents } => {
                let mut out = Vec::with_capacity(self.state_dim);
                for d in 0..self.state_dim {
                    let idx = exponents.iter().position(|e| {
                        e.iter()
                            .enumerate()
                            .all(|(dd, &p)| if dd == d { p == 1 } else { p == 0 })
                    })?;
                    out.push(idx);
                }
                Some(out)
            }
            Kind::Tanh {
                weights,
                append_state,
                ..
            } => {
                if *append_state {
                    Some((0..self.state_dim).map(|d| weights.nrows() + d).collect())
                } else {
                    None
                }
            }
        }
    }

    /// Evaluates all observables at a point.
    ///
    /// Panics if the point has the wrong dimension (internal misuse).
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.state_dim, "point dimension mismatch");
        match &self.kind {
            Kind::Monomial { exponents } => DVector::from_iterator(
                exponents.len(),
                exponents.iter().map(|e| {
                    e.iter()
                        .enumerate()
                        .fold(1.0, |acc, (d, &p)| acc * fmath::powu(x[d], p))
                }),
            ),
            Kind::Tanh {
                weights,
                bias,
                append_state,
                ..
            } => {
                let f = weights.nrows();
                let mut out = DVector::zeros(self.len());
                for i in 0..f {
                    let mut s = bias[i];
                    for d in 0..self.state_dim {
                        s += weights[(i, d)] * x[d];
                    }
                    out[i] = fmath::tanh(s);
                }
                if *append_state {
                    for d in 0..self.state_dim {
                        out[f + d] = x[d];
                    }
                }
                out
            }
        }
    }

    /// Gradients of all observables at a point: row `i` is `grad z_i(x)`.
    pub fn grad(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.state_dim, "point dimension mismatch");
        let n = self.state_dim;
        match &self.kind {
            Kind::Monomial { exponents } => {
                let mut out = DMatrix::zeros(exponents.len(), n);
                for (i, e) in exponents.iter().enumerate() {
                    for d in 0..n {
                        if e[d] == 0 {
                            continue;
                        }
                        let mut g = e[d] as f64 * fmath::powu(x[d], e[d] - 1);
                        for (dd, &p) in e.iter().enumerate() {
                            if dd != d {
                                g *= fmath::powu(x[dd], p);
                            }
                        }
                        out[(i, d)] = g;
                    }
                }
                out
            }
            Kind::Tanh {
                weights,
                bias,
                append_state,
                ..
            } => {
                let f = weights.nrows();
                let mut out = DMatrix::zeros(self.len(), n);
                for i in 0..f {
                    let mut s = bias[i];
                    for d in 0..n {
                        s += weights[(i, d)] * x[d];
                    }
                    let t = fmath::tanh(s);
                    let sech2 = 1.0 - t * t;
                    for d in 0..n {
                        out[(i, d)] = sech2 * weights[(i, d)];
                    }
                }
                if *append_state {
                    for d in 0..n {
                        out[(f + d, d)] = 1.0;
                    }
                }
                out
            }
        }
    }

    /// Interval enclosures of all observables over a box.
    pub fn eval_interval(&self, region: &IntervalBox) -> Vec<Interval> {
        assert_eq!(region.dim(), self.state_dim, "box dimension mismatch");
        match &self.kind {
            Kind::Monomial { exponents } => exponents
                .iter()
                .map(|e| {
                    e.iter()
                        .enumerate()
                        .fold(Interval::point(1.0), |acc, (d, &p)| {
                            if p == 0 {
                                acc
                            } else {
                                acc * region.interval(d).powi(p)
                            }
                        })
                })
                .collect(),
            Kind::Tanh {
                weights,
                bias,
                append_state,
                ..
            } => {
                let f = weights.nrows();
                let mut out = Vec::with_capacity(self.len());
                for i in 0..f {
                    out.push(self.tanh_arg_interval(weights, bias, i, region).tanh());
                }
                if *append_state {
                    for d in 0..self.state_dim {
                        out.push(region.interval(d));
                    }
                }
                out
            }
        }
    }

    /// Interval enclosures of all gradients over a box
    /// (`result[i][d]` encloses `dz_i/dx_{d+1}`).
    pub fn grad_interval(&self, region: &IntervalBox) -> Vec<Vec<Interval>> {
        assert_eq!(region.dim(), self.state_dim, "box dimension mismatch");
        let n = self.state_dim;
        let zero = Interval::point(0.0);
        match &self.kind {
            Kind::Monomial { exponents } => exponents
                .iter()
                .map(|e| {
                    (0..n)
                        .map(|d| {
                            if e[d] == 0 {
                                return zero;
                            }
                            let mut g = region
                                .interval(d)
                                .powi(e[d] - 1)
                                .scale(e[d] as f64);
                            for (dd, &p) in e.iter().enumerate() {
                                if dd != d && p > 0 {
                                    g = g * region.interval(dd).powi(p);
                                }
                            }
                            g
                        })
                        .collect()
                })
                .collect(),
            Kind::Tanh {
                weights,
                bias,
                append_state,
                ..
            } => {
                let f = weights.nrows();
                let one = Interval::point(1.0);
                let mut out = Vec::with_capacity(self.len());
                for i in 0..f {
                    let t = self.tanh_arg_interval(weights, bias, i, region).tanh();
                    // sech^2 = 1 - tanh^2; tanh^2 via powi keeps it in [0, 1].
                    let sech2 = one - t.powi(2);
                    out.push(
                        (0..n)
                            .map(|d| sech2.scale(weights[(i, d)]))
                            .collect(),
                    );
                }
                if *append_state {
                    for d in 0..n {
                        let mut row = alloc::vec![zero; n];
                        row[d] = one;
                        out.push(row);
                    }
                }
                out
            }
        }
    }

    /// Interval enclosure of the coefficient-weighted Hessian
    /// `sum_i c[i] * Hess z_i` over a box (`result[a][b]` encloses the
    /// `(a, b)` second partial of the combination). Combining before
    /// enclosing keeps the result at `n x n` regardless of dictionary size.
    ///
    /// Panics if `c` does not have one entry per observable.
    pub fn hess_combo_interval(&self, c: &[f64], region: &IntervalBox) -> Vec<Vec<Interval>> {
        assert_eq!(c.len(), self.len(), "coefficient length mismatch");
        assert_eq!(region.dim(), self.state_dim, "box dimension mismatch");
        let n = self.state_dim;
        let zero = Interval::point(0.0);
        let mut out = alloc::vec![alloc::vec![zero; n]; n];
        match &self.kind {
            Kind::Monomial { exponents } => {
                for (e, &ci) in exponents.iter().zip(c.iter()) {
                    if ci == 0.0 {
                        continue;
                    }
                    for a in 0..n {
                        for b in a..n {
                            let term = if a == b {
                                if e[a] < 2 {
                                    continue;
                                }
                                let mut t = region
                                    .interval(a)
                                    .powi(e[a] - 2)
                                    .scale((e[a] * (e[a] - 1)) as f64 * ci);
                                for (dd, &p) in e.iter().enumerate() {
                                    if dd != a && p > 0 {
                                        t = t * region.interval(dd).powi(p);
                                    }
                                }
                                t
                            } else {
                                if e[a] == 0 || e[b] == 0 {
                                    continue;
                                }
                                let mut t = region
                                    .interval(a)
                                    .powi(e[a] - 1)
                                    .scale((e[a] * e[b]) as f64 * ci);
                                t = t * region.interval(b).powi(e[b] - 1);
                                for (dd, &p) in e.iter().enumerate() {
                                    if dd != a && dd != b && p > 0 {
                                        t = t * region.interval(dd).powi(p);
                                    }
                                }
                                t
                            };
                            out[a][b] = out[a][b] + term;
                            if a != b {
                                out[b][a] = out[b][a] + term;
                            }
                        }
                    }
                }
            }
            Kind::Tanh { weights, bias, .. } => {
                // Appended state coordinates are linear, so only the tanh
                // features contribute second derivatives.
                let f = weights.nrows();
                for i in 0..f {
                    if c[i] == 0.0 {
                        continue;
                    }
                    let t = self.tanh_arg_interval(weights, bias, i, region).tanh();
                    let dd = tanh_second_derivative_range(t);
                    for a in 0..n {
                        for b in a..n {
                            let term = dd.scale(c[i] * weights[(i, a)] * weights[(i, b)]);
                            out[a][b] = out[a][b] + term;
                            if a != b {
                                out[b][a] = out[b][a] + term;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn tanh_arg_interval(
        &self,
        weights: &DMatrix<f64>,
        bias: &DVector<f64>,
        i: usize,
        region: &IntervalBox,
    ) -> Interval {
        let mut s = Interval::point(bias[i]);
        for d in 0..self.state_dim {
            s = s + region.interval(d).scale(weights[(i, d)]);
        }
        s
    }
}

/// Range of `phi(t) = -2 t (1 - t^2)` (the second derivative of `tanh` in
/// terms of `t = tanh(s)`) over a `t` interval. `phi` has interior critical
/// points at `t = +/- 1/sqrt(3)`, so the extrema are taken over both
/// endpoints and whichever critical points fall inside.
fn tanh_second_derivative_range(t: Interval) -> Interval {
    let phi = |t: f64| -2.0 * t * (1.0 - t * t);
    let mut lo = phi(t.lo()).min(phi(t.hi()));
    let mut hi = phi(t.lo()).max(phi(t.hi()));
    let crit = 1.0 / fmath::sqrt(3.0);
    for c in [-crit, crit] {
        if t.contains(c) {
            let v = phi(c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Interval::new(lo, hi).expect("tanh second derivative range is finite")
}

/// Shared handle used by models that must agree on the dictionary.
pub type SharedDictionary = Arc<Dictionary>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_grid_order_is_x1_fast() {
        let d = Dictionary::monomial_2d(3, 2).unwrap();
        let e = d.monomial_exponents().unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(e[0], &[0, 0]);
        assert_eq!(e[1], &[1, 0]);
        assert_eq!(e[2], &[2, 0]);
        assert_eq!(e[3], &[0, 1]);
        assert_eq!(e[4], &[1, 1]);
        assert_eq!(e[5], &[2, 1]);
        assert_eq!(d.constant_index(), Some(0));
        assert_eq!(d.coordinate_indices().unwrap(), &[1, 3]);
    }

    #[test]
    fn monomial_eval_and_grad_match_hand_values() {
        let d = Dictionary::monomial_2d(3, 3).unwrap();
        let z = d.eval(&[2.0, -1.0]);
        // Observable 5 is x1^2 x2, observable 7 is x1 x2^2.
        assert_relative_eq!(z[5], -4.0);
        assert_relative_eq!(z[7], 2.0);
        let g = d.grad(&[2.0, -1.0]);
        // d(x1^2 x2)/dx1 = 2 x1 x2 = -4; d/dx2 = x1^2 = 4.
        assert_relative_eq!(g[(5, 0)], -4.0);
        assert_relative_eq!(g[(5, 1)], 4.0);
        // Constant has zero gradient.
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn monomial_interval_handles_sign_spanning_boxes() {
        // x1^2 x2 over [-1, 1] x [0, 2]: true range [0, 2].
        let d = Dictionary::monomial_custom(2, alloc::vec![alloc::vec![2, 1]]).unwrap();
        let b = IntervalBox::from_bounds(&[(-1.0, 1.0), (0.0, 2.0)]).unwrap();
        let z = d.eval_interval(&b);
        // The enclosure must contain the true range and stay inside the
        // naive product bound [-2, 2].
        assert!(z[0].lo() <= 0.0 && z[0].hi() >= 2.0);
        assert!(z[0].lo() >= -2.0 - 1e-9 && z[0].hi() <= 2.0 + 1e-9);
        // Squaring first keeps the lower bound at zero.
        assert!(z[0].lo() >= -1e-9, "lower bound {} should be ~0", z[0].lo());
    }

    #[test]
    fn total_degree_dictionary_counts_match() {
        let d = Dictionary::monomial_total_degree(2, 3).unwrap();
        // 1 + 2 + 3 + 4 = 10 monomials up to total degree 3 in two variables.
        assert_eq!(d.len(), 10);
        assert_eq!(d.constant_index(), Some(0));
        assert!(d.coordinate_indices().is_some());
        let d3 = Dictionary::monomial_total_degree(3, 2).unwrap();
        assert_eq!(d3.len(), 10);
    }

    #[test]
    fn tanh_dictionary_is_reproducible_and_appends_state() {
        let a = Dictionary::tanh_random(2, 10, 99, 1.0).unwrap();
        let b = Dictionary::tanh_random(2, 10, 99, 1.0).unwrap();
        let c = Dictionary::tanh_random(2, 10, 100, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 12);
        assert_eq!(a.coordinate_indices().unwrap(), &[10, 11]);
        assert_eq!(a.constant_index(), None);
        let z = a.eval(&[0.3, -0.4]);
        assert_relative_eq!(z[10], 0.3);
        assert_relative_eq!(z[11], -0.4);
        let (w, bias, _, _, _) = a.tanh_parts().unwrap();
        let arg = w[(0, 0)] * 0.3 + w[(0, 1)] * -0.4 + bias[0];
        assert_relative_eq!(z[0], arg.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dicts = [
            Dictionary::monomial_2d(4, 4).unwrap(),
            Dictionary::tanh_random(2, 7, 3, 1.5).unwrap(),
        ];
        let x = [0.37, -0.82];
        let eps = 1e-6;
        for d in &dicts {
            let g = d.grad(&x);
            for dim in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[dim] += eps;
                xm[dim] -= eps;
                let zp = d.eval(&xp);
                let zm = d.eval(&xm);
                for i in 0..d.len() {
                    let fd = (zp[i] - zm[i]) / (2.0 * eps);
                    assert!(
                        (g[(i, dim)] - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                        "grad mismatch at observable {i}, dim {dim}: {} vs {fd}",
                        g[(i, dim)]
                    );
                }
            }
        }
    }

    #[test]
    fn interval_eval_encloses_point_eval_on_sampled_boxes() {
        let dicts = [
            Dictionary::monomial_2d(5, 5).unwrap(),
            Dictionary::tanh_random(2, 9, 17, 2.0).unwrap(),
        ];
        let b = IntervalBox::from_bounds(&[(-0.8, 0.5), (0.1, 1.3)]).unwrap();
        for d in &dicts {
            let zi = d.eval_interval(&b);
            let gi = d.grad_interval(&b);
            for (p0, p1) in [(0.0, 0.0), (0.25, 0.5), (0.5, 0.25), (1.0, 1.0), (0.9, 0.1)] {
                let x = [
                    b.interval(0).lo() + p0 * b.interval(0).width(),
                    b.interval(1).lo() + p1 * b.interval(1).width(),
                ];
                let z = d.eval(&x);
                let g = d.grad(&x);
                for i in 0..d.len() {
                    assert!(
                        zi[i].contains(z[i]),
                        "value enclosure failed at observable {i}"
                    );
                    for dim in 0..2 {
                        assert!(
                            gi[i][dim].contains(g[(i, dim)]),
                            "gradient enclosure failed at observable {i}, dim {dim}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(Dictionary::monomial_2d(1, 8).is_err());
        assert!(Dictionary::monomial_custom(2, alloc::vec![]).is_err());
        assert!(Dictionary::monomial_custom(2, alloc::vec![alloc::vec![1]]).is_err());
        assert!(Dictionary::tanh_random(2, 0, 1, 1.0).is_err());
        assert!(Dictionary::tanh_random(0, 5, 1, 1.0).is_err());
    }
}
