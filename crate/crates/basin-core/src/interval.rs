//! Interval arithmetic over `f64` endpoints and axis-aligned boxes.
//!
//! Every operation returns an interval that contains the true image of the
//! inputs. Rational operations (`+`, `-`, `*`, division, integer powers) are
//! evaluated with exact endpoint formulas and then widened; transcendental
//! functions are evaluated with the platform math library and widened by a
//! relative outward inflation that dominates the library's rounding error.
//! The inflation makes enclosures slightly conservative, never unsound, which
//! is the direction the branch-and-bound verifier needs.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::fmath;

/// Relative outward inflation applied to computed endpoints.
///
/// Platform `exp`/`sin`/`tanh` implementations are correct to within a few
/// ulps (relative ~1e-16); 1e-12 dominates that by four orders of magnitude
/// while staying far below the tolerances used anywhere in the pipeline.
pub const INFLATE_REL: f64 = 1e-12;

/// Errors raised by interval construction and partial operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    /// Endpoints were non-finite or out of order.
    #[error("invalid interval endpoints [{lo}, {hi}]")]
    InvalidEndpoints { lo: f64, hi: f64 },
    /// Divisor interval contains zero, so the quotient is unbounded.
    #[error("division by an interval [{lo}, {hi}] containing zero")]
    DivisionByZero { lo: f64, hi: f64 },
    /// Square root of an interval extending below zero.
    #[error("square root of interval with negative lower bound {lo}")]
    NegativeSqrt { lo: f64 },
    /// A box with no positive-width dimension cannot be split.
    #[error("cannot split a box whose every dimension has zero width")]
    DegenerateSplit,
    /// A point or box had the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A closed interval `[lo, hi]` with finite `f64` endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Builds `[lo, hi]`, rejecting NaN/infinite endpoints and `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(IntervalError::InvalidEndpoints { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// The degenerate interval `[v, v]`.
    ///
    /// Panics if `v` is not finite; point intervals come from trusted
    /// scalars (coefficients, grid coordinates), not external data.
    pub fn point(v: f64) -> Self {
        Self::new(v, v).expect("point interval requires a finite value")
    }

    /// Lower endpoint.
    pub fn lo(self) -> f64 {
        self.lo
    }

    /// Upper endpoint.
    pub fn hi(self) -> f64 {
        self.hi
    }

    /// `hi - lo`.
    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    /// Midpoint, computed as `lo + width/2` to stay inside the interval.
    pub fn midpoint(self) -> f64 {
        let m = self.lo + 0.5 * (self.hi - self.lo);
        m.clamp(self.lo, self.hi)
    }

    /// Largest absolute value over the interval.
    pub fn mag(self) -> f64 {
        fmath::abs(self.lo).max(fmath::abs(self.hi))
    }

    /// True if `x` lies in the closed interval.
    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// True if `other` is a subset of `self`.
    pub fn encloses(self, other: Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// True if the two intervals share at least one point.
    pub fn intersects(self, other: Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Smallest interval containing both operands.
    pub fn hull(self, other: Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Intersection of two enclosures of the same quantity: keeps the
    /// tighter endpoint on each side. If the operands do not overlap (one
    /// of them was not a valid enclosure), falls back to `self` so the
    /// caller's original bound is preserved.
    pub fn tighten(self, other: Self) -> Self {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Self { lo, hi }
        } else {
            self
        }
    }

    /// Widens both endpoints outward by [`INFLATE_REL`] relative to their
    /// magnitude, absorbing rounding of the operation that produced them.
    fn inflate(self) -> Self {
        let lo = self.lo - fmath::abs(self.lo) * INFLATE_REL;
        let hi = self.hi + fmath::abs(self.hi) * INFLATE_REL;
        Self { lo, hi }
    }

    /// Multiplies by an exact scalar of either sign.
    pub fn scale(self, k: f64) -> Self {
        let a = self.lo * k;
        let b = self.hi * k;
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
        .inflate()
    }

    /// Interval division; errors when the divisor contains zero.
    pub fn div(self, rhs: Self) -> Result<Self, IntervalError> {
        if rhs.contains(0.0) {
            return Err(IntervalError::DivisionByZero {
                lo: rhs.lo,
                hi: rhs.hi,
            });
        }
        let candidates = [
            self.lo / rhs.lo,
            self.lo / rhs.hi,
            self.hi / rhs.lo,
            self.hi / rhs.hi,
        ];
        let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { lo, hi }.inflate())
    }

    /// `self^k` for a non-negative integer exponent, by repeated squaring on
    /// the endpoint magnitudes. Even powers of sign-spanning intervals snap
    /// the lower bound to zero instead of multiplying endpoints naively.
    pub fn powi(self, k: u32) -> Self {
        if k == 0 {
            return Self { lo: 1.0, hi: 1.0 };
        }
        if k == 1 {
            return self;
        }
        let pl = fmath::powu(self.lo, k);
        let ph = fmath::powu(self.hi, k);
        let out = if k % 2 == 1 {
            Self { lo: pl, hi: ph }
        } else if self.lo >= 0.0 {
            Self { lo: pl, hi: ph }
        } else if self.hi <= 0.0 {
            Self { lo: ph, hi: pl }
        } else {
            Self {
                lo: 0.0,
                hi: pl.max(ph),
            }
        };
        out.inflate()
    }

    /// Square root; requires a non-negative lower endpoint.
    pub fn sqrt(self) -> Result<Self, IntervalError> {
        if self.lo < 0.0 {
            return Err(IntervalError::NegativeSqrt { lo: self.lo });
        }
        Ok(Self {
            lo: fmath::sqrt(self.lo),
            hi: fmath::sqrt(self.hi),
        }
        .inflate())
    }

    /// Absolute value (exact; no inflation needed).
    pub fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            Self {
                lo: -self.hi,
                hi: -self.lo,
            }
        } else {
            Self {
                lo: 0.0,
                hi: (-self.lo).max(self.hi),
            }
        }
    }

    /// Exponential (monotone increasing).
    pub fn exp(self) -> Self {
        Self {
            lo: fmath::exp(self.lo),
            hi: fmath::exp(self.hi),
        }
        .inflate()
    }

    /// Hyperbolic tangent (monotone increasing).
    pub fn tanh(self) -> Self {
        Self {
            lo: fmath::tanh(self.lo),
            hi: fmath::tanh(self.hi),
        }
        .inflate()
    }

    /// Sine over the interval, exact range analysis over critical points.
    pub fn sin(self) -> Self {
        if self.width() >= 2.0 * PI {
            return Self { lo: -1.0, hi: 1.0 };
        }
        let sl = fmath::sin(self.lo);
        let sh = fmath::sin(self.hi);
        let mut lo = sl.min(sh);
        let mut hi = sl.max(sh);
        // Maxima of sin at pi/2 + 2k*pi, minima at -pi/2 + 2k*pi.
        if contains_shifted(self, 0.5 * PI) {
            hi = 1.0;
        }
        if contains_shifted(self, -0.5 * PI) {
            lo = -1.0;
        }
        Self { lo, hi }.inflate().clamp_unit()
    }

    /// Cosine over the interval, exact range analysis over critical points.
    pub fn cos(self) -> Self {
        if self.width() >= 2.0 * PI {
            return Self { lo: -1.0, hi: 1.0 };
        }
        let cl = fmath::cos(self.lo);
        let ch = fmath::cos(self.hi);
        let mut lo = cl.min(ch);
        let mut hi = cl.max(ch);
        // Maxima of cos at 2k*pi, minima at pi + 2k*pi.
        if contains_shifted(self, 0.0) {
            hi = 1.0;
        }
        if contains_shifted(self, PI) {
            lo = -1.0;
        }
        Self { lo, hi }.inflate().clamp_unit()
    }

    /// Clips to `[-1, 1]`; sound for functions whose true range lies there,
    /// and keeps inflated critical-point endpoints inclusion-isotone with
    /// the exact `[-1, 1]` returned for full-period inputs.
    fn clamp_unit(self) -> Self {
        Self {
            lo: self.lo.max(-1.0),
            hi: self.hi.min(1.0),
        }
    }
}

/// True if some point `a + 2k*pi` (integer `k`) lies in the interval.
///
/// The angle grid is located with a rounding guard half an inflation wide so
/// that a critical point near an endpoint is treated as inside; that errs
/// toward the wider (sound) enclosure.
fn contains_shifted(iv: Interval, a: f64) -> bool {
    let two_pi = 2.0 * PI;
    let k = fmath::ceil((iv.lo - a) / two_pi - 1e-12);
    a + k * two_pi <= iv.hi + 1e-12 * iv.hi.abs().max(1.0)
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo + rhs.lo,
            hi: self.hi + rhs.hi,
        }
        .inflate()
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo - rhs.hi,
            hi: self.hi - rhs.lo,
        }
        .inflate()
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let candidates = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }.inflate()
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

/// Enclosure of the squared Euclidean norm of an interval vector.
pub fn norm_sq_bound(v: &[Interval]) -> Interval {
    v.iter()
        .fold(Interval::point(0.0), |acc, iv| acc + iv.powi(2))
}

/// Enclosure of the dot product of two interval vectors.
///
/// Panics if the slices have different lengths (internal misuse, not data).
pub fn dot_bound(a: &[Interval], b: &[Interval]) -> Interval {
    assert_eq!(a.len(), b.len(), "dot product of mismatched lengths");
    a.iter()
        .zip(b)
        .fold(Interval::point(0.0), |acc, (x, y)| acc + *x * *y)
}

/// Which side of an axis a face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceSide {
    /// The face at the lower endpoint of the axis.
    Lower,
    /// The face at the upper endpoint of the axis.
    Upper,
}

/// An axis-aligned box: one closed interval per state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    dims: Vec<Interval>,
}

impl IntervalBox {
    /// Builds a box from per-axis intervals. Must be non-empty.
    pub fn new(dims: Vec<Interval>) -> Self {
        assert!(!dims.is_empty(), "a box needs at least one dimension");
        Self { dims }
    }

    /// Builds a box from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, IntervalError> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        if dims.is_empty() {
            return Err(IntervalError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { dims })
    }

    /// Number of dimensions.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// The interval along axis `i`.
    pub fn interval(&self, i: usize) -> Interval {
        self.dims[i]
    }

    /// All per-axis intervals.
    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    /// True if the point lies in the box (dimension mismatch is `false`).
    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && x.iter().zip(&self.dims).all(|(xi, iv)| iv.contains(*xi))
    }

    /// Componentwise midpoint.
    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(|iv| iv.midpoint()).collect()
    }

    /// Width of the widest axis.
    pub fn max_width(&self) -> f64 {
        self.dims
            .iter()
            .map(|iv| iv.width())
            .fold(0.0, f64::max)
    }

    /// Index of the first axis attaining the maximum width.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        let mut best_w = self.dims[0].width();
        for (i, iv) in self.dims.iter().enumerate().skip(1) {
            if iv.width() > best_w {
                best = i;
                best_w = iv.width();
            }
        }
        best
    }

    /// Returns a copy with axis `i` replaced.
    pub fn with_interval(&self, i: usize, iv: Interval) -> Self {
        let mut dims = self.dims.clone();
        dims[i] = iv;
        Self { dims }
    }

    /// Bisects the widest axis at its midpoint into two half-boxes whose
    /// union is exactly `self`. Errors when every axis is degenerate.
    pub fn split(&self) -> Result<(Self, Self), IntervalError> {
        let axis = self.widest_dim();
        let iv = self.dims[axis];
        if iv.width() <= 0.0 {
            return Err(IntervalError::DegenerateSplit);
        }
        let mid = iv.midpoint();
        // Guard against midpoint collapse at the extremes of the fp grid.
        if mid <= iv.lo() || mid >= iv.hi() {
            return Err(IntervalError::DegenerateSplit);
        }
        let left = self.with_interval(axis, Interval { lo: iv.lo, hi: mid });
        let right = self.with_interval(axis, Interval { lo: mid, hi: iv.hi });
        Ok((left, right))
    }

    /// The thin box forming one face of the boundary along `axis`.
    pub fn face(&self, axis: usize, side: FaceSide) -> Self {
        let iv = self.dims[axis];
        let v = match side {
            FaceSide::Lower => iv.lo,
            FaceSide::Upper => iv.hi,
        };
        self.with_interval(axis, Interval { lo: v, hi: v })
    }

    /// All `2n` boundary faces of the box.
    pub fn faces(&self) -> Vec<Self> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            out.push(self.face(axis, FaceSide::Lower));
            out.push(self.face(axis, FaceSide::Upper));
        }
        out
    }

    /// Splits every axis into `parts` equal slices and returns the grid of
    /// `parts^n` sub-boxes, in row-major order. Used by the bound routines.
    pub fn subdivide(&self, parts: usize) -> Vec<Self> {
        assert!(parts >= 1, "subdivision needs at least one part");
        let n = self.dim();
        let mut cells: Vec<Vec<Interval>> = Vec::with_capacity(n);
        for iv in &self.dims {
            let mut axis_cells = Vec::with_capacity(parts);
            let w = iv.width() / parts as f64;
            for p in 0..parts {
                let lo = if p == 0 { iv.lo } else { iv.lo + w * p as f64 };
                let hi = if p + 1 == parts {
                    iv.hi
                } else {
                    iv.lo + w * (p + 1) as f64
                };
                axis_cells.push(Interval {
                    lo,
                    hi: hi.max(lo),
                });
            }
            cells.push(axis_cells);
        }
        let mut out = Vec::with_capacity(parts.pow(n as u32));
        let mut index = alloc::vec![0usize; n];
        loop {
            out.push(Self {
                dims: index.iter().enumerate().map(|(d, &p)| cells[d][p]).collect(),
            });
            let mut d = n;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                index[d] += 1;
                if index[d] < parts {
                    break;
                }
                index[d] = 0;
            }
        }
    }
}
