//! Deterministic interval branch-and-bound over boxes.
//!
//! A check classifies a box as irrelevant (provably outside the region of
//! interest), certified (the condition provably holds on it), or undecided.
//! Undecided boxes are probed at their midpoint for a floating-point
//! refutation and otherwise split along their widest axis. The engine works
//! in waves so results are identical with or without worker threads: boxes
//! are classified in parallel but consumed in frontier order.

use alloc::vec::Vec;

use nalgebra::DVector;

use super::VerifierConfig;
use crate::certificates::{LyapunovCandidate, QuadraticLyapunov};
use crate::interval::{dot_bound, norm_sq_bound, Interval, IntervalBox};
use crate::koopman::VectorFieldModel;

/// A scalar function with point and interval evaluation — the shape every
/// certificate (dictionary candidate or quadratic form) exposes to the
/// verifier.
pub trait ScalarCertificate: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn value_interval(&self, region: &IntervalBox) -> Interval;
    fn gradient_interval(&self, region: &IntervalBox) -> Vec<Interval>;
}

impl ScalarCertificate for LyapunovCandidate {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.grad(x)
    }
    fn value_interval(&self, region: &IntervalBox) -> Interval {
        self.eval_interval(region)
    }
    fn gradient_interval(&self, region: &IntervalBox) -> Vec<Interval> {
        self.grad_interval(region)
    }
}

impl ScalarCertificate for QuadraticLyapunov {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.grad(x)
    }
    fn value_interval(&self, region: &IntervalBox) -> Interval {
        self.eval_interval(region)
    }
    fn gradient_interval(&self, region: &IntervalBox) -> Vec<Interval> {
        self.grad_interval(region)
    }
}

/// Ternary box classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// The box provably avoids the region the condition quantifies over.
    Irrelevant,
    /// The condition provably holds on the whole box.
    Certified,
    /// Neither established — split or refute.
    Undecided,
}

/// One condition checked over a region by branch and bound.
pub trait RegionCheck: Sync {
    fn name(&self) -> &'static str;
    fn classify(&self, region: &IntervalBox) -> Classification;
    /// Attempts a plain floating-point refutation at the box midpoint;
    /// `Some((point, value))` means the point violates the condition with
    /// the given witness value.
    fn refute(&self, region: &IntervalBox) -> Option<(Vec<f64>, f64)>;
}

/// Why a verdict is `unknown`.
#[derive(Debug, Clone, PartialEq)]
pub enum UnknownReason {
    /// The box budget ran out before the frontier emptied.
    BudgetExhausted {
        /// Boxes classified before giving up.
        explored: u64,
    },
    /// An undecided box reached the minimum width without a refutation.
    ResolutionLimit {
        /// The offending box.
        region: IntervalBox,
    },
}

/// Three-valued verdict; `unknown` is never upgraded.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Certified,
    Counterexample {
        point: Vec<f64>,
        value: f64,
    },
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified)
    }
}

/// How a cover box was discharged (used by audit replay).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverClass {
    Irrelevant,
    Certified,
}

/// Exploration counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckStats {
    /// Boxes classified.
    pub boxes_explored: u64,
    /// Deepest split level reached.
    pub max_depth: u32,
}

/// Verdict, counters, and the box cover backing a certified claim.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub stats: CheckStats,
    /// Discharged leaf boxes with how each was discharged. Tiles the root
    /// region exactly when the verdict is `Certified`.
    pub cover: Vec<(IntervalBox, CoverClass)>,
}

fn evaluate(
    check: &dyn RegionCheck,
    region: &IntervalBox,
) -> (Classification, Option<(Vec<f64>, f64)>) {
    let class = check.classify(region);
    let refutation = if class == Classification::Undecided {
        check.refute(region)
    } else {
        None
    };
    (class, refutation)
}

#[cfg(feature = "parallel")]
fn wave_results(
    check: &dyn RegionCheck,
    frontier: &[(IntervalBox, u32)],
) -> Vec<(Classification, Option<(Vec<f64>, f64)>)> {
    use rayon::prelude::*;
    frontier
        .par_iter()
        .map(|(region, _)| evaluate(check, region))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn wave_results(
    check: &dyn RegionCheck,
    frontier: &[(IntervalBox, u32)],
) -> Vec<(Classification, Option<(Vec<f64>, f64)>)> {
    frontier
        .iter()
        .map(|(region, _)| evaluate(check, region))
        .collect()
}

/// Runs a check to a verdict over the given root boxes.
pub fn explore(
    check: &dyn RegionCheck,
    roots: &[IntervalBox],
    cfg: &VerifierConfig,
) -> CheckOutcome {
    let mut frontier: Vec<(IntervalBox, u32)> =
        roots.iter().map(|region| (region.clone(), 0)).collect();
    let mut cover = Vec::new();
    let mut stats = CheckStats::default();
    while !frontier.is_empty() {
        if stats.boxes_explored + frontier.len() as u64 > cfg.max_boxes {
            return CheckOutcome {
                verdict: Verdict::Unknown(UnknownReason::BudgetExhausted {
                    explored: stats.boxes_explored,
                }),
                stats,
                cover,
            };
        }
        stats.boxes_explored += frontier.len() as u64;
        let results = wave_results(check, &frontier);
        let mut next = Vec::new();
        for ((region, depth), (class, refutation)) in frontier.into_iter().zip(results) {
            match class {
                Classification::Irrelevant => cover.push((region, CoverClass::Irrelevant)),
                Classification::Certified => cover.push((region, CoverClass::Certified)),
                Classification::Undecided => {
                    if let Some((point, value)) = refutation {
                        return CheckOutcome {
                            verdict: Verdict::Counterexample { point, value },
                            stats,
                            cover,
                        };
                    }
                    let splittable = region.max_width() >= cfg.eps_box;
                    let split = if splittable { region.split().ok() } else { None };
                    match split {
                        Some((a, b)) => {
                            stats.max_depth = stats.max_depth.max(depth + 1);
                            next.push((a, depth + 1));
                            next.push((b, depth + 1));
                        }
                        None => {
                            return CheckOutcome {
                                verdict: Verdict::Unknown(UnknownReason::ResolutionLimit {
                                    region,
                                }),
                                stats,
                                cover,
                            };
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    CheckOutcome {
        verdict: Verdict::Certified,
        stats,
        cover,
    }
}

/// Replays a certified outcome: every cover box must re-classify exactly as
/// recorded. Returns false for non-certified verdicts or any mismatch.
pub fn audit_check(check: &dyn RegionCheck, outcome: &CheckOutcome) -> bool {
    outcome.verdict.is_certified()
        && outcome.cover.iter().all(|(region, class)| {
            matches!(
                (check.classify(region), class),
                (Classification::Irrelevant, CoverClass::Irrelevant)
                    | (Classification::Certified, CoverClass::Certified)
            )
        })
}

/// The relaxed derivative condition `grad V . f <= -beta` on the band
/// `{lo <= V <= hi}`, optionally excluding an inner ball `||x|| < min_radius`
/// (used by the quadratic-basin check, whose inner ball is handled by the
/// linearization-dominance argument instead).
pub struct BandCheck<'a> {
    pub certificate: &'a dyn ScalarCertificate,
    pub field: &'a VectorFieldModel,
    pub band: (f64, f64),
    pub beta: f64,
    pub min_radius: f64,
    pub label: &'static str,
}

impl RegionCheck for BandCheck<'_> {
    fn name(&self) -> &'static str {
        self.label
    }

    fn classify(&self, region: &IntervalBox) -> Classification {
        let v = self.certificate.value_interval(region);
        if v.hi() < self.band.0 || v.lo() > self.band.1 {
            return Classification::Irrelevant;
        }
        if self.min_radius > 0.0
            && norm_sq_bound(region.dims()).hi() < self.min_radius * self.min_radius
        {
            return Classification::Irrelevant;
        }
        let grad = self.certificate.gradient_interval(region);
        let f = self.field.eval_interval(region);
        let derivative = dot_bound(&grad, &f);
        if derivative.hi() <= -self.beta {
            Classification::Certified
        } else {
            Classification::Undecided
        }
    }

    fn refute(&self, region: &IntervalBox) -> Option<(Vec<f64>, f64)> {
        let mid = region.midpoint();
        let v = self.certificate.value(&mid);
        if v < self.band.0 || v > self.band.1 {
            return None;
        }
        let norm_sq: f64 = mid.iter().map(|&c| c * c).sum();
        if norm_sq < self.min_radius * self.min_radius {
            return None;
        }
        let d = self.certificate.gradient(&mid).dot(&self.field.eval(&mid));
        (d + self.beta > 0.0).then(|| (mid, d))
    }
}

/// Sublevel-set inclusion `{V <= c1} subset of {V_P <= c_quad}`.
pub struct InclusionCheck<'a> {
    pub candidate: &'a dyn ScalarCertificate,
    pub c1: f64,
    pub quad: &'a QuadraticLyapunov,
    pub c_quad: f64,
}

impl RegionCheck for InclusionCheck<'_> {
    fn name(&self) -> &'static str {
        "inclusion"
    }

    fn classify(&self, region: &IntervalBox) -> Classification {
        let v = self.candidate.value_interval(region);
        if v.lo() > self.c1 {
            return Classification::Irrelevant;
        }
        if self.quad.eval_interval(region).hi() <= self.c_quad {
            Classification::Certified
        } else {
            Classification::Undecided
        }
    }

    fn refute(&self, region: &IntervalBox) -> Option<(Vec<f64>, f64)> {
        let mid = region.midpoint();
        if self.candidate.value(&mid) > self.c1 {
            return None;
        }
        let vp = self.quad.eval(&mid);
        (vp > self.c_quad).then(|| (mid, vp))
    }
}

/// Strict lower-level condition `V > level` on every root box — run on the
/// faces of a domain to prove a sublevel set stays in the interior.
pub struct LevelExceedsCheck<'a> {
    pub certificate: &'a dyn ScalarCertificate,
    pub level: f64,
    pub label: &'static str,
}

impl RegionCheck for LevelExceedsCheck<'_> {
    fn name(&self) -> &'static str {
        self.label
    }

    fn classify(&self, region: &IntervalBox) -> Classification {
        if self.certificate.value_interval(region).lo() > self.level {
            Classification::Certified
        } else {
            Classification::Undecided
        }
    }

    fn refute(&self, region: &IntervalBox) -> Option<(Vec<f64>, f64)> {
        let mid = region.midpoint();
        let v = self.certificate.value(&mid);
        (v <= self.level).then(|| (mid, v))
    }
}
