//! Randomized checks of the certification plumbing: margin selection obeys
//! its rounding contract, infeasible margins produce genuine witnesses, and
//! the exploration budget acts monotonically.

use basin_core::certificates::{solve_matrix_lyapunov, QuadraticLyapunov};
use basin_core::interval::IntervalBox;
use basin_core::koopman::VectorFieldModel;
use basin_core::verify::{
    maximize_c2, required_beta, select_beta, Verdict, VerifierConfig,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn scalar_pieces() -> (QuadraticLyapunov, VectorFieldModel, IntervalBox) {
    let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
    let field = VectorFieldModel::from_linear(&a);
    // V = x^2 (twice the Lyapunov solve for Q = I).
    let quad = QuadraticLyapunov {
        p: DMatrix::from_row_slice(1, 1, &[1.0]),
        q: DMatrix::from_row_slice(1, 1, &[2.0]),
    };
    let domain = IntervalBox::from_bounds(&[(-2.0, 2.0)]).unwrap();
    (quad, field, domain)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn beta_selection_rounds_to_two_digits_with_strict_margin(
        log_req in -20.0f64..6.9,
    ) {
        let required = log_req.exp();
        let beta = select_beta(required);
        // Strictly above the requirement with at least a 1% margin.
        prop_assert!(beta >= required * 1.01 * (1.0 - 1e-12));
        // Never more than one mantissa step past the margin target.
        prop_assert!(beta <= required * 1.01 * 1.12);
        // Exactly two significant decimal digits.
        let exponent = beta.log10().floor() as i32;
        let unit = 10f64.powi(exponent - 1);
        let mantissa = beta / unit;
        prop_assert!((mantissa - mantissa.round()).abs() <= 1e-6 * mantissa);
        let m = mantissa.round() as i64;
        prop_assert!((10..=100).contains(&m), "mantissa {m}");
    }

    #[test]
    fn beta_selection_is_monotone(
        log_a in -12.0f64..4.0,
        bump in 0.0f64..3.0,
    ) {
        let r1 = log_a.exp();
        let r2 = r1 * (1.0 + bump);
        prop_assert!(select_beta(r1) <= select_beta(r2));
    }

    #[test]
    fn required_beta_grows_with_each_constant(
        k_f in 0.1f64..10.0,
        k_fhat in 0.1f64..10.0,
        delta in 1e-6f64..1e-2,
        alpha in 0.0f64..1e-2,
        nu in 0.1f64..10.0,
        scale in 1.0f64..3.0,
    ) {
        let base = required_beta(k_f, k_fhat, delta, alpha, nu);
        prop_assert!(base > 0.0);
        prop_assert!(required_beta(k_f * scale, k_fhat, delta, alpha, nu) >= base);
        prop_assert!(required_beta(k_f, k_fhat * scale, delta, alpha, nu) >= base);
        prop_assert!(required_beta(k_f, k_fhat, delta * scale, alpha, nu) >= base);
        prop_assert!(required_beta(k_f, k_fhat, delta, alpha * scale, nu) >= base);
        prop_assert!(required_beta(k_f, k_fhat, delta, alpha, nu * scale) >= base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oversized_margins_yield_reproducible_witnesses(
        c1 in 0.05f64..0.3,
        factor in 1.3f64..3.0,
    ) {
        // dV/dt = -2V for V = x^2 under dx/dt = -x, so any margin above
        // 2 c1 is refutable on the band floor.
        let (quad, field, domain) = scalar_pieces();
        let beta = 2.0 * c1 * factor;
        let cfg = VerifierConfig::default();
        let (level, reports) = maximize_c2(&quad, &field, c1, beta, &domain, &cfg).unwrap();
        prop_assert!(level.is_none());
        let witness = reports
            .iter()
            .find_map(|r| match &r.outcome.verdict {
                Verdict::Counterexample { point, value } => Some((point.clone(), *value)),
                _ => None,
            })
            .expect("infeasible margin must carry a counterexample");
        let (point, value) = witness;
        // The stored derivative matches a fresh evaluation and violates
        // the margin in plain floating point.
        let fresh = -2.0 * point[0] * point[0];
        prop_assert!((value - fresh).abs() <= 1e-9 * fresh.abs().max(1.0));
        prop_assert!(value + beta > 0.0);
        prop_assert!(point[0] * point[0] >= c1 * (1.0 - 1e-12));
    }
}

#[test]
fn certified_levels_never_shrink_with_budget() {
    let (quad, field, domain) = scalar_pieces();
    let mut cfg = VerifierConfig::default();
    let mut last = 0.0;
    for budget in [60u64, 600, 6_000, 2_000_000] {
        cfg.max_boxes = budget;
        let (level, _) = maximize_c2(&quad, &field, 0.1, 0.05, &domain, &cfg).unwrap();
        let value = level.unwrap_or(0.0);
        assert!(
            value >= last - 1e-12,
            "budget {budget} certified {value} < previous {last}"
        );
        last = value;
    }
    // The generous budget certifies essentially the whole inscribed level.
    assert!(last >= 4.0 * (1.0 - 4.0e-3), "final level {last}");
}
