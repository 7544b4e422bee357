//! Randomized checks tying point evaluation, gradients, and interval
//! enclosures of the observable dictionaries together.

use basin_core::dictionary::Dictionary;
use basin_core::interval::IntervalBox;
use proptest::prelude::*;

fn boxed_around(center: (f64, f64), half: (f64, f64)) -> IntervalBox {
    IntervalBox::from_bounds(&[
        (center.0 - half.0, center.0 + half.0),
        (center.1 - half.1, center.1 + half.1),
    ])
    .unwrap()
}

fn families() -> Vec<Dictionary> {
    vec![
        Dictionary::monomial_2d(4, 4).unwrap(),
        Dictionary::tanh_random(2, 16, 42, 1.0).unwrap(),
    ]
}

proptest! {
    // 1250 cases x 8 points x both families > 1e4 point/box pairs.
    #![proptest_config(ProptestConfig::with_cases(1250))]

    #[test]
    fn interval_evaluation_encloses_point_evaluation(
        cx in -2.0f64..2.0,
        cy in -2.0f64..2.0,
        hx in 0.01f64..0.8,
        hy in 0.01f64..0.8,
        ts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 4),
    ) {
        let region = boxed_around((cx, cy), (hx, hy));
        for dict in families() {
            let values = dict.eval_interval(&region);
            let grads = dict.grad_interval(&region);
            for &(tx, ty) in &ts {
                let x = [
                    cx - hx + 2.0 * hx * tx,
                    cy - hy + 2.0 * hy * ty,
                ];
                let z = dict.eval(&x);
                let g = dict.grad(&x);
                for i in 0..dict.len() {
                    prop_assert!(
                        values[i].contains(z[i]),
                        "value {} of {:?} escaped {:?}",
                        z[i], x, values[i],
                    );
                    for j in 0..2 {
                        prop_assert!(
                            grads[i][j].contains(g[(i, j)]),
                            "gradient ({i},{j}) escaped its enclosure",
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_central_differences(
        x0 in -2.0f64..2.0,
        x1 in -2.0f64..2.0,
    ) {
        let h = 1e-5;
        for dict in families() {
            let g = dict.grad(&[x0, x1]);
            for j in 0..2 {
                let mut plus = [x0, x1];
                let mut minus = [x0, x1];
                plus[j] += h;
                minus[j] -= h;
                let num = (dict.eval(&plus) - dict.eval(&minus)) / (2.0 * h);
                for i in 0..dict.len() {
                    let scale = g[(i, j)].abs().max(1.0);
                    prop_assert!(
                        (g[(i, j)] - num[i]).abs() <= 1e-6 * scale,
                        "entry ({i},{j}): analytic {} vs numeric {}",
                        g[(i, j)], num[i],
                    );
                }
            }
        }
    }

    #[test]
    fn appended_state_slots_reproduce_the_state_exactly(
        x0 in -3.0f64..3.0,
        x1 in -3.0f64..3.0,
        m in 4usize..32,
        seed in 0u64..1000,
    ) {
        let dict = Dictionary::tanh_random(2, m, seed, 0.7).unwrap();
        let z = dict.eval(&[x0, x1]);
        let n_obs = dict.len();
        prop_assert_eq!(z[n_obs - 2], x0);
        prop_assert_eq!(z[n_obs - 1], x1);
        let idx = dict.coordinate_indices().unwrap();
        prop_assert_eq!(idx, vec![n_obs - 2, n_obs - 1]);
    }
}
