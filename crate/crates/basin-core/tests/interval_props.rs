//! Randomized laws of the interval arithmetic: every operation must enclose
//! the pointwise result (fundamental enclosure) and respect inclusion
//! isotonicity, and box subdivision must tile the input exactly.

use basin_core::interval::{Interval, IntervalBox};
use proptest::prelude::*;

fn interval_in(lo: f64, hi: f64) -> impl Strategy<Value = Interval> {
    (lo..hi, lo..hi).prop_map(|(a, b)| {
        let (l, h) = if a <= b { (a, b) } else { (b, a) };
        Interval::new(l, h).unwrap()
    })
}

fn point_in(iv: Interval, t: f64) -> f64 {
    let x = iv.lo() + t * (iv.hi() - iv.lo());
    x.clamp(iv.lo(), iv.hi())
}

/// The sub-interval of `iv` spanned by parameters `t1, t2` in `[0, 1]`.
fn sub_interval(iv: Interval, t1: f64, t2: f64) -> Interval {
    let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    Interval::new(point_in(iv, a), point_in(iv, b)).unwrap()
}

proptest! {
    // 1250 cases x 8 sampled pairs = 1e4 point pairs per operation.
    #![proptest_config(ProptestConfig::with_cases(1250))]

    #[test]
    fn binary_ops_enclose_pointwise_results(
        a in interval_in(-50.0, 50.0),
        b in interval_in(-50.0, 50.0),
        ts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 8),
    ) {
        for (ta, tb) in ts {
            let x = point_in(a, ta);
            let y = point_in(b, tb);
            prop_assert!((a + b).contains(x + y));
            prop_assert!((a - b).contains(x - y));
            prop_assert!((a * b).contains(x * y));
            if !b.contains(0.0) {
                prop_assert!(a.div(b).unwrap().contains(x / y));
            }
        }
    }

    #[test]
    fn unary_ops_enclose_pointwise_results(
        a in interval_in(-30.0, 30.0),
        ts in prop::collection::vec(0.0f64..=1.0, 8),
        k in 0u32..8,
    ) {
        for t in ts {
            let x = point_in(a, t);
            prop_assert!(a.powi(k).contains(x.powi(k as i32)));
            prop_assert!((-a).contains(-x));
            prop_assert!(a.abs().contains(x.abs()));
            prop_assert!(a.exp().contains(x.exp()));
            prop_assert!(a.tanh().contains(x.tanh()));
            prop_assert!(a.sin().contains(x.sin()));
            prop_assert!(a.cos().contains(x.cos()));
            prop_assert!(a.scale(-3.5).contains(-3.5 * x));
            if a.lo() >= 0.0 {
                prop_assert!(a.sqrt().unwrap().contains(x.sqrt()));
            }
        }
    }

    #[test]
    fn operations_are_inclusion_isotone(
        a_big in interval_in(-40.0, 40.0),
        b_big in interval_in(-40.0, 40.0),
        (s1, s2) in (0.0f64..=1.0, 0.0f64..=1.0),
        (u1, u2) in (0.0f64..=1.0, 0.0f64..=1.0),
        k in 0u32..6,
    ) {
        let a = sub_interval(a_big, s1, s2);
        let b = sub_interval(b_big, u1, u2);
        prop_assert!((a_big + b_big).encloses(a + b));
        prop_assert!((a_big - b_big).encloses(a - b));
        prop_assert!((a_big * b_big).encloses(a * b));
        if !b_big.contains(0.0) {
            prop_assert!(a_big.div(b_big).unwrap().encloses(a.div(b).unwrap()));
        }
        prop_assert!(a_big.powi(k).encloses(a.powi(k)));
        prop_assert!((-a_big).encloses(-a));
        prop_assert!(a_big.abs().encloses(a.abs()));
        prop_assert!(a_big.exp().encloses(a.exp()));
        prop_assert!(a_big.tanh().encloses(a.tanh()));
        prop_assert!(a_big.sin().encloses(a.sin()));
        prop_assert!(a_big.cos().encloses(a.cos()));
        if a_big.lo() >= 0.0 {
            prop_assert!(a_big.sqrt().unwrap().encloses(a.sqrt().unwrap()));
        }
    }

    #[test]
    fn split_halves_share_the_cut_and_keep_the_endpoints(
        bounds in prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 1..4),
    ) {
        let spec: Vec<(f64, f64)> = bounds.iter().map(|&(lo, w)| (lo, lo + w)).collect();
        let boxed = IntervalBox::from_bounds(&spec).unwrap();
        let (left, right) = boxed.split().unwrap();
        let axis = boxed.widest_dim();
        for i in 0..boxed.dim() {
            if i == axis {
                prop_assert_eq!(left.interval(i).lo(), boxed.interval(i).lo());
                prop_assert_eq!(left.interval(i).hi(), right.interval(i).lo());
                prop_assert_eq!(right.interval(i).hi(), boxed.interval(i).hi());
            } else {
                // Untouched axes pass through bit-exactly in both halves.
                prop_assert_eq!(left.interval(i).lo(), boxed.interval(i).lo());
                prop_assert_eq!(left.interval(i).hi(), boxed.interval(i).hi());
                prop_assert_eq!(right.interval(i).lo(), boxed.interval(i).lo());
                prop_assert_eq!(right.interval(i).hi(), boxed.interval(i).hi());
            }
        }
    }

    #[test]
    fn subdivision_tiles_the_box_exactly(
        bounds in prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 1..3),
        parts in 2usize..5,
        ts in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 2), 8),
    ) {
        let spec: Vec<(f64, f64)> = bounds.iter().map(|&(lo, w)| (lo, lo + w)).collect();
        let boxed = IntervalBox::from_bounds(&spec).unwrap();
        let n = boxed.dim();
        let tiles = boxed.subdivide(parts);
        prop_assert_eq!(tiles.len(), parts.pow(n as u32));
        // Per axis the cells chain without gaps from lo to hi.
        for i in 0..n {
            let mut cuts: Vec<(f64, f64)> = tiles
                .iter()
                .map(|t| (t.interval(i).lo(), t.interval(i).hi()))
                .collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup();
            prop_assert_eq!(cuts.len(), parts);
            prop_assert_eq!(cuts[0].0, boxed.interval(i).lo());
            prop_assert_eq!(cuts[parts - 1].1, boxed.interval(i).hi());
            for w in cuts.windows(2) {
                prop_assert_eq!(w[0].1, w[1].0);
            }
        }
        // Random interior points always land in at least one tile.
        for t in &ts {
            let x: Vec<f64> = (0..n).map(|i| point_in(boxed.interval(i), t[i])).collect();
            prop_assert!(tiles.iter().any(|tile| tile.contains_point(&x)));
        }
    }
}
