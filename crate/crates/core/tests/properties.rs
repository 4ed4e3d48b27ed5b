use proptest::prelude::*;

use smetric_lab::contraction::{all_pairs, verify_condition_i, verify_condition_ii, xi, ConditionMode, ContractionParams};
use smetric_lab::expr::parse;
use smetric_lab::solver::{check_descent, fix_set, picard};
use smetric_lab::{MapDef, Point, SMetricDef, Space, Universe};

const TOL: f64 = 1e-9;

/// Distinct integer coordinates with the `|x-z| + |x+z-2y|` S-metric, and a table map.
fn arb_instance() -> impl Strategy<Value = (Vec<i32>, Vec<usize>)> {
    prop::collection::btree_set(-20i32..20, 2..7).prop_flat_map(|set| {
        let coords: Vec<i32> = set.into_iter().collect();
        let n = coords.len();
        // Images lean toward a few targets so contractive maps show up often.
        (Just(coords), prop::collection::vec(prop_oneof![3 => 0usize..2, 1 => 0usize..n], n))
    })
}

fn build(coords: &[i32], images: &[usize]) -> (Space, MapDef) {
    let labels: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
    let s = parse("abs(x - z) + abs(x + z - 2*y)", &["x", "y", "z"]).unwrap();
    let space = Space::new(Universe::finite(labels.clone()).unwrap(), SMetricDef::formula(s)).unwrap();
    let map = MapDef::table(labels.iter().zip(images).map(|(k, &i)| (k.clone(), labels[i.min(labels.len() - 1)].clone())));
    (space, map)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    /// A linear gauge `k t` makes the window condition automatic for
    /// `δ(ε) = ε (1/k - 1)`; with both in hand the fixed point is unique and
    /// every orbit reaches it with strictly decreasing steps.
    #[test]
    fn contractive_instances_have_one_attracting_fixed_point(
        (coords, images) in arb_instance(),
        a in 0.0f64..0.99,
        b in 0.0f64..0.99,
        c in 0.0f64..0.49,
    ) {
        let (space, map) = build(&coords, &images);
        let params = ContractionParams::new(a, b, c).unwrap();
        let k = 0.9;
        let phi = parse("0.9 * t", &["t"]).unwrap();
        let delta = parse("eps * (1 / 0.9 - 1)", &["eps"]).unwrap();
        let points = space.points();
        let pairs = all_pairs(&points);
        let cond_i = verify_condition_i(&space, &map, &params, Some(&phi), &pairs, ConditionMode::Full, TOL).unwrap();
        prop_assert!(k < 1.0 && xi(&params) < 1.0);
        if cond_i.is_empty() {
            prop_assert!(verify_condition_ii(&space, &map, &params, &delta, &pairs, &[], TOL).unwrap().is_empty());
            let fix = fix_set(&space, &map).unwrap();
            prop_assert_eq!(fix.len(), 1);
            for x0 in &points {
                let trace = picard(&space, &map, x0, 100, TOL).unwrap();
                prop_assert_eq!(trace.converged(), Some(&fix[0]));
                let strict: Vec<_> = check_descent(&trace, xi(&params), TOL)
                    .into_iter()
                    .filter(|v| v.rule == "strict_decrease")
                    .collect();
                prop_assert!(strict.is_empty(), "{:?}", strict);
            }
        }
    }

    /// Every fixed point found by exhaustive search is a Picard limit from itself,
    /// and every Picard limit is in the fixed-point set.
    #[test]
    fn picard_limits_are_fixed_points((coords, images) in arb_instance()) {
        let (space, map) = build(&coords, &images);
        let fix = fix_set(&space, &map).unwrap();
        for u in &fix {
            let t = picard(&space, &map, u, 5, TOL).unwrap();
            prop_assert_eq!(t.converged(), Some(u));
        }
        for x0 in space.points() {
            if let Some(u) = picard(&space, &map, &x0, 100, TOL).unwrap().converged() {
                prop_assert!(fix.contains(u));
            }
        }
    }

    /// Condition (i) in strict mode only ever flags pairs with positive M.
    #[test]
    fn strict_mode_skips_degenerate_pairs((coords, images) in arb_instance(), a in 0.0f64..0.99) {
        let (space, map) = build(&coords, &images);
        let params = ContractionParams::new(a, 0.0, 0.0).unwrap();
        let pairs = all_pairs(&space.points());
        for v in verify_condition_i(&space, &map, &params, None, &pairs, ConditionMode::Strict, TOL).unwrap() {
            prop_assert!(v.m_value > TOL);
            prop_assert!(v.x != v.y || matches!(v.x, Point::Label(_)));
        }
    }
}
