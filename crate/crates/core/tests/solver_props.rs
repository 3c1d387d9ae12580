mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use phaseless::problem::SignPattern;
use phaseless::solver::grid_lipschitz_bound;
use phaseless::{
    fixed_point_iterate, grid_oracle, quotient_distance, solve_global, verify_fixed_point, Observation,
    SenseMatrix, SolutionSet,
};

fn same_classes(s: &SolutionSet, t: &SolutionSet) -> bool {
    s.classes.len() == t.classes.len()
        && s.classes.iter().all(|c| {
            t.classes
                .iter()
                .any(|e| quotient_distance(&c.rep, &e.rep).unwrap() <= 1e-7 * (1.0 + c.rep.norm()))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn class_count_is_bounded((a, b) in instance()) {
        let set = solve_global(&a, &b, 1e-9).unwrap();
        prop_assert!(!set.classes.is_empty());
        prop_assert!(set.classes.len() <= SignPattern::canonical_count(a.m()));
        prop_assert_eq!(set.fixed_point_verified, Some(true));
        for c in &set.classes {
            prop_assert!(verify_fixed_point(&a, &b, &c.rep, 1e-7).unwrap());
        }
    }

    #[test]
    fn classes_survive_row_permutation((a, b) in instance(), keys in prop::collection::vec(any::<u32>(), 6)) {
        let m = a.m();
        let mut perm: Vec<usize> = (0..m).collect();
        perm.sort_by_key(|&i| (keys[i], i));
        let pa = SenseMatrix::new(a.entries().select_rows(perm.iter())).unwrap();
        let pb = Observation::new(DVector::from_fn(m, |i, _| b.values()[perm[i]])).unwrap();
        let s = solve_global(&a, &b, 1e-9).unwrap();
        let t = solve_global(&pa, &pb, 1e-9).unwrap();
        prop_assert!((s.optimal_value - t.optimal_value).abs() <= 1e-9 * (1.0 + s.optimal_value));
        prop_assert!(same_classes(&s, &t), "{:?} vs {:?}", s.classes, t.classes);
    }

    #[test]
    fn fixed_point_iteration_descends((a, b) in instance(), seed in vector(3, -2.0, 2.0)) {
        let x0 = DVector::from_fn(a.d(), |i, _| seed[i]);
        let run = fixed_point_iterate(&a, &b, &x0, 200, 1e-12).unwrap();
        for w in run.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12, "{:?}", run.objective_trace);
        }
        if run.converged {
            prop_assert!(verify_fixed_point(&a, &b, &run.x, 1e-7).unwrap());
        }
        // no iterate beats the global optimum
        let best = solve_global(&a, &b, 1e-9).unwrap().optimal_value;
        prop_assert!(*run.objective_trace.last().unwrap() >= best - 1e-9 * (1.0 + best));
    }

    #[test]
    fn exact_recovery((a, x0) in (1usize..=3).prop_flat_map(|d| (2 * d..=6usize, Just(d)))
        .prop_flat_map(|(m, d)| (cp_matrix(m, d), vector(d, -2.0, 2.0))))
    {
        prop_assume!((a.entries() * &x0).amin() > 1e-3 || x0.norm() > 1e-3);
        let b = Observation::new((a.entries() * &x0).abs()).unwrap();
        let set = solve_global(&a, &b, 1e-9).unwrap();
        prop_assert_eq!(set.classes.len(), 1);
        prop_assert!(quotient_distance(&set.classes[0].rep, &x0).unwrap() <= 1e-8 * (1.0 + x0.norm()));
    }

    #[test]
    fn solution_set_json_roundtrip((a, b) in instance()) {
        let set = solve_global(&a, &b, 1e-9).unwrap();
        let text = serde_json::to_string(&set).unwrap();
        let back: SolutionSet = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, set);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_oracle_agrees(m in 3usize..=4, entries in prop::collection::vec(-2.0..2.0f64, 8), bv in vector(4, 0.0, 1.0)) {
        let a = SenseMatrix::new(DMatrix::from_row_slice(m, 2, &entries[..2 * m])).unwrap();
        let smin = a.singular_values()[1];
        prop_assume!(smin > 0.2);
        let b = Observation::new(DVector::from_fn(m, |i, _| bv[i])).unwrap();
        // minimizers satisfy ‖Ax‖ ≤ 2‖b‖
        let r = 2.0 * b.norm() / smin + 0.1;
        let step = 2.0 * r / 300.0;
        let lo = DVector::from_element(2, -r);
        let hi = DVector::from_element(2, r);
        let grid = grid_oracle(&a, &b, &lo, &hi, step).unwrap();
        let exact = solve_global(&a, &b, 1e-9).unwrap().optimal_value;
        let bound = 2.0 * grid_lipschitz_bound(&a, &b, &lo, &hi) * step;
        prop_assert!(grid.best_value >= exact - 1e-12);
        prop_assert!((grid.best_value - exact).abs() <= bound, "{} vs {} (bound {})", grid.best_value, exact, bound);
    }
}
