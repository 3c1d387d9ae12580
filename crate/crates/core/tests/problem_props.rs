mod common;

use common::*;
use nalgebra::DVector;
use proptest::prelude::*;

use phaseless::{canonicalize, objective, quotient_distance, whiten, Observation};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn objective_is_even((a, b) in instance(), seed in vector(3, -3.0, 3.0)) {
        let x = DVector::from_fn(a.d(), |i, _| seed[i]);
        prop_assert_eq!(objective(&a, &b, &x).unwrap(), objective(&a, &b, &-&x).unwrap());
    }

    #[test]
    fn whitening_preserves_objective((a, b) in instance(), seed in vector(3, -3.0, 3.0)) {
        let x = DVector::from_fn(a.d(), |i, _| seed[i]);
        let w = whiten(&a).unwrap();
        let aw = w.whitened_matrix().unwrap();
        let xt = w.whitened().unwrap().to_whitened(&x);
        let f = objective(&a, &b, &x).unwrap();
        let g = objective(&aw, &b, &xt).unwrap();
        prop_assert!((f - g).abs() <= 1e-8 * (1.0 + b.values().norm_squared()), "{} vs {}", f, g);
    }

    #[test]
    fn quotient_distance_is_a_metric(
        x in vector(3, -2.0, 2.0),
        y in vector(3, -2.0, 2.0),
        z in vector(3, -2.0, 2.0),
    ) {
        let dxy = quotient_distance(&x, &y).unwrap();
        prop_assert_eq!(dxy, quotient_distance(&y, &x).unwrap());
        let dxz = quotient_distance(&x, &z).unwrap();
        let dzy = quotient_distance(&z, &y).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-12);
        prop_assert_eq!(quotient_distance(&x, &x).unwrap(), 0.0);
        prop_assert_eq!(quotient_distance(&x, &-&x).unwrap(), 0.0);
        if (&x - &y).norm() > 1e-9 && (&x + &y).norm() > 1e-9 {
            prop_assert!(dxy > 0.0);
        }
    }

    #[test]
    fn canonicalize_is_idempotent(x in vector(4, -2.0, 2.0)) {
        let once = canonicalize(&x);
        prop_assert_eq!(canonicalize(&once), once.clone());
        prop_assert_eq!(canonicalize(&-&x), once);
    }

    #[test]
    fn observation_json_roundtrip(v in vector(5, -1e6, 1e6)) {
        let b = Observation::new(v).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        let back: Observation = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, b);
    }
}
