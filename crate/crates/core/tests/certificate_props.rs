mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use phaseless::certificates::{scp_split_value, Evidence};
use phaseless::problem::SignPattern;
use phaseless::stability::nonunique_seed_search;
use phaseless::{
    certify_unique, complement_property, poly_screen_value, scp_sigma, whiten, Certificate, Observation,
    SenseMatrix,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn screen_vanishes_on_nonunique_instances(a in cp_matrix(4, 2), seed in any::<u64>()) {
        let aw = whiten(&a).unwrap().whitened_matrix().unwrap();
        let seeds = nonunique_seed_search(&a, 4, seed).unwrap();
        prop_assert!(!seeds.is_empty());
        for b in seeds {
            let cert = certify_unique(&a, &b, 1e-9).unwrap();
            let Evidence::ExactUnique(ev) = &cert.evidence else { panic!() };
            prop_assert!(ev.classes.len() >= 2);
            for (i, c1) in ev.classes.iter().enumerate() {
                for c2 in &ev.classes[i + 1..] {
                    let s1 = SignPattern::of_vector(&(a.entries() * &c1.rep));
                    let s2 = SignPattern::of_vector(&(a.entries() * &c2.rep));
                    let p = poly_screen_value(&aw, &s1, &s2, &b).unwrap();
                    prop_assert!(p.abs() <= 1e-8 * b.values().norm_squared(), "P = {}", p);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn screen_polynomials_are_nonzero(a in matrix(4, 2), zs in prop::collection::vec(vector(4, -1.0, 1.0), 20)) {
        let aw = whiten(&a).unwrap().whitened_matrix().unwrap();
        let n = SignPattern::canonical_count(4);
        for i in 0..n {
            for j in i + 1..n {
                let (e1, e2) = (SignPattern::canonical_from_index(4, i), SignPattern::canonical_from_index(4, j));
                let hit = zs.iter().filter(|z| z.norm() > 1e-3).any(|z| {
                    let z = Observation::new(z / z.norm()).unwrap();
                    poly_screen_value(&aw, &e1, &e2, &z).unwrap().abs() > 1e-12
                });
                prop_assert!(hit, "P vanished on every sample for patterns {} and {}", i, j);
            }
        }
    }

    #[test]
    fn scp_grows_with_rows(a in matrix(4, 2), row in vector(2, -2.0, 2.0)) {
        let c = scp_sigma(&a).unwrap();
        let Evidence::Scp(ev) = &c.evidence else { panic!() };
        let mask: usize = ev.gamma.iter().map(|&i| 1 << i).sum();
        let mut rows = a.rows();
        rows.push(row.iter().copied().collect());
        let bigger = SenseMatrix::from_rows(&rows).unwrap();
        for mk in [mask, mask | 1 << 4] {
            prop_assert!(scp_split_value(&bigger, mk) >= ev.sigma_squared * (1.0 - 1e-12) - 1e-14);
        }
    }

    #[test]
    fn complement_property_forces_full_rank((m, d) in dims(), entries in prop::collection::vec(-1i8..=1, 18)) {
        let a = SenseMatrix::new(DMatrix::from_fn(m, d, |i, j| entries[i * d + j] as f64));
        let Ok(a) = a else { return Ok(()); };
        if complement_property(&a).unwrap().holds() {
            prop_assert_eq!(a.rank(), d);
        }
    }

    #[test]
    fn certificate_json_roundtrip(a in matrix(3, 2), b in vector(3, 0.0, 1.0)) {
        let b = Observation::new(b).unwrap();
        for c in [
            complement_property(&a).unwrap(),
            scp_sigma(&a).unwrap(),
            certify_unique(&a, &b, 1e-9).unwrap(),
            phaseless::poly_screen(&a, &b, 1e-8).unwrap(),
            phaseless::near_surface_uniqueness(&a, &DVector::from_element(2, 1.0), &DVector::zeros(3)).unwrap(),
        ] {
            let text = serde_json::to_string(&c).unwrap();
            let back: Certificate = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
