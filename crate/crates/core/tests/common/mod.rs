#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use phaseless::{complement_property, Observation, SenseMatrix};

pub fn a3() -> SenseMatrix {
    SenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap()
}

pub fn vector(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(lo..hi, n).prop_map(DVector::from_vec)
}

/// Dense `m × d` matrix with entries in `[-2, 2]` and full column rank.
pub fn matrix(m: usize, d: usize) -> impl Strategy<Value = SenseMatrix> {
    prop::collection::vec(-2.0..2.0f64, m * d)
        .prop_map(move |e| SenseMatrix::new(DMatrix::from_row_slice(m, d, &e)).unwrap())
        .prop_filter("full column rank", |a| {
            a.has_full_column_rank() && a.singular_values()[a.d() - 1] > 1e-3 * a.sigma_max()
        })
}

pub fn cp_matrix(m: usize, d: usize) -> impl Strategy<Value = SenseMatrix> {
    matrix(m, d).prop_filter("complement property", |a| complement_property(a).unwrap().holds())
}

/// `(m, d)` with `1 ≤ d ≤ 3`, `d ≤ m ≤ 6`.
pub fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3).prop_flat_map(|d| (d.max(2)..=6usize, Just(d)))
}

/// A matrix together with a nonnegative observation.
pub fn instance() -> impl Strategy<Value = (SenseMatrix, Observation)> {
    dims().prop_flat_map(|(m, d)| (matrix(m, d), vector(m, 0.0, 2.0)))
        .prop_map(|(a, b)| (a, Observation::new(b).unwrap()))
}
