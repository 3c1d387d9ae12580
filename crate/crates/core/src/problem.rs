//! Core data model: the measurement matrix, observations, sign patterns,
//! sign classes and the objective `‖|Ax| − b‖²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_RTOL};
use crate::serde_util;

/// Coordinates with magnitude at or below this are skipped when choosing the
/// sign of a class representative.
pub const SIGN_TOL: f64 = 1e-12;

/// Largest `m` accepted by operations that enumerate sign patterns or row subsets.
pub const ENUMERATION_CAP: usize = 24;

/// Tolerance on `‖ÃᵀÃ − I‖_max` and `‖ÃT − A‖_max` for a whitened matrix.
pub const WHITENING_TOL: f64 = 1e-10;

pub(crate) fn check_enumeration_cap(m: usize) -> Result<()> {
    if m > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            m,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Orthonormal-column version `Ã` of a full-rank matrix together with the
/// change of variables `x̃ = T x`, so that `Ã T = A` and `|Ãx̃| = |Ax|`.
#[derive(Clone, Debug)]
pub struct Whitening {
    matrix: DMatrix<f64>,
    transform: DMatrix<f64>,
}

impl Whitening {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    /// Maps `x` to the whitened coordinates `T x`.
    pub fn to_whitened(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.transform * x
    }
}

/// The measurement matrix `A ∈ ℝ^{m×d}` with its cached singular value decomposition.
#[derive(Clone, Debug)]
pub struct SenseMatrix {
    entries: DMatrix<f64>,
    singular_values: Vec<f64>,
    sigma_max: f64,
    rank: usize,
    // m x rank orthonormal basis of range(A)
    range_basis: DMatrix<f64>,
    // d x rank map z -> x with A x = range_basis * z (minimum norm)
    coords: DMatrix<f64>,
    whitened: Option<Whitening>,
}

impl SenseMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (m, d) = entries.shape();
        if m == 0 || d == 0 {
            return Err(Error::EmptyMatrix { m, d });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let svd = linalg::thin_svd(&entries);
        let sigma_max = svd.singular_values.first().copied().unwrap_or(0.0);
        let rank = linalg::numeric_rank(&svd.singular_values, sigma_max);
        let range_basis = svd.u.columns(0, rank).into_owned();
        let mut coords = svd.v.columns(0, rank).into_owned();
        for (j, mut col) in coords.column_iter_mut().enumerate() {
            col /= svd.singular_values[j];
        }
        Ok(Self {
            entries,
            singular_values: svd.singular_values,
            sigma_max,
            rank,
            range_basis,
            coords,
            whitened: None,
        })
    }

    /// Builds a matrix from row-major rows; all rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        for r in rows {
            if r.as_ref().len() != d {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: d,
                    got: r.as_ref().len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(m, d, &flat))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn d(&self) -> usize {
        self.entries.ncols()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn has_full_column_rank(&self) -> bool {
        self.rank == self.d()
    }

    pub fn whitened(&self) -> Option<&Whitening> {
        self.whitened.as_ref()
    }

    /// The whitened matrix `Ã` as a `SenseMatrix` of its own, when present.
    pub fn whitened_matrix(&self) -> Option<SenseMatrix> {
        self.whitened
            .as_ref()
            .map(|w| SenseMatrix::new(w.matrix.clone()).expect("whitened matrix is finite"))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// `c·A`.
    pub fn scaled(&self, c: f64) -> Result<SenseMatrix> {
        SenseMatrix::new(&self.entries * c)
    }

    pub(crate) fn range_basis(&self) -> &DMatrix<f64> {
        &self.range_basis
    }

    pub(crate) fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub(crate) fn require_full_rank(&self) -> Result<()> {
        if self.has_full_column_rank() {
            return Ok(());
        }
        let tol = RANK_RTOL * self.sigma_max;
        let index = self.rank;
        let value = self.singular_values.get(index).copied().unwrap_or(0.0);
        Err(Error::RankDeficient {
            rank: self.rank,
            d: self.d(),
            index: index + 1,
            value,
            tol,
        })
    }

    /// `(AᵀA)⁻¹Aᵀ`, available only for full column rank.
    pub fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        self.require_full_rank()?;
        Ok(&self.coords * self.range_basis.transpose())
    }

    pub(crate) fn check_d(&self, x: &DVector<f64>, what: &'static str) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.d(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    pub(crate) fn check_m(&self, y: &DVector<f64>, what: &'static str) -> Result<()> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.m(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }
}

/// An observation vector `b ∈ ℝ^m`, optionally remembering the noise `η`
/// used to synthesize it as `|Ax₀| + η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(with = "serde_util::dvec")]
    values: DVector<f64>,
    #[serde(
        default,
        with = "serde_util::opt_dvec",
        skip_serializing_if = "Option::is_none"
    )]
    noise: Option<DVector<f64>>,
}

impl Observation {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        Ok(Self {
            values,
            noise: None,
        })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    /// `b = |A x₀| + η`.
    pub fn synthesized(a: &SenseMatrix, x0: &DVector<f64>, eta: &DVector<f64>) -> Result<Self> {
        a.check_m(eta, "noise")?;
        let clean = abs_measure(a, x0)?;
        let mut obs = Self::new(clean + eta)?;
        obs.noise = Some(eta.clone());
        Ok(obs)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn noise(&self) -> Option<&DVector<f64>> {
        self.noise.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub(crate) fn check_against(&self, a: &SenseMatrix) -> Result<()> {
        a.check_m(&self.values, "observation")
    }
}

impl From<DVector<f64>> for Observation {
    fn from(values: DVector<f64>) -> Self {
        Self {
            values,
            noise: None,
        }
    }
}

/// A sign vector `ε ∈ {+1, −1}^m`. Patterns `ε` and `−ε` describe the same cone
/// of the phaseless surface; the canonical member has `ε₀ = +1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignPattern {
    eps: Vec<i8>,
}

impl TryFrom<Vec<i8>> for SignPattern {
    type Error = Error;

    fn try_from(eps: Vec<i8>) -> Result<Self> {
        SignPattern::new(eps)
    }
}

impl From<SignPattern> for Vec<i8> {
    fn from(p: SignPattern) -> Self {
        p.eps
    }
}

impl SignPattern {
    pub fn new(eps: Vec<i8>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidPattern("empty pattern".into()));
        }
        if let Some(bad) = eps.iter().find(|&&e| e != 1 && e != -1) {
            return Err(Error::InvalidPattern(format!("entry {bad} is not ±1")));
        }
        Ok(Self { eps })
    }

    /// Number of canonical patterns of length `m`, i.e. `2^{m−1}`.
    pub fn canonical_count(m: usize) -> usize {
        1usize << (m - 1)
    }

    /// The `k`-th canonical pattern: `ε₀ = +1` and `ε_i = −1` iff bit `i−1` of `k` is set.
    pub fn canonical_from_index(m: usize, k: usize) -> Self {
        debug_assert!(m >= 1 && k < Self::canonical_count(m));
        let eps = (0..m)
            .map(|i| if i > 0 && (k >> (i - 1)) & 1 == 1 { -1 } else { 1 })
            .collect();
        Self { eps }
    }

    /// Index of the canonical representative of `±self`.
    pub fn canonical_index(&self) -> usize {
        let flip = self.eps[0] < 0;
        self.eps
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &e)| (e < 0) != flip)
            .fold(0, |k, (i, _)| k | (1 << (i - 1)))
    }

    /// `s(v)` entrywise with the convention `s(0) = +1`.
    pub fn of_vector(v: &DVector<f64>) -> Self {
        Self {
            eps: v.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect(),
        }
    }

    pub fn canonical(&self) -> Self {
        if self.eps[0] > 0 {
            self.clone()
        } else {
            self.negated()
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.eps[0] > 0
    }

    pub fn negated(&self) -> Self {
        Self {
            eps: self.eps.iter().map(|&e| -e).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.eps
    }

    /// `D_ε v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter().zip(&self.eps).map(|(&x, &e)| f64::from(e) * x),
        )
    }

    /// `D_ε M` (row scaling).
    pub fn apply_rows(&self, mat: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = mat.clone();
        for (i, &e) in self.eps.iter().enumerate() {
            if e < 0 {
                out.row_mut(i).neg_mut();
            }
        }
        out
    }
}

/// Canonical representative of `{x, −x}`: the first coordinate with
/// `|x_i| > SIGN_TOL` is made positive.
pub fn canonicalize(x: &DVector<f64>) -> DVector<f64> {
    match x.iter().find(|v| v.abs() > SIGN_TOL) {
        Some(&v) if v < 0.0 => -x,
        _ => x.clone(),
    }
}

/// A solution up to global sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignClass {
    #[serde(with = "serde_util::dvec")]
    pub rep: DVector<f64>,
    pub value: f64,
}

impl SignClass {
    pub fn new(x: &DVector<f64>, value: f64) -> Self {
        Self {
            rep: canonicalize(x),
            value,
        }
    }
}

/// All global minimizers of the objective, one entry per sign class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub optimal_value: f64,
    pub classes: Vec<SignClass>,
    pub num_patterns_explored: usize,
    pub ties_within: f64,
    /// Whether every class passed the fixed-point check; `None` when the check
    /// does not apply (rank-deficient `A` or `b` with negative entries).
    pub fixed_point_verified: Option<bool>,
}

impl SolutionSet {
    pub fn is_unique(&self) -> bool {
        self.classes.len() == 1
    }
}

/// `‖|Ax| − b‖²`.
pub fn objective(a: &SenseMatrix, b: &Observation, x: &DVector<f64>) -> Result<f64> {
    b.check_against(a)?;
    let y = abs_measure(a, x)?;
    Ok((y - b.values()).norm_squared())
}

/// `min(‖x − y‖, ‖x + y‖)`, the distance between the classes of `x` and `y`.
pub fn quotient_distance(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "vector",
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok((x - y).norm().min((x + y).norm()))
}

/// `|Ax|` entrywise.
pub fn abs_measure(a: &SenseMatrix, x: &DVector<f64>) -> Result<DVector<f64>> {
    a.check_d(x, "x")?;
    Ok((a.entries() * x).abs())
}

/// Returns a copy of `a` with its whitening populated.
///
/// Uses the symmetric factor `Ã = A (AᵀA)^{-1/2}`, `T = (AᵀA)^{1/2}`, i.e.
/// `Ã = U Vᵀ` and `T = V Σ Vᵀ` from `A = U Σ Vᵀ`. This differs from `U` only by
/// an orthogonal change of coordinates and reduces to `Ã = A`, `T = I` when `A`
/// already has orthonormal columns.
pub fn whiten(a: &SenseMatrix) -> Result<SenseMatrix> {
    a.require_full_rank()?;
    let svd = linalg::thin_svd(a.entries());
    let vt = svd.v.transpose();
    let matrix = &svd.u * &vt;
    let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&svd.singular_values));
    let transform = &svd.v * sigma * &vt;

    let gram_dev = linalg::max_abs(&(matrix.transpose() * &matrix - DMatrix::identity(a.d(), a.d())));
    let recon_dev = linalg::max_abs(&(&matrix * &transform - a.entries()));
    let scale = 1.0 + a.sigma_max();
    if gram_dev > WHITENING_TOL || recon_dev > WHITENING_TOL * scale {
        return Err(Error::Precondition(format!(
            "whitening lost accuracy (gram {gram_dev:e}, reconstruction {recon_dev:e})"
        )));
    }
    let mut out = a.clone();
    out.whitened = Some(Whitening { matrix, transform });
    Ok(out)
}

/// `‖AᵀA − I‖_max` for the given matrix.
pub fn orthonormality_defect(a: &SenseMatrix) -> f64 {
    let e = a.entries();
    linalg::max_abs(&(e.transpose() * e - DMatrix::identity(a.d(), a.d())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a3() -> SenseMatrix {
        SenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn objective_examples() {
        let i2 = SenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let b = Observation::from_slice(&[1.0, 1.0]).unwrap();
        assert_eq!(objective(&i2, &b, &v(&[1.0, -1.0])).unwrap(), 0.0);

        let b = Observation::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        let f = objective(&a3(), &b, &v(&[2.0 / 3.0, 2.0 / 3.0])).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);

        let b = Observation::from_slice(&[1.0, -2.0, 3.0]).unwrap();
        let f = objective(&a3(), &b, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(f, 14.0);
    }

    #[test]
    fn objective_rejects_bad_dimensions() {
        let b = Observation::from_slice(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            objective(&a3(), &b, &v(&[1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = Observation::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        assert!(objective(&a3(), &b, &v(&[1.0])).is_err());
    }

    #[test]
    fn quotient_distance_examples() {
        assert_eq!(quotient_distance(&v(&[1.0, 2.0]), &v(&[-1.0, -2.0])).unwrap(), 0.0);
        let d = quotient_distance(&v(&[1.0, 2.0]), &v(&[2.0, 4.0])).unwrap();
        assert!((d - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(quotient_distance(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(quotient_distance(&v(&[0.0]), &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn abs_measure_examples() {
        assert_eq!(abs_measure(&a3(), &v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0, 3.0]));
        assert_eq!(abs_measure(&a3(), &v(&[1.0, -1.0])).unwrap(), v(&[1.0, 1.0, 0.0]));
        assert_eq!(abs_measure(&a3(), &v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn whiten_orthonormal_is_identity() {
        let s = 0.5f64.sqrt();
        let a = SenseMatrix::from_rows(&[[s, 0.0], [s, 0.0], [0.0, 1.0]]).unwrap();
        let w = whiten(&a).unwrap();
        let wh = w.whitened().unwrap();
        assert!(linalg::max_abs(&(wh.matrix() - a.entries())) < 1e-10);
        assert!(linalg::max_abs(&(wh.transform() - DMatrix::identity(2, 2))) < 1e-10);
    }

    #[test]
    fn whiten_projector_matches_direct_inverse() {
        // Oracle: A (AᵀA)⁻¹ Aᵀ with an explicit 2x2 inverse, independent of the SVD path.
        let a = a3();
        let e = a.entries();
        let g = e.transpose() * e;
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let ginv = DMatrix::from_row_slice(
            2,
            2,
            &[g[(1, 1)] / det, -g[(0, 1)] / det, -g[(1, 0)] / det, g[(0, 0)] / det],
        );
        let oracle = e * ginv * e.transpose();
        let frozen = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 1.0, -1.0, 2.0, 1.0, 1.0, 1.0, 2.0]) / 3.0;
        assert!(linalg::max_abs(&(&oracle - &frozen)) < 1e-14);

        let w = whiten(&a).unwrap();
        let wm = w.whitened().unwrap().matrix();
        assert!(linalg::max_abs(&(wm * wm.transpose() - frozen)) < 1e-10);
        assert!(orthonormality_defect(&w.whitened_matrix().unwrap()) < 1e-10);
    }

    #[test]
    fn whiten_rejects_rank_deficient() {
        let a = SenseMatrix::from_rows(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(a.rank(), 1);
        match whiten(&a) {
            Err(Error::RankDeficient { rank, d, index, .. }) => {
                assert_eq!((rank, d, index), (1, 2, 2));
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn matrix_rejects_empty_and_nonfinite() {
        assert!(SenseMatrix::new(DMatrix::zeros(0, 2)).is_err());
        assert!(SenseMatrix::from_rows(&[[f64::NAN, 1.0]]).is_err());
        assert!(SenseMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn canonical_patterns_roundtrip() {
        for m in 1..6 {
            for k in 0..SignPattern::canonical_count(m) {
                let p = SignPattern::canonical_from_index(m, k);
                assert!(p.is_canonical());
                assert_eq!(p.canonical_index(), k);
                assert_eq!(p.negated().canonical_index(), k);
            }
        }
        let p = SignPattern::canonical_from_index(3, 1);
        assert_eq!(p.signs(), &[1, -1, 1]);
        assert!(SignPattern::new(vec![1, 0]).is_err());
    }

    #[test]
    fn sign_of_zero_is_positive() {
        let p = SignPattern::of_vector(&v(&[0.0, -1.0, 2.0]));
        assert_eq!(p.signs(), &[1, -1, 1]);
    }

    #[test]
    fn canonicalize_rules() {
        assert_eq!(canonicalize(&v(&[0.0, -2.0, 1.0])), v(&[0.0, 2.0, -1.0]));
        assert_eq!(canonicalize(&v(&[1e-13, -2.0])), v(&[-1e-13, 2.0]));
        assert_eq!(canonicalize(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
    }
}
