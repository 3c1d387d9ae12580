//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in descending order.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let k = a.nrows().min(a.ncols());
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut su = DMatrix::zeros(a.nrows(), k);
    let mut sv = DMatrix::zeros(a.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv.set_column(dst, &v_t.row(src).transpose());
        s.push(svd.singular_values[src]);
    }
    ThinSvd {
        u: su,
        singular_values: s,
        v: sv,
    }
}

/// Number of singular values strictly above `RANK_RTOL * scale`.
pub(crate) fn numeric_rank(singular_values: &[f64], scale: f64) -> usize {
    let tol = RANK_RTOL * scale;
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Rank of the rows of `a` selected by `rows`, with the threshold taken
/// relative to `scale` (normally the largest singular value of the full matrix).
pub(crate) fn subset_rank(a: &DMatrix<f64>, rows: &[usize], scale: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let sub = a.select_rows(rows.iter());
    let s = sub.singular_values();
    numeric_rank(s.as_slice(), scale)
}

/// Smallest eigenvalue of a symmetric matrix. An empty matrix yields 0.
pub(crate) fn lambda_min(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(g.clone());
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Gram matrix `sum_{i in rows} a_i a_i^T` (d x d).
pub(crate) fn row_gram(a: &DMatrix<f64>, rows: impl Iterator<Item = usize>) -> DMatrix<f64> {
    let d = a.ncols();
    let mut g = DMatrix::zeros(d, d);
    for i in rows {
        let r = a.row(i);
        for p in 0..d {
            let rp = r[p];
            if rp == 0.0 {
                continue;
            }
            for q in 0..d {
                g[(p, q)] += rp * r[q];
            }
        }
    }
    g
}

/// Minimum-norm least squares solution of `m * x = rhs` via SVD.
pub(crate) fn lstsq(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (smax * 1e-13).max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps)
        .unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}
