//! SVD-based rank, span and null space helpers shared by certification and
//! floating detection.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Singular values with the matching left and right singular vectors,
/// sorted by decreasing singular value.
pub(crate) struct SortedSvd {
    pub values: Vec<f64>,
    pub u: Option<DMatrix<f64>>,
    pub v_t: Option<DMatrix<f64>>,
}

pub(crate) fn sorted_svd(a: &DMatrix<f64>, want_u: bool, want_v: bool) -> SortedSvd {
    let svd = a.clone().svd(want_u, want_v);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let values = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u = svd.u.map(|u| DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]));
    let v_t = svd.v_t.map(|v| DMatrix::from_fn(order.len(), v.ncols(), |r, c| v[(order[r], c)]));
    SortedSvd { values, u, v_t }
}

/// Decreasingly sorted singular values.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    sorted_svd(a, false, false).values
}

/// Number of singular values above `tol * sigma_1`.
pub fn numerical_rank(values: &[f64], tol: f64) -> usize {
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().filter(|&&s| s > tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the column space of `a`.
pub fn column_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = sorted_svd(a, true, false);
    let rank = numerical_rank(&svd.values, tol);
    svd.u.unwrap().columns(0, rank).into_owned()
}

/// Orthonormal basis of `{x : a x = 0}`, together with the singular values
/// that decided the rank.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = a.ncols();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    if a.nrows() == 0 {
        let basis = (0..n).map(|k| DVector::from_fn(n, |r, _| if r == k { 1.0 } else { 0.0 })).collect();
        return (basis, Vec::new());
    }
    // Pad with zero rows so the SVD returns a full right basis.
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = sorted_svd(&padded, false, true);
    let rank = numerical_rank(&svd.values, tol);
    let v_t = svd.v_t.unwrap();
    let basis = (rank..n).map(|r| v_t.row(r).transpose()).collect();
    let mut values = svd.values;
    values.truncate(a.nrows().min(n));
    (basis, values)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = sorted_svd(a, true, true);
    let rank = numerical_rank(&svd.values, tol);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut x = DVector::zeros(a.ncols());
    for k in 0..rank {
        let coeff = u.column(k).dot(b) / svd.values[k];
        x += v_t.row(k).transpose() * coeff;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_and_null_space_of_a_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(numerical_rank(&singular_values(&a), RANK_TOLERANCE), 2);
        let (null, _) = null_space(&a, RANK_TOLERANCE);
        assert_eq!(null.len(), 1);
        assert_relative_eq!((&a * &null[0]).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(null[0].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn null_space_of_empty_system_is_everything() {
        let a = DMatrix::<f64>::zeros(0, 2);
        assert_eq!(null_space(&a, RANK_TOLERANCE).0.len(), 2);
        let b = DMatrix::<f64>::zeros(3, 0);
        assert!(null_space(&b, RANK_TOLERANCE).0.is_empty());
    }

    #[test]
    fn min_norm_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = min_norm_solve(&a, &DVector::from_vec(vec![2.0]), RANK_TOLERANCE);
        assert_relative_eq!(x, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn column_space_is_orthonormal() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        let u = column_space(&a, RANK_TOLERANCE);
        assert_eq!(u.ncols(), 1);
        assert_relative_eq!(u.column(0).norm(), 1.0, epsilon = 1e-14);
    }
}
