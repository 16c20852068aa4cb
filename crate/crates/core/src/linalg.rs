//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor, or `None` when the matrix is not numerically SPD.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    m.clone().cholesky().map(|c| c.unpack())
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !m.is_square() {
        return None;
    }
    m.clone().cholesky().map(|c| symmetrize(&c.inverse()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Numerical rank from singular values, relative tolerance `rtol`.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * top).count()
}

/// Least squares `argmin ‖y − x·coef‖` for full-column-rank `x`.
pub fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::shape("ols", x.nrows(), y.nrows()));
    }
    if x.nrows() < x.ncols() || rank(x, 1e-10) < x.ncols() {
        return Err(Error::DegenerateData(format!(
            "regressor matrix ({}x{}) is rank deficient",
            x.nrows(),
            x.ncols()
        )));
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::DegenerateData("X'X is not positive definite".into()))?;
    Ok(chol.solve(&xty))
}

/// Symmetric eigen-square-root `S^{1/2}` and inverse root `S^{-1/2}` of an SPD matrix.
pub fn sym_sqrt_pair(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let v = &eig.eigenvectors;
    let root = DVector::from_iterator(m.nrows(), eig.eigenvalues.iter().map(|l| l.sqrt()));
    let inv_root = root.map(|r| 1.0 / r);
    let sqrt = v * DMatrix::from_diagonal(&root) * v.transpose();
    let inv_sqrt = v * DMatrix::from_diagonal(&inv_root) * v.transpose();
    Some((symmetrize(&sqrt), symmetrize(&inv_sqrt)))
}

/// Orthonormal basis (as columns) of the null space of `rows`, an `r×k`
/// matrix with `r < k` and full row rank.
///
/// Householder QR of `rowsᵀ` yields a complete `k×k` orthogonal factor whose
/// trailing `k − r` columns span the orthogonal complement of the row space.
/// Returns `None` when the rows are numerically dependent or `r ≥ k`.
pub fn null_space(rows: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (r, k) = rows.shape();
    if r >= k {
        return None;
    }
    if r == 0 {
        return Some(DMatrix::identity(k, k));
    }
    let mut a = rows.transpose();
    let mut q = DMatrix::<f64>::identity(k, k);
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..r {
        let x = a.view((col, col), (k - col, 1)).clone_owned();
        let norm = x.norm();
        if norm <= 1e-12 * scale {
            return None;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            continue;
        }
        v /= vnorm;
        // A[col.., col..] ← (I − 2vvᵀ) A[col.., col..]
        {
            let mut block = a.view_mut((col, col), (k - col, r - col));
            let proj = v.transpose() * &block;
            block -= &v * proj * 2.0;
        }
        // Q[:, col..] ← Q[:, col..] (I − 2vvᵀ)
        {
            let mut block = q.view_mut((0, col), (k, k - col));
            let proj = &block * &v;
            block -= proj * v.transpose() * 2.0;
        }
    }
    Some(q.columns(r, k - r).clone_owned())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `‖QQᵀ − I‖∞` as the largest absolute entry.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    max_abs(&(q * q.transpose() - DMatrix::<f64>::identity(n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_is_orthonormal_complement() {
        let rows = DMatrix::from_row_slice(2, 5, &[
            1.0, 2.0, 0.5, -1.0, 3.0, //
            0.0, 1.0, -2.0, 4.0, 1.0,
        ]);
        let n = null_space(&rows).unwrap();
        assert_eq!(n.shape(), (5, 3));
        assert!(max_abs(&(&rows * &n)) < 1e-12);
        let gram = n.transpose() * &n;
        assert!(max_abs(&(gram - DMatrix::<f64>::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn null_space_rejects_full_or_dependent_rows() {
        assert!(null_space(&DMatrix::<f64>::identity(3, 3)).is_none());
        let dep = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(null_space(&dep).is_none());
    }

    #[test]
    fn ols_recovers_exact_fit_and_flags_collinearity() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DMatrix::from_column_slice(4, 1, &[1.0, 3.0, 5.0, 7.0]);
        let b = ols(&x, &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        let bad = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(ols(&bad, &y.rows(0, 3).clone_owned()), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn sym_sqrt_pair_inverts() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let (r, ir) = sym_sqrt_pair(&s).unwrap();
        assert!(max_abs(&(&r * &r - &s)) < 1e-12);
        assert!(max_abs(&(&r * &ir - DMatrix::<f64>::identity(2, 2))) < 1e-12);
    }
}
