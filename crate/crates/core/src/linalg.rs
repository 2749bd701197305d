//! Small dense linear-algebra helpers shared by the numerical modules.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::{Error, Result};

/// Condition number above which a system is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Eigenvector `i` is column `i` of the returned matrix.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the solver's order for exact ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes `m` and clips negative eigenvalues to zero.
pub fn nearest_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clipped) * v.transpose()))
}

/// Condition number of a symmetric positive (semi-)definite matrix from its
/// extreme eigenvalues. Returns infinity when the smallest is not positive.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
}

/// Moore-Penrose pseudo-inverse via SVD. Fails with `RankDeficient` when the
/// ratio of the extreme singular values exceeds `limit`.
pub fn pseudo_inverse(m: &DMatrix<f64>, limit: f64) -> Result<DMatrix<f64>> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if smax == 0.0 || !(smax / smin <= limit) {
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        return Err(Error::RankDeficient(cond));
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let inv_s = svd.singular_values.map(|s| 1.0 / s);
    Ok(v_t.transpose() * DMatrix::from_diagonal(&inv_s) * u.transpose())
}

/// Moore-Penrose pseudo-inverse that drops singular values below
/// `smax / limit` instead of failing on rank-deficient input.
pub fn truncated_pseudo_inverse(m: &DMatrix<f64>, limit: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(c, r);
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let inv_s = svd.singular_values.map(|s| if s * limit > smax { 1.0 / s } else { 0.0 });
    v_t.transpose() * DMatrix::from_diagonal(&inv_s) * u.transpose()
}

/// Log-density of `x` under `N(mean, cov)` given the Cholesky factor of `cov`.
pub fn gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let d = x.len() as f64;
    let diff = x - mean;
    let z = chol
        .l_dirty()
        .solve_lower_triangular(&diff)
        .expect("cholesky factor has nonzero diagonal");
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| libm::log(*v)).sum::<f64>() * 2.0;
    -0.5 * (d * libm::log(2.0 * core::f64::consts::PI) + log_det + z.norm_squared())
}

/// `log(Σ exp(v))` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(values.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = symmetric_eigen_desc(&m);
        assert_eq!(vals.as_slice(), &[5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_tall_matrix_is_left_inverse() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0]);
        let p = pseudo_inverse(&m, CONDITION_LIMIT).unwrap();
        let id = &p * &m;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pinv_rejects_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(pseudo_inverse(&m, CONDITION_LIMIT), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn psd_projection_clips_negative_modes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-6]);
        let p = nearest_psd(&m);
        assert!(min_eigenvalue(&p) >= 0.0);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [0.1, -2.0, 1.5];
        let direct = libm::log(v.iter().map(|x| libm::exp(*x)).sum::<f64>());
        assert!((log_sum_exp(&v) - direct).abs() < 1e-14);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + libm::log(2.0))).abs() < 1e-12);
    }
}
