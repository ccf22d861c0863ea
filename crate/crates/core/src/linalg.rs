//! Small dense helpers shared by the solvers. All norms are spectral
//! (operator 2-) norms.

use nalgebra::{DMatrix, SymmetricEigen};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn sym_lambda_min(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `max |m_ij - m_ji| / max(1, max |m_ij|)`.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() / scale
}

/// `m^k` by repeated multiplication.
pub fn mat_pow(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// `[m^0, m^1, ..., m^k]`.
pub fn powers(m: &DMatrix<f64>, k: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(DMatrix::identity(m.nrows(), m.ncols()));
    for i in 1..=k {
        let next = &out[i - 1] * m;
        out.push(next);
    }
    out
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Symmetric block matrix `[[q, s^T], [s, r]]`.
pub fn joint_block(q: &DMatrix<f64>, r: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let nx = q.nrows();
    let nu = r.nrows();
    let mut out = DMatrix::zeros(nx + nu, nx + nu);
    out.view_mut((0, 0), (nx, nx)).copy_from(q);
    out.view_mut((0, nx), (nx, nu)).copy_from(&s.transpose());
    out.view_mut((nx, 0), (nu, nx)).copy_from(s);
    out.view_mut((nx, nx), (nu, nu)).copy_from(r);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radius_of_scalar_and_nilpotent() {
        assert_abs_diff_eq!(spectral_radius(&DMatrix::from_element(1, 1, 0.5)), 0.5);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(spectral_radius(&nil), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn radius_of_rotation_is_modulus() {
        // eigenvalues 0.6 +- 0.8i scaled by 0.9
        let m = DMatrix::from_row_slice(2, 2, &[0.54, -0.72, 0.72, 0.54]);
        assert_abs_diff_eq!(spectral_radius(&m), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        // u v^T with |u| = 5, |v| = 1
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 0.0]);
        assert_abs_diff_eq!(spectral_norm(&m), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn joint_block_layout() {
        let q = DMatrix::from_element(1, 1, 1.0);
        let r = DMatrix::from_element(1, 1, 1.0);
        let s = DMatrix::from_element(1, 1, 2.0);
        let j = joint_block(&q, &r, &s);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert_abs_diff_eq!(sym_lambda_min(&j), -1.0, epsilon = 1e-12);
    }
}
