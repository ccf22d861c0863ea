//! Infinite-horizon state-cost accumulator `G = sum_t (A^t)^T Q A^t` and the
//! discrete Sylvester equation `A^T X B + C = X`.

use nalgebra::{DMatrix, DVector};

use crate::error::{mismatch, Error, Result};
use crate::linalg::{spectral_norm, spectral_radius, symmetrize};
use crate::model::StabilityCertificate;

pub const DEFAULT_GRAMIAN_TOL: f64 = 1e-13;
/// Pencils with some `|lambda_i mu_j - 1|` at or below this are rejected.
pub const PENCIL_TOLERANCE: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    pub g: DMatrix<f64>,
    /// `||A^T G A + Q - G||`.
    pub defect: f64,
}

/// `G` by squaring: `G <- G + A_j^T G A_j`, `A_j <- A_j^2`, starting from
/// `G = Q`, stopping once `||A_j||^2 ||G|| <= tol`.
pub fn gramian(a: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> Result<Gramian> {
    if !a.is_square() {
        return Err(mismatch("A", (a.nrows(), a.nrows()), a.shape()));
    }
    if q.shape() != a.shape() {
        return Err(mismatch("Q", a.shape(), q.shape()));
    }
    let radius = spectral_radius(a);
    if radius >= 1.0 {
        return Err(Error::Unstable {
            what: "A (G is undefined)".into(),
            spectral_radius: radius,
        });
    }
    let mut g = q.clone();
    let mut aj = a.clone();
    let mut doublings = 0;
    loop {
        let na = spectral_norm(&aj);
        let step = na * na * spectral_norm(&g);
        if step <= tol {
            break;
        }
        if doublings == MAX_DOUBLINGS || !step.is_finite() {
            return Err(Error::NoConvergence {
                iterations: doublings,
                last_step: step,
            });
        }
        g = symmetrize(&(&g + aj.transpose() * &g * &aj));
        aj = &aj * &aj;
        doublings += 1;
    }
    let defect = spectral_norm(&(a.transpose() * &g * a + q - &g));
    Ok(Gramian { g, defect })
}

fn column_major(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Solves `A^T X B + C = X` through the vectorized system
/// `(I - B^T kron A^T) vec(X) = vec(C)`.
pub fn solve_dsylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(mismatch("A", (a.nrows(), a.nrows()), a.shape()));
    }
    if !b.is_square() {
        return Err(mismatch("B", (b.nrows(), b.nrows()), b.shape()));
    }
    let (p, q) = (a.nrows(), b.nrows());
    if c.shape() != (p, q) {
        return Err(mismatch("C", (p, q), c.shape()));
    }

    let lambdas = a.complex_eigenvalues();
    let mus = b.complex_eigenvalues();
    let gap = lambdas
        .iter()
        .flat_map(|l| mus.iter().map(move |m| (l * m - 1.0).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap <= PENCIL_TOLERANCE {
        return Err(Error::SingularPencil { gap });
    }

    let lifted = DMatrix::identity(p * q, p * q) - b.transpose().kronecker(&a.transpose());
    let x = lifted
        .lu()
        .solve(&column_major(c))
        .ok_or(Error::SingularPencil { gap })?;
    Ok(DMatrix::from_column_slice(p, q, x.as_slice()))
}

/// Upper bound on `||G A^m||` from a certificate on `A`:
/// `tau^2 ||Q|| e^{-rho m} / (1 - e^{-2 rho})`.
pub fn bound_g_times_power(cert: &StabilityCertificate, norm_q: f64, m: usize) -> f64 {
    let (tau, rho) = (cert.tau, cert.rho);
    tau * tau * norm_q * (-rho * m as f64).exp() / (1.0 - (-2.0 * rho).exp())
}
