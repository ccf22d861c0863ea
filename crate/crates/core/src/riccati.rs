//! Discrete algebraic Riccati equation with a cross term.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, spectral_norm, spectral_radius, symmetrize};
use crate::model::LqrSystem;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// Cost-to-go matrix.
    pub p: DMatrix<f64>,
    /// Optimal gain, `u = K x`.
    pub k: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn inner_factor(sys: &LqrSystem, p: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let inner = symmetrize(&(sys.r() + sys.b().transpose() * p * sys.b()));
    Cholesky::new(inner).ok_or(Error::SingularInnerSolve)
}

/// `(B^T P A + S, chol(R + B^T P B))`.
fn gain_parts(sys: &LqrSystem, p: &DMatrix<f64>) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let cross = sys.b().transpose() * p * sys.a() + sys.s();
    Ok((cross, inner_factor(sys, p)?))
}

/// One Riccati step `A^T P A - (A^T P B + S^T)(R + B^T P B)^{-1}(B^T P A + S) + Q`.
fn riccati_map(sys: &LqrSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (cross, chol) = gain_parts(sys, p)?;
    let next = sys.a().transpose() * p * sys.a() - cross.transpose() * chol.solve(&cross) + sys.q();
    Ok(symmetrize(&next))
}

/// `K = -(R + B^T P B)^{-1}(B^T P A + S)`.
pub fn gain_from_p(sys: &LqrSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (cross, chol) = gain_parts(sys, p)?;
    Ok(-chol.solve(&cross))
}

/// Spectral norm of the Riccati defect at `p`.
pub fn dare_residual(p: &DMatrix<f64>, sys: &LqrSystem) -> Result<f64> {
    Ok(spectral_norm(&(riccati_map(sys, p)? - p)))
}

/// Fixed-point Riccati iteration from `P = Q` until the relative step is
/// at most `tol`.
pub fn solve_dare(sys: &LqrSystem, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    let mut p = sys.q().clone();
    let mut last_step = f64::INFINITY;
    for it in 1..=max_iter {
        let next = riccati_map(sys, &p)?;
        if !all_finite(&next) {
            return Err(Error::NoConvergence {
                iterations: it,
                last_step,
            });
        }
        last_step = spectral_norm(&(&next - &p));
        let scale = spectral_norm(&next);
        p = next;
        if last_step <= tol * scale {
            let k = gain_from_p(sys, &p)?;
            let closed = spectral_radius(&(sys.a() + sys.b() * &k));
            if closed >= 1.0 {
                return Err(Error::Unstable {
                    what: "Riccati closed loop A + B K".into(),
                    spectral_radius: closed,
                });
            }
            let residual_norm = dare_residual(&p, sys)?;
            log::debug!("DARE converged in {it} iterations, residual {residual_norm:.3e}");
            return Ok(RiccatiSolution {
                p,
                k,
                residual_norm,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_step,
    })
}
