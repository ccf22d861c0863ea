//! Pre-stabilized reformulation for open-loop unstable plants.
//!
//! With `u = K0 x + u_bar` the problem becomes an LQR in `u_bar` over
//! `A_bar = A + B K0` with weights
//! `Q_bar = Q + K0^T S + S^T K0 + K0^T R K0` and `S_bar = R K0 + S`.
//! Its optimal gain is `K* - K0`.

use nalgebra::DMatrix;

use crate::error::{mismatch, Error, Result};
use crate::linalg::{spectral_radius, symmetrize};
use crate::model::LqrSystem;
use crate::riccati::{solve_dare, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct PrestabilizedSystem {
    pub base: LqrSystem,
    pub k0: DMatrix<f64>,
    pub transformed: LqrSystem,
}

pub fn transform(sys: &LqrSystem, k0: &DMatrix<f64>) -> Result<PrestabilizedSystem> {
    let a_bar = sys.closed_loop(k0)?;
    let radius = spectral_radius(&a_bar);
    if radius >= 1.0 {
        return Err(Error::NotStabilizing {
            spectral_radius: radius,
        });
    }
    let (q, r, s) = (sys.q(), sys.r(), sys.s());
    let cross = k0.transpose() * s;
    let q_bar = symmetrize(&(q + &cross + cross.transpose() + k0.transpose() * r * k0));
    let s_bar = r * k0 + s;
    let transformed = LqrSystem::new(a_bar, sys.b().clone(), q_bar, r.clone(), s_bar)?;
    Ok(PrestabilizedSystem {
        base: sys.clone(),
        k0: k0.clone(),
        transformed,
    })
}

/// `K0 + L1`: the original-coordinates gain approximated by the first DRC
/// block of the transformed problem.
pub fn recover_gain(k0: &DMatrix<f64>, l1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if k0.shape() != l1.shape() {
        return Err(mismatch("L1", k0.shape(), l1.shape()));
    }
    Ok(k0 + l1)
}

/// Convenience pre-stabilizer: the LQR gain for unit weights `Q = I`,
/// `R = I`, `S = 0` on the same `(A, B)`.
pub fn default_prestabilizer(sys: &LqrSystem) -> Result<DMatrix<f64>> {
    let (n_x, n_u) = (sys.n_x(), sys.n_u());
    let aux = LqrSystem::new(
        sys.a().clone(),
        sys.b().clone(),
        DMatrix::identity(n_x, n_x),
        DMatrix::identity(n_u, n_u),
        DMatrix::zeros(n_u, n_x),
    )?;
    Ok(solve_dare(&aux, DEFAULT_TOL, DEFAULT_MAX_ITER)?.k)
}
