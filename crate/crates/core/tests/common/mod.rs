//! Seeded random systems and independent reference computations shared by
//! the integration tests.
#![allow(dead_code)]

use drc_lqr::linalg::spectral_radius;
use drc_lqr::LqrSystem;
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn matrix(&mut self, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| self.normal())
    }

    /// Gaussian matrix rescaled to spectral radius `radius`.
    pub fn with_radius(&mut self, n: usize, radius: f64) -> DMatrix<f64> {
        loop {
            let m = self.matrix(n, n);
            let r = spectral_radius(&m);
            if r > 1e-3 {
                return m * (radius / r);
            }
        }
    }

    /// Joint weight `[[Q, S^T], [S, R]] = F F^T + eps I`, split into blocks.
    pub fn weights(
        &mut self,
        n_x: usize,
        n_u: usize,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let d = n_x + n_u;
        let f = self.matrix(d, d);
        let eps = self.range(0.05, 1.0);
        let w = &f * f.transpose() * (1.0 / d as f64) + DMatrix::identity(d, d) * eps;
        let q = w.view((0, 0), (n_x, n_x)).into_owned();
        let r = w.view((n_x, n_x), (n_u, n_u)).into_owned();
        let s = w.view((n_x, 0), (n_u, n_x)).into_owned();
        (q, r, s)
    }

    /// Stable system with `n_x <= 6`, `n_u <= 3`, `rho(A) <= 0.95`.
    pub fn stable_system(&mut self) -> LqrSystem {
        let n_x = self.int(1, 6);
        let n_u = self.int(1, 3);
        let radius = self.range(0.05, 0.95);
        let a = self.with_radius(n_x, radius);
        let b = self.matrix(n_x, n_u);
        let (q, r, s) = self.weights(n_x, n_u);
        LqrSystem::new(a, b, q, r, s).expect("joint block is positive definite")
    }

    /// `n x n` plant with spectral radius in `[1.1, 1.6]`.
    pub fn unstable_system(&mut self, n_x: usize, n_u: usize) -> LqrSystem {
        let radius = self.range(1.1, 1.6);
        let a = self.with_radius(n_x, radius);
        let b = self.matrix(n_x, n_u);
        let (q, r, s) = self.weights(n_x, n_u);
        LqrSystem::new(a, b, q, r, s).expect("joint block is positive definite")
    }
}

pub fn random_systems(count: usize, seed: u64) -> Vec<LqrSystem> {
    let mut g = Gen::new(seed);
    (0..count).map(|_| g.stable_system()).collect()
}

pub fn example_system() -> LqrSystem {
    drc_lqr::io::bundled("paper3x3").unwrap().system
}

fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// Value iteration on the stacked Q-function `Z = [A B]^T P [A B] + W`,
/// starting from `P = 0`. Returns `(P, K)`.
pub fn value_iteration(sys: &LqrSystem, steps: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n_x, n_u) = (sys.n_x(), sys.n_u());
    let mut ab = DMatrix::zeros(n_x, n_x + n_u);
    ab.view_mut((0, 0), (n_x, n_x)).copy_from(sys.a());
    ab.view_mut((0, n_x), (n_x, n_u)).copy_from(sys.b());
    let mut w = DMatrix::zeros(n_x + n_u, n_x + n_u);
    w.view_mut((0, 0), (n_x, n_x)).copy_from(sys.q());
    w.view_mut((n_x, n_x), (n_u, n_u)).copy_from(sys.r());
    w.view_mut((n_x, 0), (n_u, n_x)).copy_from(sys.s());
    w.view_mut((0, n_x), (n_x, n_u))
        .copy_from(&sys.s().transpose());

    let mut p = DMatrix::zeros(n_x, n_x);
    let mut k = DMatrix::zeros(n_u, n_x);
    for _ in 0..steps {
        let z = ab.transpose() * &p * &ab + &w;
        let zxx = z.view((0, 0), (n_x, n_x));
        let zux = z.view((n_x, 0), (n_u, n_x)).into_owned();
        let zuu_inv = inverse(&z.view((n_x, n_x), (n_u, n_u)).into_owned());
        k = -(&zuu_inv * &zux);
        p = zxx - zux.transpose() * &zuu_inv * &zux;
        p = (&p + p.transpose()) * 0.5;
    }
    (p, k)
}

/// `vec(G) = (I - A^T kron A^T)^{-1} vec(Q)`.
pub fn kronecker_gramian(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a.transpose();
    let lifted = DMatrix::identity(n * n, n * n) - at.kronecker(&at);
    let v = inverse(&lifted) * DVector::from_column_slice(q.as_slice());
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// `||A^k||^(1/k)` for large `k`, an independent spectral-radius estimate.
pub fn gelfand_radius(a: &DMatrix<f64>, k: u32) -> f64 {
    let mut p = DMatrix::identity(a.nrows(), a.ncols());
    let mut log_scale = 0.0;
    for _ in 0..k {
        p = &p * a;
        let s = p.amax();
        if s == 0.0 {
            return 0.0;
        }
        p /= s;
        log_scale += s.ln();
    }
    ((log_scale + drc_lqr::linalg::spectral_norm(&p).ln()) / k as f64).exp()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
