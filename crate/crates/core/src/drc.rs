//! Disturbance-response controllers `u_t = L_1 w_{t-1} + ... + L_H w_{t-H}`.
//!
//! The optimal order-`H` controller solves the block system `M L + J = 0`
//! where, with `G = sum_t (A^t)^T Q A^t`,
//!
//! ```text
//! M_kk = B^T G B + R
//! M_km = B^T G A^(k-m) B + S A^(k-m-1) B        (k > m)
//! M_km = M_mk^T                                   (k < m)
//! J_k  = B^T G A^k + S A^(k-1)
//! ```
//!
//! The state-feedback gain `K` induces the infinite controller
//! `L_k = K (A + B K)^(k-1)`; truncated to `H` blocks it satisfies
//! `M L + J = E`, with `E` collapsing to a Sylvester solve.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{mismatch, Error, Result};
use crate::linalg::{powers, spectral_radius, sym_lambda_min};
use crate::lyapunov::{solve_dsylvester, Gramian};
use crate::model::LqrSystem;

/// Order-`H` disturbance-response controller; `blocks[k-1]` is `L_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrcPolicy {
    blocks: Vec<DMatrix<f64>>,
}

impl DrcPolicy {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = blocks.first().ok_or(Error::InvalidHorizon {
            h: 0,
            reason: "a policy needs at least one block".into(),
        })?;
        let shape = first.shape();
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != shape {
                return Err(mismatch(&format!("L_{}", i + 1), shape, b.shape()));
            }
        }
        Ok(Self { blocks })
    }

    pub fn zeros(h: usize, n_u: usize, n_x: usize) -> Result<Self> {
        Self::new(vec![DMatrix::zeros(n_u, n_x); h])
    }

    /// Splits an `(H n_u) x n_x` stack into blocks.
    pub fn from_stacked(stacked: &DMatrix<f64>, n_u: usize) -> Result<Self> {
        if n_u == 0 || !stacked.nrows().is_multiple_of(n_u) {
            return Err(mismatch(
                "stacked policy",
                (n_u.max(1), stacked.ncols()),
                stacked.shape(),
            ));
        }
        let h = stacked.nrows() / n_u;
        Self::new(
            (0..h)
                .map(|k| stacked.rows(k * n_u, n_u).into_owned())
                .collect(),
        )
    }

    pub fn horizon(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// `L_k`, one-based.
    pub fn block(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k - 1]
    }

    pub fn n_u(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn n_x(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        let (n_u, n_x) = (self.n_u(), self.n_x());
        let mut out = DMatrix::zeros(self.horizon() * n_u, n_x);
        for (k, b) in self.blocks.iter().enumerate() {
            out.rows_mut(k * n_u, n_u).copy_from(b);
        }
        out
    }

    /// Same policy with zero blocks appended up to order `h`.
    pub fn padded(&self, h: usize) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.resize(
            h.max(self.horizon()),
            DMatrix::zeros(self.n_u(), self.n_x()),
        );
        Self { blocks }
    }
}

/// Assembled `(M, J)` for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DrcSystemMatrices {
    pub m: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub h: usize,
    pub n_u: usize,
}

impl DrcSystemMatrices {
    /// `M L + J`, split into `H` blocks.
    pub fn apply(&self, policy: &DrcPolicy) -> Result<Vec<DMatrix<f64>>> {
        if policy.horizon() != self.h || policy.n_u() != self.n_u || policy.n_x() != self.j.ncols()
        {
            return Err(mismatch(
                "policy",
                (self.h * self.n_u, self.j.ncols()),
                (policy.horizon() * policy.n_u(), policy.n_x()),
            ));
        }
        let out = &self.m * policy.stacked() + &self.j;
        Ok(DrcPolicy::from_stacked(&out, self.n_u)?.blocks)
    }

    pub fn m_block(&self, k: usize, m: usize) -> DMatrix<f64> {
        let n = self.n_u;
        self.m.view(((k - 1) * n, (m - 1) * n), (n, n)).into_owned()
    }

    pub fn j_block(&self, k: usize) -> DMatrix<f64> {
        self.j.rows((k - 1) * self.n_u, self.n_u).into_owned()
    }
}

fn check_horizon(h: usize) -> Result<()> {
    if h < 1 {
        return Err(Error::InvalidHorizon {
            h,
            reason: "horizon must be at least 1".into(),
        });
    }
    Ok(())
}

/// Builds `(M, J)` for horizon `h`.
pub fn assemble(sys: &LqrSystem, gram: &Gramian, h: usize) -> Result<DrcSystemMatrices> {
    check_horizon(h)?;
    let (a, b, s, g) = (sys.a(), sys.b(), sys.s(), &gram.g);
    if g.shape() != a.shape() {
        return Err(mismatch("G", a.shape(), g.shape()));
    }
    let n_u = sys.n_u();
    let n_x = sys.n_x();
    let a_pows = powers(a, h);
    let bt_g = b.transpose() * g;

    // M is block Toeplitz: the (k, m) block depends on k - m only.
    let diag = &bt_g * b + sys.r();
    let lower: Vec<DMatrix<f64>> = (1..h)
        .map(|d| &bt_g * &a_pows[d] * b + s * &a_pows[d - 1] * b)
        .collect();

    let mut m = DMatrix::zeros(h * n_u, h * n_u);
    for k in 0..h {
        m.view_mut((k * n_u, k * n_u), (n_u, n_u)).copy_from(&diag);
        for c in 0..k {
            let blk = &lower[k - c - 1];
            m.view_mut((k * n_u, c * n_u), (n_u, n_u)).copy_from(blk);
            m.view_mut((c * n_u, k * n_u), (n_u, n_u))
                .copy_from(&blk.transpose());
        }
    }

    let mut j = DMatrix::zeros(h * n_u, n_x);
    for k in 1..=h {
        let jk = &bt_g * &a_pows[k] + s * &a_pows[k - 1];
        j.rows_mut((k - 1) * n_u, n_u).copy_from(&jk);
    }
    Ok(DrcSystemMatrices { m, j, h, n_u })
}

/// Unique minimizer of the order-`H` cost: `L = -M^{-1} J`.
pub fn solve_drc(mats: &DrcSystemMatrices) -> Result<DrcPolicy> {
    let chol = Cholesky::new(mats.m.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        what: format!("M (H = {})", mats.h),
        lambda_min: sym_lambda_min(&mats.m),
    })?;
    let l = -chol.solve(&mats.j);
    DrcPolicy::from_stacked(&l, mats.n_u)
}

/// First `h` blocks of the controller induced by the gain `k`:
/// `L_i = K (A + B K)^(i-1)`.
pub fn induced_drc(k: &DMatrix<f64>, sys: &LqrSystem, h: usize) -> Result<DrcPolicy> {
    check_horizon(h)?;
    let a_cl = sys.closed_loop(k)?;
    let mut blocks = Vec::with_capacity(h);
    let mut cur = k.clone();
    for _ in 0..h {
        let next = &cur * &a_cl;
        blocks.push(cur);
        cur = next;
    }
    DrcPolicy::new(blocks)
}

/// Tail left when the induced controller is truncated to `h` blocks, i.e.
/// `E_k = -sum_{m > h} M_km L_m` for `k = 1..=h`.
///
/// With `W = (A^T G B + S^T) K` and `Y` solving `A^T Y (A + B K) + W = Y`,
/// the tail collapses to `E_k = -B^T (A^T)^(h-k) Y (A + B K)^h`.
pub fn residual_e(
    sys: &LqrSystem,
    gram: &Gramian,
    k: &DMatrix<f64>,
    h: usize,
) -> Result<Vec<DMatrix<f64>>> {
    check_horizon(h)?;
    let a = sys.a();
    let a_cl = sys.closed_loop(k)?;
    for (what, m) in [("A", a), ("A + B K", &a_cl)] {
        let radius = spectral_radius(m);
        if radius >= 1.0 {
            return Err(Error::Unstable {
                what: what.into(),
                spectral_radius: radius,
            });
        }
    }
    let w = (a.transpose() * &gram.g * sys.b() + sys.s().transpose()) * k;
    let y = solve_dsylvester(a, &a_cl, &w)?;
    let right = y * crate::linalg::mat_pow(&a_cl, h);
    let at_pows = powers(&a.transpose(), h - 1);
    let bt = sys.b().transpose();
    Ok((1..=h).map(|i| -(&bt * &at_pows[h - i] * &right)).collect())
}
