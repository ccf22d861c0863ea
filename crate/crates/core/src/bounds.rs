//! Closed-form bounds relating the optimal DRC to the optimal gain, and the
//! instability witness for DRCs on an unstable Jordan-type plant.

use nalgebra::{Cholesky, DMatrix};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::drc_state_covariance;
use crate::drc::DrcPolicy;
use crate::error::{Error, Result};
use crate::linalg::{mat_pow, spectral_norm, sym_lambda_min, symmetrize};
use crate::model::{LqrSystem, StabilityCertificate};

/// PSD ordering is checked as `lambda_min(cov - bound) >= -PSD_TOLERANCE`.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Norms and constants entering every bound, fixed once per system so all
/// horizons use the same certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub cert: StabilityCertificate,
    pub norm_b: f64,
    pub norm_q: f64,
    pub norm_s: f64,
    pub norm_r: f64,
    pub norm_k: f64,
    /// `lambda_min(R - S Q^{-1} S^T)`.
    pub lam: f64,
    pub n_x: usize,
}

impl BoundInputs {
    pub fn new(sys: &LqrSystem, k: &DMatrix<f64>, cert: StabilityCertificate) -> Result<Self> {
        let lam = schur_lambda_min(sys)?;
        Ok(Self {
            cert,
            norm_b: spectral_norm(sys.b()),
            norm_q: spectral_norm(sys.q()),
            norm_s: spectral_norm(sys.s()),
            norm_r: spectral_norm(sys.r()),
            norm_k: spectral_norm(k),
            lam,
            n_x: sys.n_x(),
        })
    }
}

/// `||K* - L_1^(H)||` bound:
/// `2 tau^3 (|B|^2 |K| |Q| + |B| |K| |S|) e^{-H rho} / (lam (1 - e^{-2 rho})^{5/2})`.
pub fn thm1_bound(inp: &BoundInputs, h: usize) -> f64 {
    let StabilityCertificate { tau, rho, .. } = inp.cert;
    let numer = 2.0
        * tau.powi(3)
        * (inp.norm_b * inp.norm_b * inp.norm_k * inp.norm_q
            + inp.norm_b * inp.norm_k * inp.norm_s);
    let denom = inp.lam * (1.0 - (-2.0 * rho).exp()).powf(2.5);
    numer * (-(h as f64) * rho).exp() / denom
}

/// Bound on `C(truncated induced DRC of K) - C(K)`:
/// `n_x^2 e^{-2 rho H} (|R| + 4 tau^4 (|B| |K|^2 + |K|)(|B| |Q| + |S|) / (1 - e^{-2 rho})^3)`.
pub fn perf_diff_bound(inp: &BoundInputs, h: usize) -> f64 {
    let StabilityCertificate { tau, rho, .. } = inp.cert;
    let n2 = (inp.n_x * inp.n_x) as f64;
    let k = inp.norm_k;
    let inner = inp.norm_r
        + 4.0 * tau.powi(4) * (inp.norm_b * k * k + k) * (inp.norm_b * inp.norm_q + inp.norm_s)
            / (1.0 - (-2.0 * rho).exp()).powi(3);
    n2 * (-2.0 * rho * h as f64).exp() * inner
}

/// Bound on `C(L*^(H)) - C(K*)`; the same expression evaluated at `K*`.
pub fn perf_gap_bound_optimal(inp: &BoundInputs, h: usize) -> f64 {
    perf_diff_bound(inp, h)
}

/// `||(K* - K0) - L_1^(H)||` bound for the pre-stabilized problem; `inp_bar`
/// carries the transformed weights, `||K* - K0||`, and a certificate valid
/// for both `A + B K0` and `A + B K*`.
pub fn unstable_bound(inp_bar: &BoundInputs, h: usize) -> f64 {
    thm1_bound(inp_bar, h)
}

/// `lambda_min(R - S Q^{-1} S^T)`.
pub fn schur_lambda_min(sys: &LqrSystem) -> Result<f64> {
    let chol = Cholesky::new(sys.q().clone()).ok_or(Error::Singular { what: "Q".into() })?;
    let q_inv_st = chol.solve(&sys.s().transpose());
    Ok(sym_lambda_min(&(sys.r() - sys.s() * q_inv_st)))
}

/// `A` with 2 on the diagonal and 1 on the superdiagonal, `B = e_n`.
pub fn witness_plant(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    (a, b)
}

/// Order-`h` single-input policy for [`witness_plant`] with entries drawn
/// uniformly from `[-scale, scale]`, reproducible from `seed`.
pub fn random_policy(n: usize, h: usize, scale: f64, seed: u64) -> Result<DrcPolicy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = (0..h)
        .map(|_| {
            DMatrix::from_fn(1, n, |_, _| {
                let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                scale * (2.0 * u - 1.0)
            })
        })
        .collect();
    DrcPolicy::new(blocks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    /// `(e1^T A^H (A^H)^T e1) sum_{k=H}^{t} A^(k-H) e1 e1^T (A^(k-H))^T`.
    pub lower_bound: DMatrix<f64>,
    /// Exact `E[x_{t+1} x_{t+1}^T]` under the policy.
    pub covariance: DMatrix<f64>,
    /// `lambda_min(covariance - lower_bound)`.
    pub gap_lambda_min: f64,
    /// Whether `e1^T A^(H-k) B = 0` for `1 <= k <= H`.
    pub structure_holds: bool,
    pub holds: bool,
}

/// Compares the exact state covariance of an order-`H` DRC on
/// [`witness_plant`] with the growing lower bound.
pub fn instability_witness(n: usize, h: usize, policy: &DrcPolicy, t: usize) -> Result<Witness> {
    if h < 1 || h > n {
        return Err(Error::InvalidHorizon {
            h,
            reason: format!("the witness needs 1 <= H <= n = {n}"),
        });
    }
    if t < h {
        return Err(Error::InvalidHorizon {
            h,
            reason: format!("time {t} is before the horizon"),
        });
    }
    if policy.horizon() != h || policy.n_u() != 1 || policy.n_x() != n {
        return Err(crate::error::mismatch(
            "policy",
            (h, n),
            (policy.horizon() * policy.n_u(), policy.n_x()),
        ));
    }
    let (a, b) = witness_plant(n);
    let structure_holds = (1..=h).all(|k| (mat_pow(&a, h - k) * &b)[(0, 0)] == 0.0);
    if !structure_holds {
        log::info!("e1^T A^(H-k) B = 0 fails for n = {n}, H = {h}");
    }

    let a_h = mat_pow(&a, h);
    let row = a_h.row(0);
    let scale = row.dot(&row);
    let mut sum = DMatrix::zeros(n, n);
    let mut col = DMatrix::zeros(n, 1);
    col[(0, 0)] = 1.0;
    for _ in h..=t {
        sum += &col * col.transpose();
        col = &a * col;
    }
    let lower_bound = sum * scale;

    let sys = LqrSystem::new(
        a,
        b,
        DMatrix::identity(n, n),
        DMatrix::identity(1, 1),
        DMatrix::zeros(1, n),
    )?;
    let covariance = drc_state_covariance(&sys, policy, t)?;
    let gap_lambda_min = sym_lambda_min(&symmetrize(&(&covariance - &lower_bound)));
    Ok(Witness {
        lower_bound,
        covariance,
        gap_lambda_min,
        structure_holds,
        holds: gap_lambda_min >= -PSD_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_inputs(norm_s: f64, norm_k: f64) -> BoundInputs {
        BoundInputs {
            cert: StabilityCertificate {
                tau: 1.0,
                rho: 2f64.ln(),
                k_max: 0,
            },
            norm_b: 1.0,
            norm_q: 1.0,
            norm_s,
            norm_r: 1.0,
            norm_k,
            lam: 1.0,
            n_x: 1,
        }
    }

    #[test]
    fn thm1_plug_in() {
        let inp = unit_inputs(0.0, 1.0);
        let want = 2.0 * 0.5 / 0.75f64.powf(2.5);
        assert_abs_diff_eq!(thm1_bound(&inp, 1), want, epsilon = 1e-14);
        assert_abs_diff_eq!(0.75f64.powf(2.5), 0.487139, epsilon = 1e-6);
        assert_abs_diff_eq!(thm1_bound(&inp, 1), 2.0528, epsilon = 1e-4);
    }

    #[test]
    fn bounds_decay_at_stated_rates() {
        let inp = unit_inputs(0.3, 0.7);
        let r = (-inp.cert.rho).exp();
        for h in 1..20 {
            assert_abs_diff_eq!(
                thm1_bound(&inp, h + 1) / thm1_bound(&inp, h),
                r,
                epsilon = 1e-13
            );
            assert_abs_diff_eq!(
                unstable_bound(&inp, h + 1) / unstable_bound(&inp, h),
                r,
                epsilon = 1e-13
            );
            assert_abs_diff_eq!(
                perf_diff_bound(&inp, h + 1) / perf_diff_bound(&inp, h),
                r * r,
                epsilon = 1e-13
            );
            assert_eq!(perf_gap_bound_optimal(&inp, h), perf_diff_bound(&inp, h));
        }
    }

    #[test]
    fn perf_bound_without_gain() {
        let inp = unit_inputs(0.5, 0.0);
        for h in 1..8 {
            assert_abs_diff_eq!(
                perf_diff_bound(&inp, h),
                4f64.powi(-(h as i32)),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn schur_complement_examples() {
        let sys = LqrSystem::scalar(0.5, 1.0, 3.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(schur_lambda_min(&sys).unwrap(), 2.0, epsilon = 1e-14);
        let sys = LqrSystem::scalar(0.5, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(schur_lambda_min(&sys).unwrap(), 1.0, epsilon = 1e-14);
        let joint = sys.report().joint_lambda_min;
        assert_abs_diff_eq!(joint, (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert!(joint <= 1.0);
    }

    #[test]
    fn witness_bound_for_n2() {
        let zero = DrcPolicy::zeros(2, 1, 2).unwrap();
        let w = instability_witness(2, 2, &zero, 2).unwrap();
        let mut want = DMatrix::zeros(2, 2);
        want[(0, 0)] = 32.0;
        assert_eq!(w.lower_bound, want);
        // H = n breaks e1^T A^(H-1) B = 0
        assert!(!w.structure_holds);
        // zero policy: cov(1,1) = 1 + 5 + 32
        assert_abs_diff_eq!(w.covariance[(0, 0)], 38.0, epsilon = 1e-12);
        // the diagonal entry clears 32, but the off-diagonal mass does not
        // leave cov - bound PSD
        assert_eq!(w.holds, w.gap_lambda_min >= -PSD_TOLERANCE);
        assert!(!w.holds, "gap = {}", w.gap_lambda_min);
    }

    #[test]
    fn witness_structure_below_n() {
        for h in 1..4 {
            let p = DrcPolicy::zeros(h, 1, 4).unwrap();
            assert!(instability_witness(4, h, &p, h).unwrap().structure_holds);
        }
        let p = DrcPolicy::zeros(4, 1, 4).unwrap();
        assert!(!instability_witness(4, 4, &p, 4).unwrap().structure_holds);
    }

    #[test]
    fn witness_scalar_edge_case() {
        let p = DrcPolicy::new(vec![DMatrix::from_element(1, 1, -1.5)]).unwrap();
        let w = instability_witness(1, 1, &p, 1).unwrap();
        assert!(!w.structure_holds);
        assert_abs_diff_eq!(w.lower_bound[(0, 0)], 4.0, epsilon = 1e-15);
    }

    #[test]
    fn random_policy_is_seeded() {
        let p = random_policy(4, 3, 5.0, 7).unwrap();
        assert_eq!(p.horizon(), 3);
        assert_eq!(p.n_x(), 4);
        assert_eq!(p, random_policy(4, 3, 5.0, 7).unwrap());
        assert_ne!(p, random_policy(4, 3, 5.0, 8).unwrap());
        assert!(p.blocks().iter().all(|b| b.amax() <= 5.0));
    }

    #[test]
    fn witness_rejects_bad_horizons() {
        let p = DrcPolicy::zeros(3, 1, 2).unwrap();
        assert!(matches!(
            instability_witness(2, 3, &p, 5),
            Err(Error::InvalidHorizon { .. })
        ));
        let p = DrcPolicy::zeros(2, 1, 2).unwrap();
        assert!(matches!(
            instability_witness(2, 2, &p, 1),
            Err(Error::InvalidHorizon { .. })
        ));
    }
}
