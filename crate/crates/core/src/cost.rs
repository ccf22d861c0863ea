//! Average LQR cost under unit-covariance Gaussian noise, evaluated
//! analytically, by seeded simulation, and through the exact second-moment
//! expansion of a DRC-controlled state.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::drc::{assemble, DrcPolicy, DrcSystemMatrices};
use crate::error::{mismatch, Error, Result};
use crate::linalg::{spectral_radius, symmetrize};
use crate::lyapunov::{gramian, Gramian, DEFAULT_GRAMIAN_TOL};
use crate::model::LqrSystem;

pub const DEFAULT_BURN_IN: usize = 1000;
/// A state entry beyond this magnitude is treated as divergence: unit noise
/// is then below one ulp of the state and the rollout carries no
/// information.
pub const DIVERGENCE_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53
const BATCHES: usize = 50;
const MIN_BATCH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMethod {
    AnalyticGain,
    AnalyticDrc,
    MonteCarlo,
    CovarianceExpansion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub value: f64,
    pub method: CostMethod,
    /// Zero for analytic methods.
    pub std_error: f64,
}

/// `u_t = K x_t` or a disturbance-response policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Gain(DMatrix<f64>),
    Drc(DrcPolicy),
}

fn stage_cost(sys: &LqrSystem, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
    let qx = sys.q() * x;
    let ru = sys.r() * u;
    let sx = sys.s() * x;
    x.dot(&qx) + u.dot(&ru) + 2.0 * u.dot(&sx)
}

/// Steady-state cost of `u = K x`:
/// `trace(Sigma (Q + K^T R K + S^T K + K^T S))` with
/// `Sigma = (A + B K) Sigma (A + B K)^T + I`.
pub fn cost_of_gain(sys: &LqrSystem, k: &DMatrix<f64>) -> Result<CostReport> {
    let a_cl = sys.closed_loop(k)?;
    let radius = spectral_radius(&a_cl);
    if radius >= 1.0 {
        return Err(Error::Unstable {
            what: "closed loop A + B K".into(),
            spectral_radius: radius,
        });
    }
    let n = sys.n_x();
    let sigma = gramian(
        &a_cl.transpose(),
        &DMatrix::identity(n, n),
        DEFAULT_GRAMIAN_TOL,
    )?
    .g;
    let sk = sys.s().transpose() * k;
    let weight = sys.q() + k.transpose() * sys.r() * k + &sk + sk.transpose();
    Ok(CostReport {
        value: (sigma * weight).trace(),
        method: CostMethod::AnalyticGain,
        std_error: 0.0,
    })
}

/// `trace(G + 2 L^T J + L^T M L)` for the stacked policy `L`.
pub fn cost_of_drc(sys: &LqrSystem, gram: &Gramian, policy: &DrcPolicy) -> Result<CostReport> {
    let radius = spectral_radius(sys.a());
    if radius >= 1.0 {
        return Err(Error::Unstable {
            what: "A".into(),
            spectral_radius: radius,
        });
    }
    if policy.n_u() != sys.n_u() || policy.n_x() != sys.n_x() {
        return Err(mismatch(
            "policy block",
            (sys.n_u(), sys.n_x()),
            (policy.n_u(), policy.n_x()),
        ));
    }
    let mats = assemble(sys, gram, policy.horizon())?;
    Ok(CostReport {
        value: quadratic_drc_cost(gram, &mats, policy),
        method: CostMethod::AnalyticDrc,
        std_error: 0.0,
    })
}

/// `trace(G + 2 L^T J + L^T M L)` with `(M, J)` already assembled at the
/// policy's horizon.
pub fn quadratic_drc_cost(gram: &Gramian, mats: &DrcSystemMatrices, policy: &DrcPolicy) -> f64 {
    let l = policy.stacked();
    let lt = l.transpose();
    (&gram.g + (&lt * &mats.j) * 2.0 + &lt * &mats.m * &l).trace()
}

/// Standard-normal noise addressed by `(seed, t, component)`.
///
/// Each step reads from a fixed position of a ChaCha8 stream, so the value
/// of `w_t` never depends on which other steps were drawn or in what order.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    dim: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim,
        }
    }

    fn unit_open(&mut self) -> f64 {
        // (0, 1]
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `w_t`.
    pub fn at(&mut self, t: usize) -> DVector<f64> {
        // two u64 (four 32-bit words) per component
        self.rng.set_word_pos((t as u128) * (self.dim as u128) * 4);
        DVector::from_fn(self.dim, |_, _| {
            let u1 = self.unit_open();
            let u2 = self.unit_open();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
    }
}

/// Steps `x_{t+1} = A x_t + B u_t + w_t` from `x_0 = 0`.
struct Rollout<'a> {
    sys: &'a LqrSystem,
    controller: &'a Controller,
    noise: NoiseStream,
    x: DVector<f64>,
    // w_{t-1}, w_{t-2}, ... (most recent first)
    past: VecDeque<DVector<f64>>,
    t: usize,
}

impl<'a> Rollout<'a> {
    fn new(sys: &'a LqrSystem, controller: &'a Controller, seed: u64) -> Result<Self> {
        let (n_u, n_x) = (sys.n_u(), sys.n_x());
        let shape = match controller {
            Controller::Gain(k) => k.shape(),
            Controller::Drc(p) => (p.n_u(), p.n_x()),
        };
        if shape != (n_u, n_x) {
            return Err(mismatch("controller", (n_u, n_x), shape));
        }
        Ok(Self {
            sys,
            controller,
            noise: NoiseStream::new(seed, n_x),
            x: DVector::zeros(n_x),
            past: VecDeque::new(),
            t: 0,
        })
    }

    fn input(&self) -> DVector<f64> {
        match self.controller {
            Controller::Gain(k) => k * &self.x,
            Controller::Drc(p) => {
                let mut u = DVector::zeros(self.sys.n_u());
                // w_s = 0 for s < 0: missing history contributes nothing
                for (blk, w) in p.blocks().iter().zip(&self.past) {
                    u += blk * w;
                }
                u
            }
        }
    }

    /// Advances one step and returns the stage cost at the old time.
    fn step(&mut self) -> Result<f64> {
        let u = self.input();
        let cost = stage_cost(self.sys, &self.x, &u);
        let w = self.noise.at(self.t);
        self.x = self.sys.a() * &self.x + self.sys.b() * &u + &w;
        self.t += 1;
        if let Controller::Drc(p) = self.controller {
            self.past.push_front(w);
            self.past.truncate(p.horizon());
        }
        if self
            .x
            .iter()
            .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::NonFinite { step: self.t });
        }
        Ok(cost)
    }
}

fn mean_and_error(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    // Batch means: stage costs along one trajectory are autocorrelated.
    let groups: Vec<f64> = if n >= BATCHES * MIN_BATCH {
        let per = n / BATCHES;
        samples
            .chunks_exact(per)
            .take(BATCHES)
            .map(|c| c.iter().sum::<f64>() / per as f64)
            .collect()
    } else {
        samples.to_vec()
    };
    let g = groups.len();
    if g < 2 {
        return (mean, f64::INFINITY);
    }
    let gm = groups.iter().sum::<f64>() / g as f64;
    let var = groups.iter().map(|v| (v - gm).powi(2)).sum::<f64>() / (g - 1) as f64;
    (mean, (var / g as f64).sqrt())
}

/// Seeded Monte-Carlo estimate of the average stage cost over
/// `t in [burn_in, steps)`.
pub fn simulate(
    sys: &LqrSystem,
    controller: &Controller,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CostReport> {
    if steps <= burn_in {
        return Err(Error::InvalidHorizon {
            h: steps,
            reason: format!("steps must exceed burn-in ({burn_in})"),
        });
    }
    let mut roll = Rollout::new(sys, controller, seed)?;
    let mut samples = Vec::with_capacity(steps - burn_in);
    for t in 0..steps {
        let c = roll.step()?;
        if t >= burn_in {
            samples.push(c);
        }
    }
    let (value, std_error) = mean_and_error(&samples);
    Ok(CostReport {
        value,
        method: CostMethod::MonteCarlo,
        std_error,
    })
}

/// The state `x_t` of one seeded rollout.
pub fn rollout_state(
    sys: &LqrSystem,
    controller: &Controller,
    t: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut roll = Rollout::new(sys, controller, seed)?;
    for _ in 0..t {
        roll.step()?;
    }
    Ok(roll.x)
}

/// Exact `E[x_{t+1} x_{t+1}^T]` under the policy, from `x_0 = 0`.
///
/// `x_{t+1} = w_t + sum_{k=1}^{t} Phi_k w_{t-k}` where
/// `Phi_k = C_k = A^k + sum_{j=1}^{k} A^(k-j) B L_j` for `k < H` and
/// `Phi_k = A^(k-H) C_H` for `k >= H`. No stability assumption is needed.
pub fn drc_state_covariance(sys: &LqrSystem, policy: &DrcPolicy, t: usize) -> Result<DMatrix<f64>> {
    if policy.n_u() != sys.n_u() || policy.n_x() != sys.n_x() {
        return Err(mismatch(
            "policy block",
            (sys.n_u(), sys.n_x()),
            (policy.n_u(), policy.n_x()),
        ));
    }
    let n = sys.n_x();
    let h = policy.horizon();
    let (a, b) = (sys.a(), sys.b());

    let mut cov = DMatrix::identity(n, n);
    // Phi_k = A Phi_{k-1} + B L_k while k <= H, then Phi_k = A Phi_{k-1}.
    let mut phi = DMatrix::identity(n, n);
    for k in 1..=t {
        phi = a * &phi;
        if k <= h {
            phi += b * policy.block(k);
        }
        cov += &phi * phi.transpose();
    }
    Ok(symmetrize(&cov))
}

/// Exact expected stage cost at time `t + 1` under the policy, from the
/// same expansion as [`drc_state_covariance`]. For stable `A` this tends to
/// [`cost_of_drc`] as `t` grows.
pub fn drc_expected_stage_cost(
    sys: &LqrSystem,
    policy: &DrcPolicy,
    t: usize,
) -> Result<CostReport> {
    if policy.n_u() != sys.n_u() || policy.n_x() != sys.n_x() {
        return Err(mismatch(
            "policy block",
            (sys.n_u(), sys.n_x()),
            (policy.n_u(), policy.n_x()),
        ));
    }
    let (a, b) = (sys.a(), sys.b());
    let h = policy.horizon();
    let weight = crate::linalg::joint_block(sys.q(), sys.r(), sys.s());
    let (n_x, n_u) = (sys.n_x(), sys.n_u());
    // [x_{t+1}; u_{t+1}] = sum_k [Phi_k; L_{k+1}] w_{t-k}
    let mut phi = DMatrix::identity(n_x, n_x);
    let mut value = 0.0;
    for k in 0..=t {
        if k > 0 {
            phi = a * &phi;
            if k <= h {
                phi += b * policy.block(k);
            }
        }
        let mut z = DMatrix::zeros(n_x + n_u, n_x);
        z.rows_mut(0, n_x).copy_from(&phi);
        if k < h {
            z.rows_mut(n_x, n_u).copy_from(policy.block(k + 1));
        }
        value += (z.transpose() * &weight * &z).trace();
    }
    Ok(CostReport {
        value,
        method: CostMethod::CovarianceExpansion,
        std_error: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drc::solve_drc;
    use crate::riccati::{solve_dare, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use approx::assert_abs_diff_eq;

    fn half() -> LqrSystem {
        LqrSystem::scalar(0.5, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn pure_noise_cost() {
        let sys = LqrSystem::scalar(0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let c = cost_of_gain(&sys, &DMatrix::zeros(1, 1)).unwrap();
        assert_abs_diff_eq!(c.value, 1.0, epsilon = 1e-14);
        assert_eq!(c.std_error, 0.0);
    }

    #[test]
    fn optimal_gain_cost_is_trace_p() {
        let sys = half();
        let sol = solve_dare(&sys, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let c = cost_of_gain(&sys, &sol.k).unwrap();
        assert_abs_diff_eq!(c.value, sol.p.trace(), epsilon = 1e-10);
    }

    #[test]
    fn unstable_gain_rejected() {
        let sys = half();
        assert!(matches!(
            cost_of_gain(&sys, &DMatrix::from_element(1, 1, 1.0)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn drc_cost_scalar_arithmetic() {
        let sys = half();
        let g = gramian(sys.a(), sys.q(), DEFAULT_GRAMIAN_TOL).unwrap();
        let zero = DrcPolicy::zeros(3, 1, 1).unwrap();
        assert_abs_diff_eq!(
            cost_of_drc(&sys, &g, &zero).unwrap().value,
            4.0 / 3.0,
            epsilon = 1e-13
        );
        let pol = DrcPolicy::new(vec![DMatrix::from_element(1, 1, -2.0 / 7.0)]).unwrap();
        let c = cost_of_drc(&sys, &g, &pol).unwrap();
        assert_abs_diff_eq!(c.value, 24.0 / 21.0, epsilon = 1e-12);
        assert_eq!(c.method, CostMethod::AnalyticDrc);
    }

    #[test]
    fn noise_is_addressed_by_time() {
        let mut a = NoiseStream::new(7, 3);
        let mut b = NoiseStream::new(7, 3);
        let w5 = a.at(5);
        let _ = b.at(9);
        let _ = b.at(2);
        assert_eq!(b.at(5), w5);
        assert_ne!(a.at(6), w5);
        assert_ne!(NoiseStream::new(8, 3).at(5), w5);
    }

    #[test]
    fn noise_moments() {
        let mut s = NoiseStream::new(1, 1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|t| s.at(t)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn simulated_noise_energy() {
        let sys = LqrSystem::scalar(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        let r = simulate(
            &sys,
            &Controller::Gain(DMatrix::zeros(1, 1)),
            100_000,
            100,
            3,
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 3.0 * r.std_error + 1e-12, "{r:?}");
        assert!(r.std_error < 0.01);
    }

    #[test]
    fn simulated_optimal_gain_cost() {
        let sys = half();
        let sol = solve_dare(&sys, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let r = simulate(&sys, &Controller::Gain(sol.k.clone()), 200_000, 1000, 11).unwrap();
        assert!((r.value - 1.132782).abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let sys = half();
        let ctl = Controller::Gain(DMatrix::from_element(1, 1, -0.2));
        let a = simulate(&sys, &ctl, 5000, 10, 42).unwrap();
        let b = simulate(&sys, &ctl, 5000, 10, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn burn_in_must_be_below_steps() {
        let sys = half();
        let ctl = Controller::Gain(DMatrix::zeros(1, 1));
        assert!(simulate(&sys, &ctl, 10, 10, 0).is_err());
    }

    #[test]
    fn covariance_at_zero_is_identity() {
        let sys = half();
        let pol = DrcPolicy::new(vec![DMatrix::from_element(1, 1, 3.0)]).unwrap();
        assert_eq!(
            drc_state_covariance(&sys, &pol, 0).unwrap(),
            DMatrix::identity(1, 1)
        );
        // x_2 = w_1 + (a + b L_1) w_0
        let c1 = drc_state_covariance(&sys, &pol, 1).unwrap();
        assert_abs_diff_eq!(c1[(0, 0)], 1.0 + 3.5f64.powi(2), epsilon = 1e-12);
    }

    #[test]
    fn open_loop_covariance_reaches_lyapunov_fixed_point() {
        let sys = half();
        let zero = DrcPolicy::zeros(2, 1, 1).unwrap();
        let cov = drc_state_covariance(&sys, &zero, 200).unwrap();
        assert_abs_diff_eq!(cov[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn expected_stage_cost_tends_to_analytic_drc_cost() {
        let sys = LqrSystem::scalar(0.7, 0.5, 1.0, 2.0, 0.3).unwrap();
        let g = gramian(sys.a(), sys.q(), DEFAULT_GRAMIAN_TOL).unwrap();
        let pol = DrcPolicy::new(vec![
            DMatrix::from_element(1, 1, -0.4),
            DMatrix::from_element(1, 1, 0.25),
        ])
        .unwrap();
        let exact = drc_expected_stage_cost(&sys, &pol, 400).unwrap();
        assert_eq!(exact.method, CostMethod::CovarianceExpansion);
        let analytic = cost_of_drc(&sys, &g, &pol).unwrap().value;
        assert_abs_diff_eq!(exact.value, analytic, epsilon = 1e-10 * analytic);
    }

    #[test]
    fn optimal_drc_beats_its_truncations() {
        let sys = half();
        let g = gramian(sys.a(), sys.q(), DEFAULT_GRAMIAN_TOL).unwrap();
        let p3 = solve_drc(&assemble(&sys, &g, 3).unwrap()).unwrap();
        let p4 = solve_drc(&assemble(&sys, &g, 4).unwrap()).unwrap();
        let c3 = cost_of_drc(&sys, &g, &p3.padded(4)).unwrap().value;
        let c4 = cost_of_drc(&sys, &g, &p4).unwrap().value;
        assert!(c4 <= c3 + 1e-12);
        assert_abs_diff_eq!(
            cost_of_drc(&sys, &g, &p3).unwrap().value,
            c3,
            epsilon = 1e-12
        );
    }
}
