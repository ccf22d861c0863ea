//! System description and exponential-stability certificates.

use nalgebra::DMatrix;

use crate::error::{mismatch, Error, Result};
use crate::linalg::{
    joint_block, relative_asymmetry, spectral_norm, spectral_radius, sym_lambda_min, symmetrize,
};

/// Largest relative asymmetry of `Q` or `R` accepted before symmetrization.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Default fraction of `-ln(spectral radius)` used as the certified decay rate.
pub const DEFAULT_SHRINK: f64 = 0.99;
/// Decay rate used when the spectral radius is (numerically) zero.
pub const DEFAULT_RHO_CAP: f64 = 10.0;
/// Power scan stops once `||M^k||` drops below this.
pub const POWER_FLOOR: f64 = 1e-12;
/// Power scan never goes past this exponent.
pub const MAX_POWER: usize = 10_000;

/// Linear dynamics `x+ = A x + B u + w` with stage cost
/// `x^T Q x + u^T R u + 2 u^T S x`.
///
/// Construction checks shapes, symmetrizes `Q` and `R`, and requires the
/// joint weight `[[Q, S^T], [S, R]]` to be positive definite. The fields
/// are read-only afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    s: DMatrix<f64>,
}

/// Outcome of [`validate_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_x: usize,
    pub n_u: usize,
    /// `lambda_min([[Q, S^T], [S, R]])` after symmetrization.
    pub joint_lambda_min: f64,
    pub q_asymmetry: f64,
    pub r_asymmetry: f64,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.joint_lambda_min > 0.0
    }
}

fn check_shape(field: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(mismatch(field, (rows, cols), m.shape()));
    }
    Ok(())
}

fn check_shapes(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<(usize, usize)> {
    let n_x = a.nrows();
    if n_x == 0 || !a.is_square() {
        return Err(mismatch("A", (n_x.max(1), n_x.max(1)), a.shape()));
    }
    let n_u = b.ncols();
    if n_u == 0 {
        return Err(mismatch("B", (n_x, 1), b.shape()));
    }
    check_shape("B", b, n_x, n_u)?;
    check_shape("Q", q, n_x, n_x)?;
    check_shape("R", r, n_u, n_u)?;
    check_shape("S", s, n_u, n_x)?;
    Ok((n_x, n_u))
}

/// Checks shapes, symmetry and the joint positive-definiteness assumption.
///
/// Returns the report when the system is acceptable; a joint weight with
/// `lambda_min <= 0` is reported as [`Error::NotPositiveDefinite`].
pub fn validate_system(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<ValidationReport> {
    let (n_x, n_u) = check_shapes(a, b, q, r, s)?;
    for (name, m) in [("A", a), ("B", b), ("Q", q), ("R", r), ("S", s)] {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("`{name}` has a non-finite entry")));
        }
    }
    let q_asymmetry = relative_asymmetry(q);
    let r_asymmetry = relative_asymmetry(r);
    if q_asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric {
            field: "Q".into(),
            defect: q_asymmetry,
        });
    }
    if r_asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric {
            field: "R".into(),
            defect: r_asymmetry,
        });
    }
    let joint = joint_block(&symmetrize(q), &symmetrize(r), s);
    let joint_lambda_min = sym_lambda_min(&joint);
    let report = ValidationReport {
        n_x,
        n_u,
        joint_lambda_min,
        q_asymmetry,
        r_asymmetry,
    };
    if !report.accepted() {
        return Err(Error::NotPositiveDefinite {
            what: "[[Q, S^T], [S, R]]".into(),
            lambda_min: joint_lambda_min,
        });
    }
    Ok(report)
}

impl LqrSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        s: DMatrix<f64>,
    ) -> Result<Self> {
        validate_system(&a, &b, &q, &r, &s)?;
        Ok(Self {
            q: symmetrize(&q),
            r: symmetrize(&r),
            a,
            b,
            s,
        })
    }

    /// Scalar system, handy for examples and tests.
    pub fn scalar(a: f64, b: f64, q: f64, r: f64, s: f64) -> Result<Self> {
        let m = |x| DMatrix::from_element(1, 1, x);
        Self::new(m(a), m(b), m(q), m(r), m(s))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn report(&self) -> ValidationReport {
        // already validated at construction
        validate_system(&self.a, &self.b, &self.q, &self.r, &self.s)
            .expect("LqrSystem invariants hold")
    }

    /// `A + B K`.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if k.shape() != (self.n_u(), self.n_x()) {
            return Err(mismatch("K", (self.n_u(), self.n_x()), k.shape()));
        }
        Ok(&self.a + &self.b * k)
    }

    pub fn is_open_loop_stable(&self) -> bool {
        spectral_radius(&self.a) < 1.0
    }
}

/// Witness that `||M^k|| <= tau * exp(-rho * k)` for `k = 0..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub tau: f64,
    pub rho: f64,
    pub k_max: usize,
}

impl StabilityCertificate {
    /// Re-scans `||m^k||` for `k = 0..=k_max` and checks the bound with
    /// `slack` absolute headroom.
    pub fn holds_for(&self, m: &DMatrix<f64>, slack: f64) -> bool {
        let mut p = DMatrix::identity(m.nrows(), m.ncols());
        for k in 0..=self.k_max {
            if spectral_norm(&p) > self.tau * (-self.rho * k as f64).exp() + slack {
                return false;
            }
            p = &p * m;
        }
        true
    }
}

fn certified_rate(m: &DMatrix<f64>, rho_cap: f64, shrink: f64) -> Result<f64> {
    assert!(shrink > 0.0 && shrink < 1.0, "shrink must lie in (0, 1)");
    assert!(rho_cap > 0.0, "rho_cap must be positive");
    let radius = spectral_radius(m);
    if radius >= 1.0 {
        return Err(Error::Unstable {
            what: "matrix".into(),
            spectral_radius: radius,
        });
    }
    if radius == 0.0 {
        return Ok(rho_cap);
    }
    Ok(rho_cap.min(-shrink * radius.ln()))
}

/// Scans powers of every matrix in `ms` until all have decayed below
/// [`POWER_FLOOR`], returning `(tau, k_max)` for the given rate.
fn scan_powers(ms: &[&DMatrix<f64>], rho: f64) -> (f64, usize) {
    let mut pows: Vec<DMatrix<f64>> = ms
        .iter()
        .map(|m| DMatrix::identity(m.nrows(), m.ncols()))
        .collect();
    let mut tau: f64 = 1.0;
    let mut k = 0;
    loop {
        let norm = pows.iter().map(spectral_norm).fold(0.0, f64::max);
        tau = tau.max(norm * (rho * k as f64).exp());
        if (k > 0 && norm <= POWER_FLOOR) || k == MAX_POWER {
            return (tau, k);
        }
        for (p, m) in pows.iter_mut().zip(ms) {
            *p = &*p * *m;
        }
        k += 1;
    }
}

/// Constructive `(tau, rho)` certificate for a stable matrix.
///
/// `rho = min(rho_cap, -shrink * ln(spectral radius))`, and `tau` is the
/// largest `||M^k|| e^{rho k}` seen before the powers fall below
/// [`POWER_FLOOR`] (or [`MAX_POWER`] is reached).
pub fn estimate_certificate(
    m: &DMatrix<f64>,
    rho_cap: f64,
    shrink: f64,
) -> Result<StabilityCertificate> {
    let rho = certified_rate(m, rho_cap, shrink)?;
    let (tau, k_max) = scan_powers(&[m], rho);
    Ok(StabilityCertificate { tau, rho, k_max })
}

/// One certificate valid for both the open loop `a` and the closed loop
/// `a_cl`.
pub fn joint_certificate(a: &DMatrix<f64>, a_cl: &DMatrix<f64>) -> Result<StabilityCertificate> {
    joint_certificate_with(a, a_cl, DEFAULT_RHO_CAP, DEFAULT_SHRINK)
}

pub fn joint_certificate_with(
    a: &DMatrix<f64>,
    a_cl: &DMatrix<f64>,
    rho_cap: f64,
    shrink: f64,
) -> Result<StabilityCertificate> {
    let rho_a = certified_rate(a, rho_cap, shrink).map_err(|e| rename(e, "A"))?;
    let rho_cl = certified_rate(a_cl, rho_cap, shrink).map_err(|e| rename(e, "A + B K"))?;
    let rho = rho_a.min(rho_cl);
    let (tau, k_max) = scan_powers(&[a, a_cl], rho);
    Ok(StabilityCertificate { tau, rho, k_max })
}

fn rename(e: Error, what: &str) -> Error {
    match e {
        Error::Unstable {
            spectral_radius, ..
        } => Error::Unstable {
            what: what.into(),
            spectral_radius,
        },
        other => other,
    }
}
