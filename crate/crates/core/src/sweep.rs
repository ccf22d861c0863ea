//! Horizon sweep: how fast the first block of the optimal order-`H` DRC
//! approaches the optimal gain, next to the closed-form bounds.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::bounds::{perf_gap_bound_optimal, thm1_bound, unstable_bound, BoundInputs};
use crate::cost::quadratic_drc_cost;
use crate::drc::{assemble, solve_drc};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::linalg::{spectral_norm, spectral_radius};
use crate::lyapunov::{gramian, DEFAULT_GRAMIAN_TOL};
use crate::model::{joint_certificate, LqrSystem, StabilityCertificate};
use crate::prestabilize::transform;
use crate::riccati::{solve_dare, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const CSV_HEADER: &str = "H,err_L1_K,bound_thm1,cost_gap,bound_perf,wall_ms";
/// The log-linear fit skips horizons below this (when enough remain).
pub const FIT_FROM: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub tol: f64,
    /// Record per-row wall time; off gives byte-reproducible output.
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub h: usize,
    pub err_l1_k: f64,
    pub bound_thm1: f64,
    pub cost_gap: f64,
    pub bound_perf: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln err_L1_K` against `H`.
    pub slope: f64,
    pub cert: StabilityCertificate,
    /// Gain the first blocks are compared against (`K* - K0` when
    /// pre-stabilized).
    pub target_gain: DMatrix<f64>,
    /// Optimal gain of the original system.
    pub k_star: DMatrix<f64>,
    pub optimal_cost: f64,
    pub prestabilized: bool,
}

/// Runs horizons `1..=h_max`. Unstable plants need `k0`.
pub fn run_sweep(
    sys: &LqrSystem,
    h_max: usize,
    k0: Option<&DMatrix<f64>>,
    opts: SweepOptions,
) -> Result<SweepReport> {
    if h_max < 1 {
        return Err(Error::InvalidHorizon {
            h: h_max,
            reason: "sweep needs h_max >= 1".into(),
        });
    }
    let work = match k0 {
        Some(k0) => transform(sys, k0)?.transformed,
        None => {
            let radius = spectral_radius(sys.a());
            if radius >= 1.0 {
                return Err(Error::Unstable {
                    what: "A (supply a pre-stabilizing K0)".into(),
                    spectral_radius: radius,
                });
            }
            sys.clone()
        }
    };

    let dare = solve_dare(&work, opts.tol, DEFAULT_MAX_ITER)?;
    let target = dare.k.clone();
    let k_star = match k0 {
        Some(k0) => k0 + &target,
        None => target.clone(),
    };
    let optimal_cost = dare.p.trace();
    let gram = gramian(work.a(), work.q(), DEFAULT_GRAMIAN_TOL)?;
    let cert = joint_certificate(work.a(), &(work.a() + work.b() * &target))?;
    let inputs = BoundInputs::new(&work, &target, cert)?;
    log::info!(
        "sweep: rho = {:.6}, tau = {:.6}, k_max = {}",
        cert.rho,
        cert.tau,
        cert.k_max
    );

    let mut rows = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        // no clock on bare wasm
        let start = opts.timing.then(Instant::now);
        let mats = assemble(&work, &gram, h)?;
        let policy = solve_drc(&mats)?;
        let cost = quadratic_drc_cost(&gram, &mats, &policy);
        let wall_ms = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
        let bound_thm1 = if k0.is_some() {
            unstable_bound(&inputs, h)
        } else {
            thm1_bound(&inputs, h)
        };
        rows.push(SweepRow {
            h,
            err_l1_k: spectral_norm(&(policy.block(1) - &target)),
            bound_thm1,
            cost_gap: cost - optimal_cost,
            bound_perf: perf_gap_bound_optimal(&inputs, h),
            wall_ms,
        });
    }
    let slope = fit_log_slope(&rows);
    Ok(SweepReport {
        rows,
        slope,
        cert,
        target_gain: target,
        k_star,
        optimal_cost,
        prestabilized: k0.is_some(),
    })
}

/// Least-squares slope of `ln err_L1_K` vs `H` over `H >= FIT_FROM` (all
/// rows when fewer than two would remain), ignoring zero errors. `NaN`
/// when fewer than two usable points exist.
pub fn fit_log_slope(rows: &[SweepRow]) -> f64 {
    let usable = |from: usize| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.h >= from && r.err_l1_k > 0.0)
            .map(|r| (r.h as f64, r.err_l1_k.ln()))
            .collect()
    };
    let mut pts = usable(FIT_FROM);
    if pts.len() < 2 {
        pts = usable(1);
    }
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// CSV with LF endings and 12 significant digits, then a
/// `# slope=... rho=... tau=...` trailer.
pub fn write_csv<W: Write>(report: &SweepReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.h,
            fmt_sig(r.err_l1_k),
            fmt_sig(r.bound_thm1),
            fmt_sig(r.cost_gap),
            fmt_sig(r.bound_perf),
            fmt_sig(r.wall_ms)
        )?;
    }
    writeln!(
        out,
        "# slope={} rho={} tau={}",
        fmt_sig(report.slope),
        fmt_sig(report.cert.rho),
        fmt_sig(report.cert.tau)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(h: usize, err: f64) -> SweepRow {
        SweepRow {
            h,
            err_l1_k: err,
            bound_thm1: 0.0,
            cost_gap: 0.0,
            bound_perf: 0.0,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn slope_of_exact_exponential() {
        let rows: Vec<_> = (1..=30)
            .map(|h| row(h, 3.0 * (-0.4 * h as f64).exp()))
            .collect();
        assert!((fit_log_slope(&rows) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn slope_undefined_for_zero_errors() {
        let rows: Vec<_> = (1..=10).map(|h| row(h, 0.0)).collect();
        assert!(fit_log_slope(&rows).is_nan());
    }

    #[test]
    fn zero_dynamics_sweep_is_exact() {
        let sys = LqrSystem::scalar(0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let rep = run_sweep(&sys, 10, None, SweepOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 10);
        for r in &rep.rows {
            assert!(r.err_l1_k <= 1e-12);
        }
    }

    #[test]
    fn unstable_without_k0_is_an_error() {
        let sys = LqrSystem::scalar(1.5, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            run_sweep(&sys, 5, None, SweepOptions::default()),
            Err(Error::Unstable { .. })
        ));
        let k0 = DMatrix::from_element(1, 1, -1.0);
        let rep = run_sweep(&sys, 5, Some(&k0), SweepOptions::default()).unwrap();
        assert!(rep.prestabilized);
    }

    #[test]
    fn csv_layout() {
        let sys = LqrSystem::scalar(0.5, 1.0, 1.0, 1.0, 0.0).unwrap();
        let opts = SweepOptions {
            timing: false,
            ..Default::default()
        };
        let rep = run_sweep(&sys, 3, None, opts).unwrap();
        let mut buf = Vec::new();
        write_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.split('\n').collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("1,"));
        assert!(lines[1].ends_with(",0"));
        assert!(lines[4].starts_with("# slope="));
        assert_eq!(lines[5], "");
        assert!(!text.contains('\r'));
    }
}
