use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use drc_lqr::bounds::{instability_witness, random_policy};
use drc_lqr::cost::{cost_of_drc, cost_of_gain, simulate, Controller, DEFAULT_BURN_IN};
use drc_lqr::drc::{assemble, solve_drc};
use drc_lqr::io::{fmt_matrix, fmt_sig, load_system, SystemFile};
use drc_lqr::linalg::{spectral_norm, spectral_radius};
use drc_lqr::lyapunov::{gramian, DEFAULT_GRAMIAN_TOL};
use drc_lqr::model::{validate_system, LqrSystem};
use drc_lqr::prestabilize::transform;
use drc_lqr::riccati::{solve_dare, DEFAULT_MAX_ITER, DEFAULT_TOL};
use drc_lqr::sweep::{run_sweep, write_csv, SweepOptions};
use drc_lqr::{Error, Result};

#[derive(Parser)]
#[command(
    name = "drc-lqr",
    version,
    about = "LQR gains vs. optimal disturbance-response controllers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// System file (JSON with A, B, Q, R, S and optional K0).
    system: PathBuf,
    /// Accept unknown keys in the system file.
    #[arg(long)]
    lax: bool,
    /// Riccati convergence tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system file and report its joint weight spectrum.
    Validate(Input),
    /// Optimal gain K* and trace(P*).
    Dare(Input),
    /// Optimal order-H DRC blocks.
    Drc {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        h: usize,
    },
    /// Analytic cost of K* and, with --h, of the optimal order-H DRC.
    Cost {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        h: Option<usize>,
    },
    /// Horizon sweep as CSV.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 30)]
        h_max: usize,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write wall_ms = 0 so repeated runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Monte-Carlo cost of K* or, with --h, of the optimal order-H DRC.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 200_000)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        h: Option<usize>,
    },
    /// Covariance growth of a random DRC on the unstable Jordan plant.
    Witness {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        h: usize,
        #[arg(long, default_value_t = 12)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(input: &Input) -> Result<SystemFile> {
    load_system(&input.system, input.lax)
}

/// The problem DRCs are solved on: the system itself when stable, the
/// pre-stabilized one when the file carries `K0`.
fn working_system(file: &SystemFile) -> Result<(LqrSystem, Option<&DMatrix<f64>>)> {
    match &file.k0 {
        Some(k0) => Ok((transform(&file.system, k0)?.transformed, Some(k0))),
        None => {
            let radius = spectral_radius(file.system.a());
            if radius >= 1.0 {
                return Err(Error::Unstable {
                    what: "A (add a stabilizing K0 to the system file)".into(),
                    spectral_radius: radius,
                });
            }
            Ok((file.system.clone(), None))
        }
    }
}

fn print_matrix(out: &mut impl Write, name: &str, m: &DMatrix<f64>) -> io::Result<()> {
    writeln!(out, "{name} ({}x{}):", m.nrows(), m.ncols())?;
    for line in fmt_matrix(m).lines() {
        writeln!(out, "  {line}")?;
    }
    Ok(())
}

fn run(cmd: Command, out: &mut impl Write) -> Result<()> {
    match cmd {
        Command::Validate(input) => {
            let file = load(&input)?;
            let s = &file.system;
            let rep = validate_system(s.a(), s.b(), s.q(), s.r(), s.s())?;
            writeln!(out, "n_x = {}", rep.n_x)?;
            writeln!(out, "n_u = {}", rep.n_u)?;
            writeln!(out, "joint_lambda_min = {}", fmt_sig(rep.joint_lambda_min))?;
            writeln!(
                out,
                "spectral_radius_A = {}",
                fmt_sig(spectral_radius(s.a()))
            )?;
            if let Some(k0) = &file.k0 {
                let a_bar = s.closed_loop(k0)?;
                writeln!(
                    out,
                    "spectral_radius_A_K0 = {}",
                    fmt_sig(spectral_radius(&a_bar))
                )?;
            }
            writeln!(out, "accepted = true")?;
        }
        Command::Dare(input) => {
            let file = load(&input)?;
            let sol = solve_dare(&file.system, input.tol, DEFAULT_MAX_ITER)?;
            print_matrix(out, "K", &sol.k)?;
            writeln!(out, "trace_P = {}", fmt_sig(sol.p.trace()))?;
            let a_cl = file.system.closed_loop(&sol.k)?;
            writeln!(
                out,
                "spectral_radius_closed_loop = {}",
                fmt_sig(spectral_radius(&a_cl))
            )?;
            writeln!(out, "residual = {}", fmt_sig(sol.residual_norm))?;
            writeln!(out, "iterations = {}", sol.iterations)?;
        }
        Command::Drc { input, h } => {
            let file = load(&input)?;
            let (work, k0) = working_system(&file)?;
            let gram = gramian(work.a(), work.q(), DEFAULT_GRAMIAN_TOL)?;
            let policy = solve_drc(&assemble(&work, &gram, h)?)?;
            for (k, block) in policy.blocks().iter().enumerate() {
                print_matrix(out, &format!("L{}", k + 1), block)?;
            }
            let target = solve_dare(&work, input.tol, DEFAULT_MAX_ITER)?.k;
            writeln!(
                out,
                "err_L1_K = {}",
                fmt_sig(spectral_norm(&(policy.block(1) - &target)))
            )?;
            if let Some(k0) = k0 {
                print_matrix(out, "K0 + L1", &(k0 + policy.block(1)))?;
            }
        }
        Command::Cost { input, h } => {
            let file = load(&input)?;
            let sol = solve_dare(&file.system, input.tol, DEFAULT_MAX_ITER)?;
            let gain = cost_of_gain(&file.system, &sol.k)?;
            writeln!(out, "cost_K = {}", fmt_sig(gain.value))?;
            writeln!(out, "trace_P = {}", fmt_sig(sol.p.trace()))?;
            if let Some(h) = h {
                let (work, _) = working_system(&file)?;
                let gram = gramian(work.a(), work.q(), DEFAULT_GRAMIAN_TOL)?;
                let policy = solve_drc(&assemble(&work, &gram, h)?)?;
                let drc = cost_of_drc(&work, &gram, &policy)?;
                let optimal = solve_dare(&work, input.tol, DEFAULT_MAX_ITER)?.p.trace();
                writeln!(out, "cost_L = {}", fmt_sig(drc.value))?;
                writeln!(out, "cost_gap = {}", fmt_sig(drc.value - optimal))?;
            }
        }
        Command::Sweep {
            input,
            h_max,
            out: path,
            no_timing,
        } => {
            let file = load(&input)?;
            let opts = SweepOptions {
                tol: input.tol,
                timing: !no_timing,
            };
            let report = run_sweep(&file.system, h_max, file.k0.as_ref(), opts)?;
            match path {
                Some(path) => {
                    let f = File::create(&path)
                        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    let mut w = BufWriter::new(f);
                    write_csv(&report, &mut w)?;
                    w.flush()?;
                    writeln!(
                        out,
                        "wrote {} rows to {}",
                        report.rows.len(),
                        path.display()
                    )?;
                    writeln!(out, "slope = {}", fmt_sig(report.slope))?;
                }
                None => write_csv(&report, &mut *out)?,
            }
        }
        Command::Simulate {
            input,
            steps,
            burn_in,
            seed,
            h,
        } => {
            let file = load(&input)?;
            let sol = solve_dare(&file.system, input.tol, DEFAULT_MAX_ITER)?;
            let (controller, analytic) = match h {
                None => (Controller::Gain(sol.k.clone()), sol.p.trace()),
                Some(h) => {
                    if file.k0.is_some() || !file.system.is_open_loop_stable() {
                        return Err(Error::Unstable {
                            what: "A (DRC rollouts need an open-loop stable plant)".into(),
                            spectral_radius: spectral_radius(file.system.a()),
                        });
                    }
                    let gram = gramian(file.system.a(), file.system.q(), DEFAULT_GRAMIAN_TOL)?;
                    let policy = solve_drc(&assemble(&file.system, &gram, h)?)?;
                    let analytic = cost_of_drc(&file.system, &gram, &policy)?.value;
                    (Controller::Drc(policy), analytic)
                }
            };
            let rep = simulate(&file.system, &controller, steps, burn_in, seed)?;
            writeln!(out, "mean_cost = {}", fmt_sig(rep.value))?;
            writeln!(out, "std_error = {}", fmt_sig(rep.std_error))?;
            writeln!(out, "analytic = {}", fmt_sig(analytic))?;
        }
        Command::Witness { n, h, t, seed } => {
            let policy = random_policy(n, h, 5.0, seed)?;
            let w = instability_witness(n, h, &policy, t)?;
            writeln!(
                out,
                "lower_bound_trace = {}",
                fmt_sig(w.lower_bound.trace())
            )?;
            writeln!(out, "covariance_trace = {}", fmt_sig(w.covariance.trace()))?;
            writeln!(out, "gap_lambda_min = {}", fmt_sig(w.gap_lambda_min))?;
            writeln!(out, "structure_holds = {}", w.structure_holds)?;
            writeln!(out, "holds = {}", w.holds)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DRC_LQR_LOG", "error"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
