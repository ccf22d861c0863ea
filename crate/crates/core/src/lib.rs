//! Optimal state-feedback LQR gains, optimal finite-order
//! disturbance-response controllers (DRC), and the quantitative bounds
//! relating the two.
//!
//! The usual pipeline for an open-loop stable plant:
//!
//! ```
//! use drc_lqr::{drc, lyapunov, riccati, LqrSystem};
//!
//! let sys = LqrSystem::scalar(0.5, 1.0, 1.0, 1.0, 0.0).unwrap();
//! let dare = riccati::solve_dare(&sys, 1e-12, 100_000).unwrap();
//! let g = lyapunov::gramian(sys.a(), sys.q(), 1e-13).unwrap();
//! let policy = drc::solve_drc(&drc::assemble(&sys, &g, 20).unwrap()).unwrap();
//! // the first DRC block approaches the optimal gain as H grows
//! assert!((policy.block(1) - &dare.k).amax() < 1e-6);
//! ```

pub mod bounds;
pub mod cost;
pub mod drc;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod prestabilize;
pub mod riccati;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{LqrSystem, StabilityCertificate};
