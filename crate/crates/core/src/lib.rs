//! Time-fractional JKO scheme for the time-fractional Fokker-Planck equation
//!
//! ```text
//! d_t^alpha u - div(grad u + u grad Psi) = 0   in (0,1)^d,  no-flux boundary
//! ```
//!
//! The Caputo derivative is discretized with the L1 scheme, which turns each
//! time level into a Wasserstein proximal step from a convex combination of
//! all previous densities. Each proximal step is solved on a uniform cell
//! grid with entropic regularization and Dykstra scaling iterations.
//!
//! Modules:
//!
//! - [`caputo_l1`]: L1 weights and discrete Caputo operators.
//! - [`grid`]: cell grids, densities, potentials, costs.
//! - [`entropic_ot`]: Gibbs kernels, Sinkhorn, KL prox, Dykstra.
//! - [`jko_solver`]: the time stepper and trajectories.
//! - [`subdiffusion_mc`]: Monte-Carlo simulation of the time-changed Langevin process.
//! - [`experiments`]: error metrics, convergence studies, table output.

pub mod caputo_l1;
pub mod entropic_ot;
pub mod error;
pub mod experiments;
pub mod forcing;
pub mod grid;
pub mod jko_solver;
pub mod subdiffusion_mc;

pub use error::{Error, Result};
