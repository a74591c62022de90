//! Joint recovery of distribution-grid topology and line parameters from
//! noisy voltage-phasor and power-injection measurements taken under
//! multiple unknown system states.
//!
//! The pipeline, end to end:
//!
//! 1. [`grid`] describes the candidate branch set and maps per-branch
//!    conductance/susceptance onto the bus admittance matrix.
//! 2. [`powerflow`] evaluates injections branch-wise, solves Newton power
//!    flow for synthetic truth generation, and [`scenario`] produces
//!    multi-state measurement sets with controlled Gaussian noise.
//! 3. [`eiv`] rewrites each timestamp's measurements as a linear regression
//!    `y = X [g; b]` in the line parameters and propagates the direct
//!    measurement covariance to the indirect pair `(Σ_X, Σ_y)` by a
//!    first-order expansion.
//! 4. [`likelihood`] scores a sample under candidate parameters by
//!    projecting it onto the model constraint (an equality-constrained QP
//!    solved in closed form) and evaluating the Gaussian density there.
//! 5. [`tls`] solves the per-cluster weighted errors-in-variables update as
//!    a row-whitened total least squares problem via SVD.
//! 6. [`em`] alternates responsibility updates and per-cluster solves to
//!    recover the latent state labels together with each state's
//!    parameters and topology.
//! 7. [`eval`] and [`io`] provide scoring against ground truth and the
//!    file formats used by the CLI.

pub mod eiv;
pub mod em;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod likelihood;
pub mod powerflow;
pub mod scenario;
pub mod tls;

pub use error::{Error, Result};
pub use grid::{GridSpec, StateParams};
pub use scenario::MeasurementSet;
