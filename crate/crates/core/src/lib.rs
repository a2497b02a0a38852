//! Quantile trend filtering and related piecewise-linear estimators.
//!
//! * [`qtf`]: penalized and constrained quantile trend filtering of any
//!   order, and joint non-crossing estimation of several quantiles.
//! * [`lattice`]: quantile total variation denoising on d-dimensional grids.
//! * [`lasso`]: quantile regression under an l1 budget on the coefficients.
//! * [`oracle`]: exact linear-programming reference solutions for small
//!   instances.
//! * [`sim`]: the Monte Carlo harness (scenarios, tuning, rate studies).
//!
//! Estimators are fitted by the interior point solver in [`ipm`] by default;
//! the ADMM solver in [`admm`] is selected with [`Algorithm::Admm`].

// index loops mirror the factorization formulas; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod engine;
pub mod error;
pub mod ipm;
pub mod lasso;
pub mod lattice;
pub mod linalg;
pub mod linop;
pub mod oracle;
pub mod prox;
pub mod qtf;
pub mod report;
pub mod signal;
pub mod sim;

pub use admm::{
    admm_solve, AdmmSolver, AdmmState, Algorithm, Regularizer, SolveResult, SolverConfig,
};
pub use engine::Engine;
pub use error::{Error, Result};
pub use ipm::InteriorPoint;
pub use signal::{
    check_loss, check_objective, delta_n_sq, delta_sq, diff_apply, tv_r, DiffOrder, QuantileLevel,
    RiskValue, Signal,
};
