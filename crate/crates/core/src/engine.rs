//! Solver selection shared by the estimators.

use crate::admm::{AdmmSolver, AdmmState, Algorithm, Regularizer, SolveResult, SolverConfig};
use crate::error::Result;
use crate::ipm::InteriorPoint;
use crate::linop::LinearOp;
use crate::signal::QuantileLevel;

/// A solver bound to one `(design, regularization operator)` pair.
///
/// The ADMM variant keeps the state of its last solve and uses it as the
/// warm start for the next one, so a decreasing or increasing sweep over
/// penalties reuses work.
#[allow(clippy::large_enum_variant)]
pub enum Engine<'a> {
    InteriorPoint(InteriorPoint<'a>),
    Admm {
        solver: AdmmSolver<'a>,
        warm: Option<AdmmState>,
    },
}

impl<'a> Engine<'a> {
    pub fn new(
        design: Option<&'a dyn LinearOp>,
        reg_op: &'a dyn LinearOp,
        algorithm: Algorithm,
    ) -> Result<Self> {
        Ok(match algorithm {
            Algorithm::InteriorPoint => Engine::InteriorPoint(InteriorPoint::new(design, reg_op)?),
            Algorithm::Admm => Engine::Admm {
                solver: AdmmSolver::new(design, reg_op)?,
                warm: None,
            },
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Engine::InteriorPoint(_) => Algorithm::InteriorPoint,
            Engine::Admm { .. } => Algorithm::Admm,
        }
    }

    /// Returns the full iterate of the last ADMM solve, if any.
    pub fn admm_state(&self) -> Option<&AdmmState> {
        match self {
            Engine::Admm { warm, .. } => warm.as_ref(),
            Engine::InteriorPoint(_) => None,
        }
    }

    /// Forgets any stored warm start.
    pub fn reset(&mut self) {
        if let Engine::Admm { warm, .. } = self {
            *warm = None;
        }
    }

    pub fn solve(
        &mut self,
        y: &[f64],
        tau: QuantileLevel,
        reg: Regularizer,
        cfg: &SolverConfig,
    ) -> Result<SolveResult> {
        match self {
            Engine::InteriorPoint(ipm) => ipm.solve(y, tau, reg, cfg),
            Engine::Admm { solver, warm } => {
                let (res, state) = solver.solve(y, tau, reg, cfg, warm.as_ref())?;
                *warm = Some(state);
                Ok(res)
            }
        }
    }
}
