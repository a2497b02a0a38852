//! ADMM for `min_x sum_i rho_tau(y_i - (Bx)_i) + R(Ax)` where `R` is either
//! the penalty `lambda ||.||_1` or the indicator of an l1 ball.
//!
//! The split introduces `u = y - Bx` (check-loss block, closed-form prox) and
//! `w = Ax` (l1 block, soft threshold or ball projection). Both blocks share
//! one penalty parameter, so the coupling matrix `B^T B + A^T A` does not
//! depend on it and is factorized exactly once per solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{GramTerm, SpdSolver, SpdSystem};
use crate::linop::LinearOp;
use crate::prox::{l1_ball_project_in_place, prox_check, soft_threshold};
use crate::signal::{check_sum, l1_norm, QuantileLevel, Signal};

const MAX_RHO_ADAPTATIONS: usize = 30;
const RHO_ADAPT_EVERY: usize = 10;
const RHO_BALANCE: f64 = 10.0;
const RHO_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
    pub adaptive_rho: bool,
    pub algorithm: Algorithm,
}

/// Which solver the estimators use. `rho` and `adaptive_rho` only affect
/// ADMM; the interior point method stops when its relative duality gap and
/// infeasibilities fall below `eps_abs`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    InteriorPoint,
    Admm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            max_iters: 20_000,
            adaptive_rho: true,
            algorithm: Algorithm::InteriorPoint,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid("rho must be positive"));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }

    /// Tight tolerances for comparisons against exact optima.
    pub fn precise() -> Self {
        SolverConfig {
            eps_abs: 1e-10,
            eps_rel: 1e-9,
            max_iters: 200_000,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub theta_hat: Signal,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// ADMM penalty parameter in effect when the solver stopped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    /// `lambda * ||A x||_1`
    Penalty(f64),
    /// `||A x||_1 <= radius`
    Budget(f64),
}

impl Regularizer {
    fn validate(self) -> Result<()> {
        match self {
            Regularizer::Penalty(l) if l >= 0.0 && l.is_finite() => Ok(()),
            Regularizer::Budget(v) if v >= 0.0 && v.is_finite() => Ok(()),
            _ => Err(Error::invalid(
                "penalty and budget must be finite and nonnegative",
            )),
        }
    }
}

/// Full iterate, reusable as a warm start along a tuning path.
#[derive(Clone, Debug)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub dual_loss: Vec<f64>,
    pub dual_reg: Vec<f64>,
    pub rho: f64,
}

impl AdmmState {
    /// A primal-only warm start; duals start at zero.
    pub fn from_primal(solver: &AdmmSolver<'_>, y: &[f64], x: Vec<f64>, rho: f64) -> Self {
        let bx = solver.apply_design(&x);
        let u: Vec<f64> = y.iter().zip(&bx).map(|(a, b)| a - b).collect();
        let w = solver.reg_op.apply_vec(&x);
        AdmmState {
            dual_loss: vec![0.0; u.len()],
            dual_reg: vec![0.0; w.len()],
            x,
            u,
            w,
            rho,
        }
    }
}

/// Factorized ADMM solver for a fixed pair of operators.
pub struct AdmmSolver<'a> {
    design: Option<&'a dyn LinearOp>,
    reg_op: &'a dyn LinearOp,
    normal: SpdSolver<'a>,
}

impl<'a> AdmmSolver<'a> {
    /// `design = None` means the identity, i.e. the loss acts on `x` itself.
    pub fn new(design: Option<&'a dyn LinearOp>, reg_op: &'a dyn LinearOp) -> Result<Self> {
        let dim = reg_op.cols();
        let system = match design {
            None => SpdSystem::new(
                dim,
                1.0,
                vec![GramTerm {
                    weight: 1.0,
                    op: reg_op,
                }],
            )?,
            Some(b) => SpdSystem::new(
                dim,
                0.0,
                vec![
                    GramTerm { weight: 1.0, op: b },
                    GramTerm {
                        weight: 1.0,
                        op: reg_op,
                    },
                ],
            )?,
        };
        Ok(AdmmSolver {
            design,
            reg_op,
            normal: SpdSolver::new(system)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.reg_op.cols()
    }

    pub fn observations(&self) -> usize {
        self.design.map_or(self.dim(), |b| b.rows())
    }

    pub fn reg_op(&self) -> &'a dyn LinearOp {
        self.reg_op
    }

    fn apply_design(&self, x: &[f64]) -> Vec<f64> {
        match self.design {
            None => x.to_vec(),
            Some(b) => b.apply_vec(x),
        }
    }

    fn default_state(&self, y: &[f64], rho: f64) -> AdmmState {
        let x0 = match self.design {
            None => y.to_vec(),
            Some(_) => vec![0.0; self.dim()],
        };
        AdmmState::from_primal(self, y, x0, rho)
    }

    /// Objective of `x`: check loss plus the penalty (the budget adds nothing).
    pub fn objective(&self, y: &[f64], tau: QuantileLevel, reg: Regularizer, x: &[f64]) -> f64 {
        let bx = self.apply_design(x);
        let loss = check_sum(y, &bx, tau);
        match reg {
            Regularizer::Penalty(l) if l > 0.0 => loss + l * l1_norm(&self.reg_op.apply_vec(x)),
            _ => loss,
        }
    }

    pub fn solve(
        &self,
        y: &[f64],
        tau: QuantileLevel,
        reg: Regularizer,
        cfg: &SolverConfig,
        warm: Option<&AdmmState>,
    ) -> Result<(SolveResult, AdmmState)> {
        cfg.validate()?;
        reg.validate()?;
        let n_obs = self.observations();
        if y.len() != n_obs {
            return Err(Error::DimensionMismatch {
                expected: n_obs,
                actual: y.len(),
            });
        }
        let dim = self.dim();
        let m = self.reg_op.rows();
        let mut st = match warm {
            Some(s) => {
                if s.x.len() != dim || s.u.len() != n_obs || s.w.len() != m {
                    return Err(Error::invalid("warm start has the wrong dimensions"));
                }
                s.clone()
            }
            None => self.default_state(y, cfg.rho),
        };
        if !(st.rho > 0.0 && st.rho.is_finite()) {
            st.rho = cfg.rho;
        }

        let mut rhs = vec![0.0; dim];
        let mut tmp_x = vec![0.0; dim];
        let mut tmp_x2 = vec![0.0; dim];
        let mut tmp_obs = vec![0.0; n_obs];
        let mut tmp_m = vec![0.0; m];
        let mut bx = vec![0.0; n_obs];
        let mut ax = vec![0.0; m];
        let mut du = vec![0.0; n_obs];
        let mut dw = vec![0.0; m];
        let ynorm = l2(y);
        let sqrt_pri = ((n_obs + m) as f64).sqrt();
        let sqrt_dual = (dim as f64).sqrt();

        let mut adaptations = 0;
        let mut prim = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut converged = false;
        let mut iters = 0;

        while iters < cfg.max_iters {
            iters += 1;
            let rho = st.rho;

            // x-update: (B^T B + A^T A) x = B^T (y - u - a) + A^T (w + b)
            for i in 0..n_obs {
                tmp_obs[i] = y[i] - st.u[i] - st.dual_loss[i];
            }
            self.adjoint_design(&tmp_obs, &mut rhs);
            for j in 0..m {
                tmp_m[j] = st.w[j] + st.dual_reg[j];
            }
            self.reg_op.apply_adjoint(&tmp_m, &mut tmp_x);
            for (r, t) in rhs.iter_mut().zip(&tmp_x) {
                *r += t;
            }
            self.normal.solve(&rhs, &mut st.x);

            self.forward_design(&st.x, &mut bx);
            self.reg_op.apply(&st.x, &mut ax);

            // u-update
            let gamma = 1.0 / rho;
            for i in 0..n_obs {
                let new = prox_check(y[i] - bx[i] - st.dual_loss[i], tau, gamma);
                du[i] = new - st.u[i];
                st.u[i] = new;
            }

            // w-update
            match reg {
                Regularizer::Penalty(lambda) => {
                    let kappa = lambda / rho;
                    for j in 0..m {
                        let new = soft_threshold(ax[j] - st.dual_reg[j], kappa);
                        dw[j] = new - st.w[j];
                        st.w[j] = new;
                    }
                }
                Regularizer::Budget(radius) => {
                    for j in 0..m {
                        tmp_m[j] = ax[j] - st.dual_reg[j];
                    }
                    l1_ball_project_in_place(&mut tmp_m, radius);
                    for j in 0..m {
                        dw[j] = tmp_m[j] - st.w[j];
                        st.w[j] = tmp_m[j];
                    }
                }
            }

            // scaled dual ascent and residuals
            let mut prim_sq = 0.0;
            for i in 0..n_obs {
                let r = st.u[i] + bx[i] - y[i];
                st.dual_loss[i] += r;
                prim_sq += r * r;
            }
            for j in 0..m {
                let r = st.w[j] - ax[j];
                st.dual_reg[j] += r;
                prim_sq += r * r;
            }
            prim = prim_sq.sqrt();

            // s = rho (B^T du - A^T dw)
            self.adjoint_design(&du, &mut tmp_x);
            self.reg_op.apply_adjoint(&dw, &mut tmp_x2);
            dual = rho * diff_norm(&tmp_x, &tmp_x2);

            let eps_pri = sqrt_pri * cfg.eps_abs
                + cfg.eps_rel
                    * (l2(&bx).hypot(l2(&ax)))
                        .max(l2(&st.u).hypot(l2(&st.w)))
                        .max(ynorm);
            self.adjoint_design(&st.dual_loss, &mut tmp_x);
            self.reg_op.apply_adjoint(&st.dual_reg, &mut tmp_x2);
            let eps_dual = sqrt_dual * cfg.eps_abs + cfg.eps_rel * rho * diff_norm(&tmp_x, &tmp_x2);

            if prim <= eps_pri && dual <= eps_dual {
                converged = true;
                break;
            }

            if cfg.adaptive_rho && adaptations < MAX_RHO_ADAPTATIONS && iters % RHO_ADAPT_EVERY == 0
            {
                let scale = if prim > RHO_BALANCE * dual {
                    Some(RHO_FACTOR)
                } else if dual > RHO_BALANCE * prim {
                    Some(1.0 / RHO_FACTOR)
                } else {
                    None
                };
                if let Some(s) = scale {
                    st.rho *= s;
                    st.dual_loss.iter_mut().for_each(|a| *a /= s);
                    st.dual_reg.iter_mut().for_each(|b| *b /= s);
                    adaptations += 1;
                }
            }
        }

        let objective = self.objective(y, tau, reg, &st.x);
        let result = SolveResult {
            theta_hat: Signal::new(st.x.clone())?,
            objective,
            iterations: iters,
            primal_residual: prim,
            dual_residual: dual,
            converged,
            rho: Some(st.rho),
        };
        Ok((result, st))
    }

    fn forward_design(&self, x: &[f64], out: &mut [f64]) {
        match self.design {
            None => out.copy_from_slice(x),
            Some(b) => b.apply(x, out),
        }
    }

    fn adjoint_design(&self, v: &[f64], out: &mut [f64]) {
        match self.design {
            None => out.copy_from_slice(v),
            Some(b) => b.apply_adjoint(v, out),
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// Minimizes `sum_i rho_tau(y_i - theta_i) + lambda_eff ||A theta||_1`.
pub fn admm_solve(
    y: &Signal,
    tau: QuantileLevel,
    op: &dyn LinearOp,
    lambda_eff: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if op.cols() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: op.cols(),
            actual: y.len(),
        });
    }
    let solver = AdmmSolver::new(None, op)?;
    Ok(solver
        .solve(y, tau, Regularizer::Penalty(lambda_eff), cfg, None)?
        .0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::DiffOp;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_penalty_returns_data() {
        let y = sig(&[1.0, -3.0, 2.5, 0.0]);
        let op = DiffOp::new(4, 1).unwrap();
        let res = admm_solve(
            &y,
            QuantileLevel::MEDIAN,
            &op,
            0.0,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert!(res.objective.abs() < 1e-12);
        for (a, b) in res.theta_hat.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_penalty_gives_median_constant() {
        let y = sig(&[1.0, 2.0, 100.0]);
        let op = DiffOp::new(3, 1).unwrap();
        let res = admm_solve(
            &y,
            QuantileLevel::MEDIAN,
            &op,
            1e6,
            &SolverConfig::precise(),
        )
        .unwrap();
        for v in res.theta_hat.iter() {
            assert!((v - 2.0).abs() < 1e-3, "{:?}", res.theta_hat);
        }
        // check part is 0.5 * 99; the residual differences cost lambda each
        assert!((res.objective - 49.5).abs() < 1e-2, "{}", res.objective);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let op = DiffOp::new(5, 1).unwrap();
        let y = sig(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            admm_solve(
                &y,
                QuantileLevel::MEDIAN,
                &op,
                1.0,
                &SolverConfig::default()
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let y = sig(&[0.0, 3.0, -1.0, 4.0, 2.0, 8.0]);
        let op = DiffOp::new(6, 2).unwrap();
        let cfg = SolverConfig {
            max_iters: 2,
            ..SolverConfig::precise()
        };
        let res = admm_solve(&y, QuantileLevel::MEDIAN, &op, 1.0, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let y = sig(&[0.0, 1.0]);
        let op = DiffOp::new(2, 1).unwrap();
        let cfg = SolverConfig {
            rho: 0.0,
            ..SolverConfig::default()
        };
        assert!(admm_solve(&y, QuantileLevel::MEDIAN, &op, 1.0, &cfg).is_err());
        assert!(admm_solve(
            &y,
            QuantileLevel::MEDIAN,
            &op,
            -1.0,
            &SolverConfig::default()
        )
        .is_err());
    }
}
