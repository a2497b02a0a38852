//! Univariate quantile trend filtering.
//!
//! Penalized form: `min sum rho_tau(y - theta) + lambda TV^(r)(theta)`.
//! Constrained form: `min sum rho_tau(y - theta)` subject to
//! `TV^(r)(theta) <= V`. The constrained form puts the difference block in
//! the l1 ball of radius `V / n^(r-1)`.

use serde::{Deserialize, Serialize};

use crate::admm::{Algorithm, Regularizer, SolveResult, SolverConfig};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::linalg::{GramTerm, SpdSolver, SpdSystem};
use crate::linop::{DenseMatrix, DiffOp, LinearOp, ZeroOp};
use crate::prox::{isotonic_nondecreasing, l1_ball_project_in_place, prox_check};
use crate::signal::{
    check_sum, diff_apply, empirical_quantile, tv_r, DiffOrder, QuantileLevel, Signal,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PqtfProblem {
    pub y: Signal,
    pub tau: QuantileLevel,
    pub r: DiffOrder,
    /// Multiplies `TV^(r)`; the l1 weight on `D^(r) theta` is `lambda n^(r-1)`.
    pub lambda: f64,
}

impl PqtfProblem {
    pub fn new(y: Signal, tau: QuantileLevel, r: DiffOrder, lambda: f64) -> Result<Self> {
        r.check_len(y.len())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        Ok(PqtfProblem { y, tau, r, lambda })
    }

    /// Builds the problem from the effective weight `lambda n^(r-1)`.
    pub fn with_effective_lambda(
        y: Signal,
        tau: QuantileLevel,
        r: DiffOrder,
        lambda_eff: f64,
    ) -> Result<Self> {
        let scale = r.tv_scale(y.len());
        Self::new(y, tau, r, lambda_eff / scale)
    }

    pub fn lambda_eff(&self) -> f64 {
        self.lambda * self.r.tv_scale(self.y.len())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CqtfProblem {
    pub y: Signal,
    pub tau: QuantileLevel,
    pub r: DiffOrder,
    pub budget_v: f64,
}

impl CqtfProblem {
    pub fn new(y: Signal, tau: QuantileLevel, r: DiffOrder, budget_v: f64) -> Result<Self> {
        r.check_len(y.len())?;
        if !(budget_v >= 0.0 && budget_v.is_finite()) {
            return Err(Error::invalid("budget must be finite and nonnegative"));
        }
        Ok(CqtfProblem {
            y,
            tau,
            r,
            budget_v,
        })
    }

    /// Radius of the l1 ball for `D^(r) theta`.
    pub fn difference_radius(&self) -> f64 {
        self.budget_v / self.r.tv_scale(self.y.len())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiQuantileProblem {
    pub y: Signal,
    pub levels: Vec<QuantileLevel>,
    pub r: DiffOrder,
    pub budgets: Vec<f64>,
}

impl MultiQuantileProblem {
    pub fn new(
        y: Signal,
        levels: Vec<QuantileLevel>,
        r: DiffOrder,
        budgets: Vec<f64>,
    ) -> Result<Self> {
        r.check_len(y.len())?;
        if levels.is_empty() {
            return Err(Error::invalid("at least one quantile level is required"));
        }
        if levels.windows(2).any(|w| w[0].value() >= w[1].value()) {
            return Err(Error::invalid(
                "quantile levels must be strictly increasing",
            ));
        }
        if budgets.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: levels.len(),
                actual: budgets.len(),
            });
        }
        if budgets.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("budgets must be finite and nonnegative"));
        }
        Ok(MultiQuantileProblem {
            y,
            levels,
            r,
            budgets,
        })
    }
}

/// A trend filtering fit with its smoothness diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendFit {
    #[serde(flatten)]
    pub solve: SolveResult,
    pub tau: f64,
    pub order: usize,
    /// `TV^(r)` of the fitted sequence.
    pub tv: f64,
    /// Entries of `D^(r) theta_hat` above the knot tolerance.
    pub knots: usize,
    /// `knots + r`.
    pub df: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl TrendFit {
    pub fn theta(&self) -> &[f64] {
        &self.solve.theta_hat
    }

    /// Sum of check losses of the residuals, without any penalty term.
    pub fn check_loss(&self, y: &[f64]) -> f64 {
        check_sum(
            y,
            self.theta(),
            QuantileLevel::new(self.tau).expect("stored level is valid"),
        )
    }
}

/// Knot threshold `1e-6 (1 + max |y|)`.
pub fn knot_tolerance(y: &[f64]) -> f64 {
    1e-6 * (1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// `(knots, df)` of a fitted sequence.
pub fn degrees_of_freedom(theta: &[f64], y: &[f64], r: DiffOrder) -> Result<(usize, usize)> {
    let eps = knot_tolerance(y);
    let knots = diff_apply(theta, r)?
        .iter()
        .filter(|d| d.abs() > eps)
        .count();
    Ok((knots, knots + r.get()))
}

fn summarize(solve: SolveResult, y: &[f64], tau: QuantileLevel, r: DiffOrder) -> Result<TrendFit> {
    let tv = tv_r(&solve.theta_hat, r)?;
    let (knots, df) = degrees_of_freedom(&solve.theta_hat, y, r)?;
    Ok(TrendFit {
        solve,
        tau: tau.value(),
        order: r.get(),
        tv,
        knots,
        df,
        lambda: None,
        lambda_eff: None,
        budget: None,
    })
}

/// Reusable factorized trend filter for one `(n, r)`.
pub struct TrendFilter {
    op: DiffOp,
    r: DiffOrder,
}

impl TrendFilter {
    pub fn new(n: usize, r: DiffOrder) -> Result<Self> {
        Ok(TrendFilter {
            op: DiffOp::new(n, r.get())?,
            r,
        })
    }

    pub fn op(&self) -> &DiffOp {
        &self.op
    }

    pub fn engine(&self, cfg: &SolverConfig) -> Result<Engine<'_>> {
        Engine::new(None, &self.op, cfg.algorithm)
    }

    pub fn order(&self) -> DiffOrder {
        self.r
    }

    pub fn len(&self) -> usize {
        self.op.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Penalized fit with effective weight `lambda_eff` on `||D^(r) theta||_1`.
    pub fn fit_penalized(
        &self,
        engine: &mut Engine<'_>,
        y: &[f64],
        tau: QuantileLevel,
        lambda_eff: f64,
        cfg: &SolverConfig,
    ) -> Result<TrendFit> {
        self.check_len(y)?;
        let n = y.len();
        // the dual of D^(r) is an r-fold partial sum of [tau - 1, tau] entries,
        // so |u| <= n^r and any larger weight leaves the same solution
        let weight = lambda_eff.min(saturating_weight(n, self.r));
        let mut solve = engine.solve(y, tau, Regularizer::Penalty(weight), cfg)?;
        let scale = self.r.tv_scale(n);
        solve.objective = check_sum(y, &solve.theta_hat, tau)
            + lambda_eff * tv_r(&solve.theta_hat, self.r)? / scale;
        let mut fit = summarize(solve, y, tau, self.r)?;
        fit.lambda_eff = Some(lambda_eff);
        fit.lambda = Some(lambda_eff / self.r.tv_scale(y.len()));
        Ok(fit)
    }

    /// Constrained fit with `TV^(r)(theta) <= budget`. For a positive budget
    /// the returned sequence is exactly feasible; a zero budget gives the best
    /// polynomial of degree `r - 1`, whose differences vanish up to rounding.
    pub fn fit_constrained(
        &self,
        engine: &mut Engine<'_>,
        y: &[f64],
        tau: QuantileLevel,
        budget: f64,
        cfg: &SolverConfig,
    ) -> Result<TrendFit> {
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::invalid("budget must be finite and nonnegative"));
        }
        self.check_len(y)?;
        let n = y.len();
        let r = self.r;
        let solve = if tv_r(y, r)? <= budget {
            SolveResult {
                theta_hat: Signal::new(y.to_vec())?,
                objective: 0.0,
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                converged: true,
                rho: None,
            }
        } else if budget == 0.0 {
            null_space_fit(y, tau, r, cfg)?
        } else {
            let radius = budget / r.tv_scale(n);
            let mut solve = engine.solve(y, tau, Regularizer::Budget(radius), cfg)?;
            let mut theta = solve.theta_hat.clone().into_vec();
            shrink_to_budget(&mut theta, r, budget, empirical_quantile(y, tau))?;
            solve.objective = check_sum(y, &theta, tau);
            solve.theta_hat = Signal::new(theta)?;
            solve
        };
        let mut fit = summarize(solve, y, tau, r)?;
        fit.budget = Some(budget);
        Ok(fit)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: y.len(),
            });
        }
        Ok(())
    }
}

/// Weight on `||D^(r) theta||_1` beyond which the penalized fit is the best
/// polynomial of degree `< r`.
pub fn saturating_weight(n: usize, r: DiffOrder) -> f64 {
    2.0 * (n as f64).powi(r.get() as i32)
}

/// Best check-loss fit among polynomials of degree `< r`, the null space of
/// `D^(r)`. Solved as a small quantile regression on a scaled power basis.
fn null_space_fit(
    y: &[f64],
    tau: QuantileLevel,
    r: DiffOrder,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let n = y.len();
    let k = r.get();
    if k == 1 {
        let c = empirical_quantile(y, tau);
        let theta = vec![c; n];
        return Ok(SolveResult {
            objective: check_sum(y, &theta, tau),
            theta_hat: Signal::new(theta)?,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
            rho: None,
        });
    }
    let denom = (n.max(2) - 1) as f64;
    let mut basis = Vec::with_capacity(n * k);
    for i in 0..n {
        let t = 2.0 * i as f64 / denom - 1.0;
        let mut p = 1.0;
        for _ in 0..k {
            basis.push(p);
            p *= t;
        }
    }
    let x = DenseMatrix::from_row_major(n, k, basis)?;
    let none = ZeroOp { rows: 0, cols: k };
    let ipm_cfg = SolverConfig {
        algorithm: Algorithm::InteriorPoint,
        eps_abs: cfg.eps_abs.min(1e-9),
        ..*cfg
    };
    let mut engine = Engine::new(Some(&x), &none, Algorithm::InteriorPoint)?;
    let mut solve = engine.solve(y, tau, Regularizer::Penalty(0.0), &ipm_cfg)?;
    let fitted = x.apply_vec(&solve.theta_hat);
    solve.objective = check_sum(y, &fitted, tau);
    solve.theta_hat = Signal::new(fitted)?;
    Ok(solve)
}

/// Pulls `theta` toward the constant `anchor` until `TV^(r)(theta) <= budget`.
/// TV is positively homogeneous and blind to constants, so the blend
/// `t theta + (1 - t) anchor` has TV exactly `t TV(theta)`.
fn shrink_to_budget(theta: &mut [f64], r: DiffOrder, budget: f64, anchor: f64) -> Result<()> {
    blend_to_budget(theta, budget, anchor, |t| tv_r(t, r))
}

/// Same blend for any seminorm `tv` that ignores constant shifts.
pub(crate) fn blend_to_budget<F>(theta: &mut [f64], budget: f64, anchor: f64, tv: F) -> Result<()>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut t = 1.0;
    for _ in 0..4 {
        let current = tv(theta)?;
        if current <= budget {
            return Ok(());
        }
        // the slack factor absorbs rounding in the blend
        t = budget / current * (1.0 - 1e-12);
        for v in theta.iter_mut() {
            *v = t * *v + (1.0 - t) * anchor;
        }
    }
    if tv(theta)? > budget || t <= 0.0 {
        theta.iter_mut().for_each(|v| *v = anchor);
    }
    Ok(())
}

/// Penalized quantile trend filtering.
pub fn pqtf_fit(p: &PqtfProblem, cfg: &SolverConfig) -> Result<TrendFit> {
    let tf = TrendFilter::new(p.y.len(), p.r)?;
    let mut engine = tf.engine(cfg)?;
    let mut fit = tf.fit_penalized(&mut engine, &p.y, p.tau, p.lambda_eff(), cfg)?;
    fit.lambda = Some(p.lambda);
    Ok(fit)
}

/// Constrained quantile trend filtering.
pub fn cqtf_fit(p: &CqtfProblem, cfg: &SolverConfig) -> Result<TrendFit> {
    let tf = TrendFilter::new(p.y.len(), p.r)?;
    let mut engine = tf.engine(cfg)?;
    tf.fit_constrained(&mut engine, &p.y, p.tau, p.budget_v, cfg)
}

/// Joint constrained fits at several quantile levels with the ordering
/// `theta(tau_k) <= theta(tau_{k+1})` enforced coordinatewise.
///
/// ADMM with three blocks per level: `u = y - theta` (check prox),
/// `w = D theta` (l1-ball projection) and a consensus copy `z = theta`
/// projected, per coordinate, onto the monotone cone across levels.
pub fn multi_quantile_fit(p: &MultiQuantileProblem, cfg: &SolverConfig) -> Result<Vec<TrendFit>> {
    cfg.validate()?;
    let y: &[f64] = &p.y;
    let n = y.len();
    let r = p.r;
    let levels = &p.levels;
    let k_levels = levels.len();
    let op = DiffOp::new(n, r.get())?;
    let m = op.rows();
    let system = SpdSystem::new(
        n,
        2.0,
        vec![GramTerm {
            weight: 1.0,
            op: &op,
        }],
    )?;
    let normal = SpdSolver::new(system)?;
    let radii: Vec<f64> = p.budgets.iter().map(|v| v / r.tv_scale(n)).collect();

    let mut theta = vec![y.to_vec(); k_levels];
    let mut u = vec![vec![0.0; n]; k_levels];
    let mut w: Vec<Vec<f64>> = (0..k_levels).map(|_| op.apply_vec(y)).collect();
    let mut z = vec![y.to_vec(); k_levels];
    let mut a = vec![vec![0.0; n]; k_levels];
    let mut b = vec![vec![0.0; m]; k_levels];
    let mut c = vec![vec![0.0; n]; k_levels];
    let mut rho = cfg.rho;

    let mut rhs = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];
    let mut dtheta = vec![vec![0.0; m]; k_levels];
    let mut column = vec![0.0; k_levels];
    let mut dw = vec![vec![0.0; m]; k_levels];
    let mut du = vec![vec![0.0; n]; k_levels];
    let mut dz = vec![vec![0.0; n]; k_levels];
    let y_l2 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sqrt_pri = ((k_levels * (2 * n + m)) as f64).sqrt();
    let sqrt_dual = ((k_levels * n) as f64).sqrt();

    let mut iters = 0;
    let mut adaptations = 0;
    let mut converged = false;
    let (mut prim, mut dual) = (f64::INFINITY, f64::INFINITY);
    while iters < cfg.max_iters {
        iters += 1;
        for k in 0..k_levels {
            for j in 0..m {
                tmp_m[j] = w[k][j] + b[k][j];
            }
            op.apply_adjoint(&tmp_m, &mut tmp_n);
            for i in 0..n {
                rhs[i] = (y[i] - u[k][i] - a[k][i]) + tmp_n[i] + (z[k][i] - c[k][i]);
            }
            normal.solve(&rhs, &mut theta[k]);
            op.apply(&theta[k], &mut dtheta[k]);
            let tau = levels[k];
            for i in 0..n {
                let new = prox_check(y[i] - theta[k][i] - a[k][i], tau, 1.0 / rho);
                du[k][i] = new - u[k][i];
                u[k][i] = new;
            }
            for j in 0..m {
                tmp_m[j] = dtheta[k][j] - b[k][j];
            }
            l1_ball_project_in_place(&mut tmp_m, radii[k]);
            for j in 0..m {
                dw[k][j] = tmp_m[j] - w[k][j];
                w[k][j] = tmp_m[j];
            }
        }
        for i in 0..n {
            for k in 0..k_levels {
                column[k] = theta[k][i] + c[k][i];
            }
            isotonic_nondecreasing(&mut column);
            for k in 0..k_levels {
                dz[k][i] = column[k] - z[k][i];
                z[k][i] = column[k];
            }
        }

        let mut prim_sq = 0.0;
        let (mut fit_sq, mut aux_sq) = (0.0, 0.0);
        let mut dual_sq = 0.0;
        let mut dualvar_sq = 0.0;
        for k in 0..k_levels {
            for i in 0..n {
                let r1 = u[k][i] + theta[k][i] - y[i];
                let r3 = theta[k][i] - z[k][i];
                a[k][i] += r1;
                c[k][i] += r3;
                prim_sq += r1 * r1 + r3 * r3;
                fit_sq += 2.0 * theta[k][i] * theta[k][i];
                aux_sq += u[k][i] * u[k][i] + z[k][i] * z[k][i];
            }
            for j in 0..m {
                let r2 = w[k][j] - dtheta[k][j];
                b[k][j] += r2;
                prim_sq += r2 * r2;
                fit_sq += dtheta[k][j] * dtheta[k][j];
                aux_sq += w[k][j] * w[k][j];
            }
            op.apply_adjoint(&dw[k], &mut tmp_n);
            for i in 0..n {
                let s = du[k][i] - tmp_n[i] - dz[k][i];
                dual_sq += s * s;
            }
            op.apply_adjoint(&b[k], &mut tmp_n);
            for i in 0..n {
                let s = a[k][i] - tmp_n[i] + c[k][i];
                dualvar_sq += s * s;
            }
        }
        prim = prim_sq.sqrt();
        dual = rho * dual_sq.sqrt();
        let eps_pri = sqrt_pri * cfg.eps_abs
            + cfg.eps_rel
                * fit_sq
                    .sqrt()
                    .max(aux_sq.sqrt())
                    .max(y_l2 * (k_levels as f64).sqrt());
        let eps_dual = sqrt_dual * cfg.eps_abs + cfg.eps_rel * rho * dualvar_sq.sqrt();
        if prim <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
        if cfg.adaptive_rho && adaptations < 30 && iters % 10 == 0 {
            let s = if prim > 10.0 * dual {
                2.0
            } else if dual > 10.0 * prim {
                0.5
            } else {
                1.0
            };
            if s != 1.0 {
                rho *= s;
                for k in 0..k_levels {
                    a[k].iter_mut().for_each(|v| *v /= s);
                    b[k].iter_mut().for_each(|v| *v /= s);
                    c[k].iter_mut().for_each(|v| *v /= s);
                }
                adaptations += 1;
            }
        }
    }

    // z is monotone across levels; enforce the budgets exactly, then restore
    // the ordering (the budget blend moves each level by O(tolerance)).
    let mut out = z;
    for (k, level) in out.iter_mut().enumerate() {
        shrink_to_budget(level, r, p.budgets[k], empirical_quantile(y, levels[k]))?;
    }
    for i in 0..n {
        for k in 0..k_levels {
            column[k] = out[k][i];
        }
        isotonic_nondecreasing(&mut column);
        for k in 0..k_levels {
            out[k][i] = column[k];
        }
    }

    out.into_iter()
        .enumerate()
        .map(|(k, th)| {
            let tau = levels[k];
            let solve = SolveResult {
                objective: check_sum(y, &th, tau),
                theta_hat: Signal::new(th)?,
                iterations: iters,
                primal_residual: prim,
                dual_residual: dual,
                converged,
                rho: Some(rho),
            };
            let mut fit = summarize(solve, y, tau, r)?;
            fit.budget = Some(p.budgets[k]);
            Ok(fit)
        })
        .collect()
}
