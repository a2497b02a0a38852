//! Primal-dual interior point method for the same problem family as the
//! ADMM solver: `min_x sum_i rho_tau(y_i - (Bx)_i) + R(Ax)`.
//!
//! The data and penalty rows are stacked into `M = [B; A]` and the problem
//! is solved through its box-constrained dual
//!
//! ```text
//! max  y^T d - R mu   s.t.  M^T d = 0,  -beta <= d <= alpha
//! ```
//!
//! with `alpha = tau`, `beta = 1 - tau` on data rows and `alpha = beta =
//! lambda` (penalty) or `mu` (budget) on penalty rows. Each Newton step
//! needs one factorization of `M^T W M`, which is banded whenever `A^T A` is
//! and `B` is the identity. Budget problems add a scalar border for `mu`.

use crate::admm::{Regularizer, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, GramTerm, SpdSystem};
use crate::linop::{IdentityOp, LinearOp, RowScaled};
use crate::signal::{check_sum, l1_norm, QuantileLevel, Signal};

/// Upper bound on Newton steps regardless of `max_iters`.
pub const MAX_NEWTON_STEPS: usize = 200;
const STEP_FRACTION: f64 = 0.99995;

pub struct InteriorPoint<'a> {
    design: Option<&'a dyn LinearOp>,
    reg_op: &'a dyn LinearOp,
}

struct Iterate {
    theta: Vec<f64>,
    d: Vec<f64>,
    // box slacks `d + beta` and `alpha - d`, carried separately so they keep
    // full relative precision near the bounds
    l: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    mu: f64,
    s_r: f64,
}

struct Direction {
    theta: Vec<f64>,
    d: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    mu: f64,
    s_r: f64,
    dl: Vec<f64>,
    ds: Vec<f64>,
}

/// Row bounds of the dual box; `budget` rows use `mu` for both sides.
struct Boxes {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    first_pen: usize,
    budget: Option<f64>,
}

impl Boxes {
    fn lower_slack(&self, d: &[f64], mu: f64) -> Vec<f64> {
        d.iter()
            .enumerate()
            .map(|(i, di)| di + if self.is_var(i) { mu } else { self.beta[i] })
            .collect()
    }

    fn upper_slack(&self, d: &[f64], mu: f64) -> Vec<f64> {
        d.iter()
            .enumerate()
            .map(|(i, di)| if self.is_var(i) { mu } else { self.alpha[i] } - di)
            .collect()
    }

    fn is_var(&self, i: usize) -> bool {
        self.budget.is_some() && i >= self.first_pen
    }
}

impl<'a> InteriorPoint<'a> {
    /// `design = None` means the identity.
    pub fn new(design: Option<&'a dyn LinearOp>, reg_op: &'a dyn LinearOp) -> Result<Self> {
        if let Some(b) = design {
            if b.cols() != reg_op.cols() {
                return Err(Error::DimensionMismatch {
                    expected: reg_op.cols(),
                    actual: b.cols(),
                });
            }
        }
        Ok(InteriorPoint { design, reg_op })
    }

    pub fn dim(&self) -> usize {
        self.reg_op.cols()
    }

    pub fn observations(&self) -> usize {
        self.design.map_or(self.dim(), |b| b.rows())
    }

    pub fn solve(
        &self,
        y: &[f64],
        tau: QuantileLevel,
        reg: Regularizer,
        cfg: &SolverConfig,
    ) -> Result<SolveResult> {
        cfg.validate()?;
        if y.len() != self.observations() || !self.shift_equivariant() {
            return self.solve_centered(y, tau, reg, cfg);
        }
        // constants are free: solve on centered data, which keeps y^T d from
        // amplifying rounding in the dual constraint
        let c = crate::signal::empirical_quantile(y, tau);
        let yc: Vec<f64> = y.iter().map(|v| v - c).collect();
        let res = self.solve_centered(&yc, tau, reg, cfg)?;
        let theta = res.theta_hat.iter().map(|v| v + c).collect();
        self.finish(
            y,
            tau,
            reg,
            theta,
            res.iterations,
            res.primal_residual,
            res.dual_residual,
            res.converged,
        )
    }

    /// True when the fit moves with the data under `y -> y + c`: no design
    /// and a penalty operator that annihilates constants.
    fn shift_equivariant(&self) -> bool {
        self.design.is_none()
            && self
                .reg_op
                .apply_vec(&vec![1.0; self.dim()])
                .iter()
                .all(|v| v.abs() <= 1e-12)
    }

    fn solve_centered(
        &self,
        y: &[f64],
        tau: QuantileLevel,
        reg: Regularizer,
        cfg: &SolverConfig,
    ) -> Result<SolveResult> {
        let n_obs = self.observations();
        if y.len() != n_obs {
            return Err(Error::DimensionMismatch {
                expected: n_obs,
                actual: y.len(),
            });
        }
        let ident = IdentityOp(self.dim());
        let b_op: &dyn LinearOp = self.design.unwrap_or(&ident);
        let (pen_rows, budget) = match reg {
            Regularizer::Penalty(l) if l >= 0.0 && l.is_finite() => {
                if l == 0.0 {
                    if self.design.is_none() {
                        return self.finish(y, tau, reg, y.to_vec(), 0, 0.0, 0.0, true);
                    }
                    (0, None)
                } else {
                    (self.reg_op.rows(), None)
                }
            }
            Regularizer::Budget(v) if v > 0.0 && v.is_finite() => (self.reg_op.rows(), Some(v)),
            Regularizer::Budget(0.0) => {
                return Err(Error::invalid(
                    "a zero budget has no interior; fit the null space instead",
                ))
            }
            _ => {
                return Err(Error::invalid(
                    "penalty and budget must be finite and nonnegative",
                ))
            }
        };
        let pen_op: &dyn LinearOp = self.reg_op;
        let m = n_obs + pen_rows;
        let dim = self.dim();

        let t = tau.value();
        let mut alpha = vec![t; m];
        let mut beta = vec![1.0 - t; m];
        if let Regularizer::Penalty(l) = reg {
            alpha[n_obs..].iter_mut().for_each(|a| *a = l);
            beta[n_obs..].iter_mut().for_each(|b| *b = l);
        }
        let boxes = Boxes {
            alpha,
            beta,
            first_pen: n_obs,
            budget,
        };
        let mut ytil = y.to_vec();
        ytil.resize(m, 0.0);

        let stack = |x: &[f64]| -> Vec<f64> {
            let mut out = b_op.apply_vec(x);
            if pen_rows > 0 {
                out.extend(pen_op.apply_vec(x));
            }
            out
        };
        let stack_adjoint = |v: &[f64]| -> Vec<f64> {
            let mut out = b_op.apply_adjoint_vec(&v[..n_obs]);
            if pen_rows > 0 {
                let tail = pen_op.apply_adjoint_vec(&v[n_obs..]);
                out.iter_mut().zip(tail).for_each(|(o, a)| *o += a);
            }
            out
        };

        // Start: d = 0 is strictly inside the box and exactly dual feasible.
        let theta0 = match self.design {
            None => vec![crate::signal::empirical_quantile(y, tau); dim],
            Some(_) => vec![0.0; dim],
        };
        let resid0: Vec<f64> = ytil
            .iter()
            .zip(stack(&theta0))
            .map(|(a, b)| a - b)
            .collect();
        let scale = 1.0 + resid0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let delta = 0.1 * scale;
        let mut it = Iterate {
            theta: theta0,
            l: boxes.lower_slack(&vec![0.0; m], 1.0),
            s: boxes.upper_slack(&vec![0.0; m], 1.0),
            d: vec![0.0; m],
            z: resid0.iter().map(|e| (-e).max(0.0) + delta).collect(),
            w: resid0.iter().map(|e| e.max(0.0) + delta).collect(),
            mu: 1.0,
            s_r: 0.0,
        };
        if let Some(r) = budget {
            let used: f64 = it.z[n_obs..].iter().chain(&it.w[n_obs..]).sum();
            it.s_r = (r - used).max(0.0) + r.max(delta);
            it.mu = 1.0;
        }

        let tol = cfg.eps_abs;
        let ynorm = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cap = cfg.max_iters.min(MAX_NEWTON_STEPS);
        let mut iters = 0;
        let mut pinf: f64;
        let mut gap_rel: f64;
        let mut converged = false;
        // best iterate by the stopping measure, returned after a late breakdown
        let mut best: Option<(f64, Vec<f64>, f64, f64)> = None;

        loop {
            let l = it.l.clone();
            let s = it.s.clone();
            let mt = stack(&it.theta);
            let r2: Vec<f64> = (0..m)
                .map(|i| ytil[i] - mt[i] - it.w[i] + it.z[i])
                .collect();
            let r1: Vec<f64> = stack_adjoint(&it.d).iter().map(|v| -v).collect();
            let pen_sum: f64 = it.z[n_obs..].iter().chain(&it.w[n_obs..]).sum();
            let r3 = budget.map_or(0.0, |r| r - pen_sum - it.s_r);

            let compl: f64 = l.iter().zip(&it.z).map(|(a, b)| a * b).sum::<f64>()
                + s.iter().zip(&it.w).map(|(a, b)| a * b).sum::<f64>()
                + budget.map_or(0.0, |_| it.mu * it.s_r);
            let dual_obj: f64 = y.iter().zip(&it.d).map(|(a, b)| a * b).sum::<f64>()
                - budget.map_or(0.0, |r| r * it.mu);
            let primal_obj = self.objective_parts(y, tau, reg, &it.theta);
            pinf = r2.iter().fold(0.0f64, |a, v| a.max(v.abs())) / ynorm;
            let r3inf = budget.map_or(0.0, |r| r3.abs() / (1.0 + r));
            gap_rel = compl / (1.0 + dual_obj.abs());
            let true_gap = match budget {
                // a negative gap means d is not a valid bound yet
                None => (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs()),
                Some(r) => {
                    let excess = (l1_norm(&pen_op.apply_vec(&it.theta)) - r).max(0.0) / (1.0 + r);
                    ((primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs())).max(excess)
                }
            };
            let parts = [true_gap, gap_rel, pinf, r3inf];
            // f64::max drops NaN, so a broken iterate must be caught first
            let merit = if parts.iter().all(|v| v.is_finite()) {
                parts.iter().fold(0.0f64, |a, v| a.max(*v))
            } else {
                f64::INFINITY
            };
            if merit <= tol {
                converged = true;
                break;
            }
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, it.theta.clone(), pinf, gap_rel));
            }
            if iters >= cap {
                break;
            }
            iters += 1;

            let q: Vec<f64> = (0..m).map(|i| it.w[i] / s[i] + it.z[i] / l[i]).collect();
            let wts: Vec<f64> = q.iter().map(|v| 1.0 / v).collect();
            if !wts.iter().all(|v| v.is_finite() && *v > 0.0) {
                break;
            }
            let normal = match self.factor_normal(b_op, pen_op, pen_rows, &wts, n_obs) {
                Ok(f) => f,
                Err(Error::NotPositiveDefinite { .. }) => break,
                Err(e) => return Err(e),
            };
            let h: Vec<f64> = (0..m)
                .map(|i| {
                    if boxes.is_var(i) {
                        it.w[i] / s[i] - it.z[i] / l[i]
                    } else {
                        0.0
                    }
                })
                .collect();

            let solve_dir = |c_l: &[f64], c_s: &[f64], c_r: f64| -> Direction {
                let g: Vec<f64> = (0..m)
                    .map(|i| r2[i] - c_s[i] / s[i] + c_l[i] / l[i])
                    .collect();
                let wg: Vec<f64> = g.iter().zip(&wts).map(|(a, b)| a * b).collect();
                let mut rhs1 = stack_adjoint(&wg);
                rhs1.iter_mut().zip(&r1).for_each(|(a, b)| *a -= b);
                let mut dtheta = vec![0.0; dim];
                dtheta.copy_from_slice(&rhs1);
                normal.solve_in_place(&mut dtheta);
                let mut dmu = 0.0;
                let mut ds_r = 0.0;
                if budget.is_some() {
                    let wh: Vec<f64> = h.iter().zip(&wts).map(|(a, b)| a * b).collect();
                    let f = stack_adjoint(&wh);
                    let mut v = f.clone();
                    normal.solve_in_place(&mut v);
                    let hwh: f64 = h.iter().zip(&wh).map(|(a, b)| a * b).sum();
                    let q_p: f64 = q[n_obs..].iter().sum();
                    let gamma = hwh - q_p - it.s_r / it.mu;
                    let kappa: f64 = (n_obs..m).map(|i| c_s[i] / s[i] + c_l[i] / l[i]).sum();
                    let hwg: f64 = h.iter().zip(&wg).map(|(a, b)| a * b).sum();
                    let rho2 = r3 - kappa - c_r / it.mu - hwg;
                    let fd: f64 = f.iter().zip(&dtheta).map(|(a, b)| a * b).sum();
                    let fv: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum();
                    dmu = (rho2 + fd) / (gamma - fv);
                    dtheta.iter_mut().zip(&v).for_each(|(a, b)| *a += dmu * b);
                    ds_r = (c_r - it.s_r * dmu) / it.mu;
                }
                let md = stack(&dtheta);
                let dd: Vec<f64> = (0..m)
                    .map(|i| wts[i] * (g[i] - md[i] + h[i] * dmu))
                    .collect();
                let var = |i: usize| if boxes.is_var(i) { dmu } else { 0.0 };
                let dl: Vec<f64> = (0..m).map(|i| dd[i] + var(i)).collect();
                let ds: Vec<f64> = (0..m).map(|i| -dd[i] + var(i)).collect();
                let dz: Vec<f64> = (0..m).map(|i| (c_l[i] - it.z[i] * dl[i]) / l[i]).collect();
                let dw: Vec<f64> = (0..m).map(|i| (c_s[i] - it.w[i] * ds[i]) / s[i]).collect();
                Direction {
                    theta: dtheta,
                    d: dd,
                    z: dz,
                    w: dw,
                    mu: dmu,
                    s_r: ds_r,
                    dl,
                    ds,
                }
            };

            // predictor
            let c_l: Vec<f64> = (0..m).map(|i| -l[i] * it.z[i]).collect();
            let c_s: Vec<f64> = (0..m).map(|i| -s[i] * it.w[i]).collect();
            let c_r = -it.mu * it.s_r;
            let aff = solve_dir(&c_l, &c_s, c_r);
            let (ap, ad) = step_lengths(&l, &s, &it, &aff, budget.is_some(), 1.0);
            let n_pairs = (2 * m + usize::from(budget.is_some())) as f64;
            let nu = compl / n_pairs;
            let compl_aff: f64 = (0..m)
                .map(|i| {
                    (l[i] + ap * aff.dl[i]) * (it.z[i] + ad * aff.z[i])
                        + (s[i] + ap * aff.ds[i]) * (it.w[i] + ad * aff.w[i])
                })
                .sum::<f64>()
                + budget.map_or(0.0, |_| (it.mu + ap * aff.mu) * (it.s_r + ad * aff.s_r));
            let sigma = (compl_aff / compl).clamp(0.0, 1.0).powi(3);

            // corrector
            let target = sigma * nu;
            let c_l: Vec<f64> = (0..m)
                .map(|i| target - l[i] * it.z[i] - aff.dl[i] * aff.z[i])
                .collect();
            let c_s: Vec<f64> = (0..m)
                .map(|i| target - s[i] * it.w[i] - aff.ds[i] * aff.w[i])
                .collect();
            let c_r = target - it.mu * it.s_r - aff.mu * aff.s_r;
            let mut dir = solve_dir(&c_l, &c_s, c_r);
            let (mut ap, mut ad) = step_lengths(&l, &s, &it, &dir, budget.is_some(), STEP_FRACTION);
            if ap.min(ad) < 1e-3 {
                // the second-order term can block the step; retry a plain
                // centering direction and keep the longer step
                let target = sigma.max(0.1) * nu;
                let c_l: Vec<f64> = (0..m).map(|i| target - l[i] * it.z[i]).collect();
                let c_s: Vec<f64> = (0..m).map(|i| target - s[i] * it.w[i]).collect();
                let c_r = target - it.mu * it.s_r;
                let safe = solve_dir(&c_l, &c_s, c_r);
                let (sp, sd) = step_lengths(&l, &s, &it, &safe, budget.is_some(), STEP_FRACTION);
                if sp.min(sd) > ap.min(ad) {
                    (dir, ap, ad) = (safe, sp, sd);
                }
            }

            for i in 0..m {
                it.d[i] += ap * dir.d[i];
                it.l[i] += ap * dir.dl[i];
                it.s[i] += ap * dir.ds[i];
                it.z[i] += ad * dir.z[i];
                it.w[i] += ad * dir.w[i];
            }
            it.mu += ap * dir.mu;
            it.s_r += ad * dir.s_r;
            for j in 0..dim {
                it.theta[j] += ad * dir.theta[j];
            }
            if ap.max(ad) < 1e-12 {
                break;
            }
        }
        if !converged {
            if let Some((_, theta, p, g)) = best {
                return self.finish(y, tau, reg, theta, iters, p, g, false);
            }
        }
        self.finish(y, tau, reg, it.theta, iters, pinf, gap_rel, converged)
    }

    fn objective_parts(&self, y: &[f64], tau: QuantileLevel, reg: Regularizer, x: &[f64]) -> f64 {
        let bx = match self.design {
            None => x.to_vec(),
            Some(b) => b.apply_vec(x),
        };
        let loss = check_sum(y, &bx, tau);
        match reg {
            Regularizer::Penalty(l) if l > 0.0 => loss + l * l1_norm(&self.reg_op.apply_vec(x)),
            _ => loss,
        }
    }

    /// Factors `M^T W M`; a tiny diagonal shift rescues factorizations that
    /// lose definiteness to rounding late in the iteration.
    fn factor_normal(
        &self,
        b_op: &dyn LinearOp,
        pen_op: &dyn LinearOp,
        pen_rows: usize,
        wts: &[f64],
        n_obs: usize,
    ) -> Result<CholeskyFactor> {
        let sqrt_w: Vec<f64> = wts.iter().map(|v| v.sqrt()).collect();
        let data = RowScaled {
            op: b_op,
            scale: &sqrt_w[..n_obs],
        };
        let pen = RowScaled {
            op: pen_op,
            scale: &sqrt_w[n_obs..],
        };
        let mut terms = vec![GramTerm {
            weight: 1.0,
            op: &data as &dyn LinearOp,
        }];
        if pen_rows > 0 {
            terms.push(GramTerm {
                weight: 1.0,
                op: &pen,
            });
        }
        let mut shift = 0.0;
        loop {
            let system = SpdSystem::new(self.dim(), shift, terms.clone())?;
            match CholeskyFactor::of(&system) {
                Err(Error::NotPositiveDefinite { .. }) if shift < 1e-4 => {
                    let dmax = wts.iter().fold(0.0f64, |a, v| a.max(*v));
                    shift = if shift == 0.0 {
                        1e-14 * (1.0 + dmax)
                    } else {
                        shift * 100.0
                    };
                }
                other => return other,
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        y: &[f64],
        tau: QuantileLevel,
        reg: Regularizer,
        theta: Vec<f64>,
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        converged: bool,
    ) -> Result<SolveResult> {
        let objective = self.objective_parts(y, tau, reg, &theta);
        Ok(SolveResult {
            theta_hat: Signal::new(theta)?,
            objective,
            iterations,
            primal_residual,
            dual_residual,
            converged,
            rho: None,
        })
    }
}

fn step_lengths(
    l: &[f64],
    s: &[f64],
    it: &Iterate,
    dir: &Direction,
    budget: bool,
    frac: f64,
) -> (f64, f64) {
    let ratio = |x: f64, dx: f64| if dx < 0.0 { -x / dx } else { f64::INFINITY };
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for i in 0..l.len() {
        ap = ap.min(ratio(l[i], dir.dl[i])).min(ratio(s[i], dir.ds[i]));
        ad = ad
            .min(ratio(it.z[i], dir.z[i]))
            .min(ratio(it.w[i], dir.w[i]));
    }
    if budget {
        ap = ap.min(ratio(it.mu, dir.mu));
        ad = ad.min(ratio(it.s_r, dir.s_r));
    }
    ((frac * ap).min(1.0), (frac * ad).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{DenseMatrix, DiffOp};
    use crate::oracle::{simplex_solve, LpInstance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SolverConfig {
        SolverConfig {
            eps_abs: 1e-10,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn huge_penalty_gives_median_constant() {
        let op = DiffOp::new(3, 1).unwrap();
        let ipm = InteriorPoint::new(None, &op).unwrap();
        let res = ipm
            .solve(
                &[1.0, 2.0, 100.0],
                QuantileLevel::MEDIAN,
                Regularizer::Penalty(1e6),
                &cfg(),
            )
            .unwrap();
        assert!(res.converged);
        for v in res.theta_hat.iter() {
            assert!((v - 2.0).abs() < 1e-6, "{:?}", res.theta_hat);
        }
        assert!((res.objective - 49.5).abs() < 1e-4);
    }

    #[test]
    fn zero_penalty_is_identity() {
        let op = DiffOp::new(4, 2).unwrap();
        let ipm = InteriorPoint::new(None, &op).unwrap();
        let y = [3.0, -1.0, 0.5, 2.0];
        let res = ipm
            .solve(&y, QuantileLevel::MEDIAN, Regularizer::Penalty(0.0), &cfg())
            .unwrap();
        assert_eq!(res.theta_hat.as_slice(), &y);
        assert_eq!(res.objective, 0.0);
    }

    /// Builds `min sum rho_tau(y - X b)` over free `b` directly as an LP.
    fn quantile_regression_lp(x: &DenseMatrix, y: &[f64], tau: f64) -> LpInstance {
        let (n, p) = (x.rows(), x.cols());
        let nv = 2 * p + 2 * n;
        let mut cost = vec![0.0; nv];
        cost[2 * p..2 * p + n].iter_mut().for_each(|c| *c = tau);
        cost[2 * p + n..].iter_mut().for_each(|c| *c = 1.0 - tau);
        let a_eq = (0..n)
            .map(|i| {
                let mut row = vec![0.0; nv];
                for j in 0..p {
                    row[j] = x.get(i, j);
                    row[p + j] = -x.get(i, j);
                }
                row[2 * p + i] = 1.0;
                row[2 * p + n + i] = -1.0;
                row
            })
            .collect();
        LpInstance {
            cost,
            a_eq,
            b_eq: y.to_vec(),
            lower: vec![0.0; nv],
        }
    }

    #[test]
    fn unpenalized_regression_matches_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (n, p) = (15, 3);
            let x = DenseMatrix::from_row_major(
                n,
                p,
                (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let tau = rng.random_range(0.05..0.95);
            let none = crate::linop::ZeroOp { rows: 0, cols: p };
            let ipm = InteriorPoint::new(Some(&x), &none).unwrap();
            let res = ipm
                .solve(
                    &y,
                    QuantileLevel::new(tau).unwrap(),
                    Regularizer::Penalty(0.0),
                    &cfg(),
                )
                .unwrap();
            let opt = simplex_solve(&quantile_regression_lp(&x, &y, tau))
                .unwrap()
                .optimum;
            assert!(res.converged);
            assert!(
                (res.objective - opt).abs() <= 1e-7 * (1.0 + opt),
                "{} vs {opt}",
                res.objective
            );
        }
    }

    #[test]
    fn budget_constraint_is_respected() {
        let op = DiffOp::new(6, 1).unwrap();
        let ipm = InteriorPoint::new(None, &op).unwrap();
        let y = [0.0, 4.0, 0.0, 4.0, 0.0, 4.0];
        let res = ipm
            .solve(&y, QuantileLevel::MEDIAN, Regularizer::Budget(2.0), &cfg())
            .unwrap();
        assert!(res.converged);
        let tv = l1_norm(&op.apply_vec(&res.theta_hat));
        assert!(tv <= 2.0 + 1e-8, "{tv}");
        assert!(matches!(
            ipm.solve(&y, QuantileLevel::MEDIAN, Regularizer::Budget(0.0), &cfg()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let op = DiffOp::new(50, 2).unwrap();
        let ipm = InteriorPoint::new(None, &op).unwrap();
        let y: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let c = SolverConfig {
            max_iters: 1,
            ..cfg()
        };
        let res = ipm
            .solve(&y, QuantileLevel::MEDIAN, Regularizer::Penalty(3.0), &c)
            .unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }
}
