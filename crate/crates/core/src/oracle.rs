//! Exact linear-programming ground truth for small instances.
//!
//! Every estimator here minimizes a piecewise-linear objective, so splitting
//! residuals and differences into positive and negative parts gives an LP in
//! standard form. A dense two-phase simplex with Bland's rule solves it.

use crate::error::{Error, Result};
use crate::lasso::L1QrProblem;
use crate::lattice::{LatticeIncidence, QtvdMode, QtvdProblem};
use crate::linop::{to_dense, DenseMatrix, DiffOp, IdentityOp, LinearOp};
use crate::qtf::{CqtfProblem, PqtfProblem};

pub const MAX_VARIABLES: usize = 400;
pub const MAX_ROWS: usize = 200;
/// Largest signal length accepted by the trend-filter encoders.
pub const MAX_SIGNAL_LEN: usize = 20;

const PIVOT_EPS: f64 = 1e-11;

/// `min c^T x` subject to `A x = b`, `x >= lower`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance {
    pub cost: Vec<f64>,
    /// Row-major, `b.len()` rows of `cost.len()` entries.
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LpInstance {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b_eq.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let m = self.num_rows();
        if n > MAX_VARIABLES || m > MAX_ROWS {
            return Err(Error::SizeCap(format!(
                "LP has {n} variables and {m} rows; limits are {MAX_VARIABLES} and {MAX_ROWS}"
            )));
        }
        if self.a_eq.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.a_eq.len(),
            });
        }
        if self.lower.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.lower.len(),
            });
        }
        for row in &self.a_eq {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        let finite = self
            .cost
            .iter()
            .chain(&self.b_eq)
            .chain(&self.lower)
            .chain(self.a_eq.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("LP data must be finite"));
        }
        Ok(())
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub optimum: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    width: usize,
    // `rows` constraint rows then the reduced-cost row; the last column is
    // the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.at(r, c);
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.t[i * w + c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule over the first `eligible` columns.
    fn optimize(&mut self, eligible: usize) -> Result<()> {
        let obj = self.rows;
        loop {
            let Some(c) = (0..eligible).find(|&j| self.at(obj, j) < -PIVOT_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, c);
        }
    }
}

/// Two-phase dense simplex. Deterministic: the same instance always takes
/// the same pivots and returns the same bits.
pub fn simplex_solve(lp: &LpInstance) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_rows();
    let width = n + m + 1;

    // Shift to x' = x - lower >= 0 and make every rhs nonnegative.
    let mut t = vec![0.0; (m + 1) * width];
    for i in 0..m {
        let row = &lp.a_eq[i];
        let shift: f64 = row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum();
        let b = lp.b_eq[i] - shift;
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * width + j] = sign * row[j];
        }
        t[i * width + n + i] = 1.0;
        t[i * width + width - 1] = sign * b;
    }
    // Phase one: minimize the sum of artificials.
    for j in (0..n).chain(std::iter::once(width - 1)) {
        let s: f64 = (0..m).map(|i| t[i * width + j]).sum();
        t[m * width + j] = -s;
    }
    let mut tab = Tableau {
        rows: m,
        width,
        t,
        basis: (n..n + m).collect(),
        pivots: 0,
    };
    tab.optimize(n + m)?;
    let scale = 1.0 + (0..m).map(|i| tab.rhs(i).abs()).fold(0.0, f64::max);
    if -tab.rhs(m) > 1e-9 * scale {
        return Err(Error::Infeasible);
    }
    // Drive artificials out of the basis; rows with no eligible pivot are
    // redundant and stay inert.
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.at(i, j).abs() > 1e-9) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase two: reduced costs for the true objective.
    for j in 0..width {
        let mut v = if j < n { lp.cost[j] } else { 0.0 };
        for i in 0..m {
            let b = tab.basis[i];
            if b < n {
                v -= lp.cost[b] * tab.at(i, j);
            }
        }
        tab.t[m * width + j] = v;
    }
    tab.optimize(n)?;

    let mut x = lp.lower.clone();
    for i in 0..m {
        let b = tab.basis[i];
        if b < n {
            x[b] += tab.rhs(i).max(0.0);
        }
    }
    Ok(LpSolution {
        optimum: lp.objective(&x),
        x,
        pivots: tab.pivots,
    })
}

/// Penalty weight or budget radius applied to `sum |R x|`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Reg {
    Penalty(f64),
    Budget(f64),
}

/// Layout of a split encoding: `x+, x-, u+, u-, w+, w-` then an optional
/// slack. The primal variable is `x+ - x-`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitLayout {
    pub primal: usize,
    pub residuals: usize,
    pub differences: usize,
    pub slack: bool,
}

impl SplitLayout {
    pub fn num_vars(&self) -> usize {
        2 * (self.primal + self.residuals + self.differences) + usize::from(self.slack)
    }

    /// Recovers the primal variable from an LP solution.
    pub fn primal(&self, x: &[f64]) -> Vec<f64> {
        (0..self.primal)
            .map(|j| x[j] - x[self.primal + j])
            .collect()
    }
}

/// Rows `B x + u+ - u- = y` and `R x - w+ + w- = 0`, plus
/// `sum w+ + w- + s = V` when a budget is given.
fn encode_split(
    y: &[f64],
    design: &DenseMatrix,
    reg_op: &DenseMatrix,
    tau: f64,
    reg: Reg,
) -> Result<(LpInstance, SplitLayout)> {
    let p = design.cols();
    let n = y.len();
    let k = reg_op.rows();
    let layout = SplitLayout {
        primal: p,
        residuals: n,
        differences: k,
        slack: matches!(reg, Reg::Budget(_)),
    };
    let nv = layout.num_vars();
    let rows = n + k + usize::from(layout.slack);
    if nv > MAX_VARIABLES || rows > MAX_ROWS {
        return Err(Error::SizeCap(format!(
            "encoding needs {nv} variables and {rows} rows; limits are {MAX_VARIABLES} and {MAX_ROWS}"
        )));
    }
    let (xp, xm, up, um, wp, wm) = (0, p, 2 * p, 2 * p + n, 2 * p + 2 * n, 2 * p + 2 * n + k);
    let mut cost = vec![0.0; nv];
    for i in 0..n {
        cost[up + i] = tau;
        cost[um + i] = 1.0 - tau;
    }
    if let Reg::Penalty(lam) = reg {
        cost[wp..wp + 2 * k].iter_mut().for_each(|c| *c = lam);
    }
    let mut a_eq = Vec::with_capacity(rows);
    let mut b_eq = Vec::with_capacity(rows);
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for (j, &v) in design.row(i).iter().enumerate() {
            row[xp + j] = v;
            row[xm + j] = -v;
        }
        row[up + i] = 1.0;
        row[um + i] = -1.0;
        a_eq.push(row);
        b_eq.push(y[i]);
    }
    for i in 0..k {
        let mut row = vec![0.0; nv];
        for (j, &v) in reg_op.row(i).iter().enumerate() {
            row[xp + j] = v;
            row[xm + j] = -v;
        }
        row[wp + i] = -1.0;
        row[wm + i] = 1.0;
        a_eq.push(row);
        b_eq.push(0.0);
    }
    if let Reg::Budget(v) = reg {
        if !(v >= 0.0) {
            return Err(Error::invalid("budget must be nonnegative"));
        }
        let mut row = vec![0.0; nv];
        row[wp..wp + 2 * k].iter_mut().for_each(|c| *c = 1.0);
        row[nv - 1] = 1.0;
        a_eq.push(row);
        b_eq.push(v);
    }
    let lp = LpInstance {
        cost,
        a_eq,
        b_eq,
        lower: vec![0.0; nv],
    };
    Ok((lp, layout))
}

fn check_signal_len(n: usize) -> Result<()> {
    if n > MAX_SIGNAL_LEN {
        return Err(Error::SizeCap(format!(
            "oracle accepts at most {MAX_SIGNAL_LEN} observations, got {n}"
        )));
    }
    Ok(())
}

fn identity(n: usize) -> DenseMatrix {
    to_dense(&IdentityOp(n))
}

pub fn encode_pqtf_lp(p: &PqtfProblem) -> Result<(LpInstance, SplitLayout)> {
    let n = p.y.len();
    check_signal_len(n)?;
    let d = to_dense(&DiffOp::new(n, p.r.get())?);
    encode_split(
        &p.y,
        &identity(n),
        &d,
        p.tau.value(),
        Reg::Penalty(p.lambda_eff()),
    )
}

pub fn encode_cqtf_lp(p: &CqtfProblem) -> Result<(LpInstance, SplitLayout)> {
    let n = p.y.len();
    check_signal_len(n)?;
    let d = to_dense(&DiffOp::new(n, p.r.get())?);
    encode_split(
        &p.y,
        &identity(n),
        &d,
        p.tau.value(),
        Reg::Budget(p.difference_radius()),
    )
}

/// Edge differences carry the lattice scale, so the penalty and budget apply
/// to them unchanged.
pub fn encode_qtvd_lp(p: &QtvdProblem) -> Result<(LpInstance, SplitLayout)> {
    let n = p.y.len();
    check_signal_len(n)?;
    let inc = LatticeIncidence::new(p.y.dims(), p.y.side())?;
    let d = to_dense(&inc);
    let reg = match p.mode {
        QtvdMode::Penalized { lambda } => Reg::Penalty(lambda),
        QtvdMode::Constrained { budget } => Reg::Budget(budget),
    };
    encode_split(p.y.values(), &identity(n), &d, p.tau.value(), reg)
}

pub fn encode_l1qr_lp(p: &L1QrProblem) -> Result<(LpInstance, SplitLayout)> {
    let x = p.x.matrix();
    encode_split(
        &p.y,
        x,
        &identity(x.cols()),
        p.tau.value(),
        Reg::Budget(p.budget_v),
    )
}

/// Optimal value and primal solution of an encoded problem.
pub fn solve_encoded(enc: &(LpInstance, SplitLayout)) -> Result<(f64, Vec<f64>)> {
    let sol = simplex_solve(&enc.0)?;
    Ok((sol.optimum, enc.1.primal(&sol.x)))
}

pub fn pqtf_oracle(p: &PqtfProblem) -> Result<(f64, Vec<f64>)> {
    solve_encoded(&encode_pqtf_lp(p)?)
}

pub fn cqtf_oracle(p: &CqtfProblem) -> Result<(f64, Vec<f64>)> {
    solve_encoded(&encode_cqtf_lp(p)?)
}

pub fn qtvd_oracle(p: &QtvdProblem) -> Result<(f64, Vec<f64>)> {
    solve_encoded(&encode_qtvd_lp(p)?)
}

pub fn l1qr_oracle(p: &L1QrProblem) -> Result<(f64, Vec<f64>)> {
    solve_encoded(&encode_l1qr_lp(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSignal;
    use crate::signal::{DiffOrder, QuantileLevel, Signal};

    fn pqtf(y: &[f64], r: usize, tau: f64, lam_eff: f64) -> PqtfProblem {
        PqtfProblem::with_effective_lambda(
            Signal::new(y.to_vec()).unwrap(),
            QuantileLevel::new(tau).unwrap(),
            DiffOrder::new(r).unwrap(),
            lam_eff,
        )
        .unwrap()
    }

    #[test]
    fn single_lower_bound() {
        // min x s.t. x - s = 3, x, s >= 0
        let lp = LpInstance {
            cost: vec![1.0, 0.0],
            a_eq: vec![vec![1.0, -1.0]],
            b_eq: vec![3.0],
            lower: vec![0.0, 0.0],
        };
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.optimum, 3.0);
        assert_eq!(sol.x, vec![3.0, 0.0]);
    }

    #[test]
    fn shifted_lower_bounds() {
        // min x + y s.t. x + y = 1 with x >= 2, y >= -5
        let lp = LpInstance {
            cost: vec![1.0, 2.0],
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![1.0],
            lower: vec![2.0, -5.0],
        };
        let sol = simplex_solve(&lp).unwrap();
        assert!((sol.optimum - (6.0 - 10.0)).abs() < 1e-12, "{sol:?}");
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LpInstance {
            cost: vec![1.0],
            a_eq: vec![vec![1.0]],
            b_eq: vec![-1.0],
            lower: vec![0.0],
        };
        assert!(matches!(simplex_solve(&lp), Err(Error::Infeasible)));
        let lp = LpInstance {
            cost: vec![-1.0, 0.0],
            a_eq: vec![vec![1.0, -1.0]],
            b_eq: vec![0.0],
            lower: vec![0.0, 0.0],
        };
        assert!(matches!(simplex_solve(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn pqtf_dimensions() {
        let (lp, layout) = encode_pqtf_lp(&pqtf(&[1.0, 2.0, 3.0], 1, 0.5, 1.0)).unwrap();
        assert_eq!(lp.num_rows(), 5);
        assert_eq!(lp.num_vars(), 16);
        assert!(!layout.slack);
    }

    #[test]
    fn zero_penalty_interpolates() {
        let (opt, theta) = pqtf_oracle(&pqtf(&[3.0, -1.0, 4.0, 1.5], 2, 0.3, 0.0)).unwrap();
        assert!(opt.abs() < 1e-12);
        for (a, b) in theta.iter().zip([3.0, -1.0, 4.0, 1.5]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_penalty_is_median_fit() {
        let (opt, theta) = pqtf_oracle(&pqtf(&[1.0, 2.0, 100.0], 1, 0.5, 1e6)).unwrap();
        assert!((opt - 49.5).abs() < 1e-6, "{opt}");
        for t in theta {
            assert!((t - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_budget_is_constant_fit() {
        let p = CqtfProblem::new(
            Signal::new(vec![0.0, 0.0, 1.0, 1.0, 5.0]).unwrap(),
            QuantileLevel::new(0.5).unwrap(),
            DiffOrder::new(1).unwrap(),
            0.0,
        )
        .unwrap();
        let (opt, theta) = cqtf_oracle(&p).unwrap();
        assert!((opt - 0.5 * (1.0 + 1.0 + 4.0)).abs() < 1e-9, "{opt}");
        assert!(theta.iter().all(|t| (t - 1.0).abs() < 1e-9));
    }

    #[test]
    fn lattice_edge_count() {
        let y = LatticeSignal::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = QtvdProblem::new(
            y,
            QuantileLevel::MEDIAN,
            QtvdMode::Penalized { lambda: 1.0 },
        )
        .unwrap();
        let (_, layout) = encode_qtvd_lp(&p).unwrap();
        assert_eq!(2 * layout.differences, 8);
    }

    #[test]
    fn size_cap() {
        let y: Vec<f64> = (0..21).map(f64::from).collect();
        assert!(matches!(
            encode_pqtf_lp(&pqtf(&y, 1, 0.5, 1.0)),
            Err(Error::SizeCap(_))
        ));
    }

    #[test]
    fn permuted_variables_same_optimum() {
        let (lp, _) = encode_pqtf_lp(&pqtf(&[0.0, 0.0, 5.0, 5.0, 5.0, 1.0], 2, 0.7, 0.8)).unwrap();
        let base = simplex_solve(&lp).unwrap().optimum;
        let nv = lp.num_vars();
        let perm: Vec<usize> = (0..nv).map(|j| (j * 7 + 3) % nv).collect();
        assert_ne!(nv % 7, 0);
        let permuted = LpInstance {
            cost: perm.iter().map(|&j| lp.cost[j]).collect(),
            a_eq: lp
                .a_eq
                .iter()
                .map(|row| perm.iter().map(|&j| row[j]).collect())
                .collect(),
            b_eq: lp.b_eq.clone(),
            lower: perm.iter().map(|&j| lp.lower[j]).collect(),
        };
        let other = simplex_solve(&permuted).unwrap().optimum;
        assert!(
            (base - other).abs() < 1e-9 * (1.0 + base.abs()),
            "{base} vs {other}"
        );
        assert_eq!(
            simplex_solve(&lp).unwrap().optimum.to_bits(),
            base.to_bits()
        );
    }
}
