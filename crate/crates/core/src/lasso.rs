//! Quantile linear regression with an l1 budget on the coefficients:
//! `min sum rho_tau(y - X beta)` subject to `||beta||_1 <= V`.

use std::io::BufRead;

use serde::Serialize;

use crate::admm::{Regularizer, SolveResult, SolverConfig};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::linop::{DenseMatrix, IdentityOp, LinearOp};
use crate::signal::{check_sum, l1_norm, QuantileLevel, Signal};

/// Largest number of columns handled by the dense coupling solve.
pub const MAX_COLUMNS: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    matrix: DenseMatrix,
    col_norms: Vec<f64>,
    names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, row_major: Vec<f64>) -> Result<Self> {
        let matrix = DenseMatrix::from_row_major(rows, cols, row_major)?;
        let names = (1..=cols).map(|j| format!("x{j}")).collect();
        Ok(Self::from_dense(matrix, names))
    }

    fn from_dense(matrix: DenseMatrix, names: Vec<String>) -> Self {
        let mut col_norms = vec![0.0; matrix.cols()];
        for i in 0..matrix.rows() {
            for (c, v) in col_norms.iter_mut().zip(matrix.row(i)) {
                *c += v * v;
            }
        }
        col_norms.iter_mut().for_each(|c| *c = c.sqrt());
        DesignMatrix {
            matrix,
            col_norms,
            names,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Rescales every column to Euclidean norm `sqrt(n)`; zero columns are
    /// left alone.
    pub fn normalized(&self) -> Self {
        let n = self.rows();
        let target = (n as f64).sqrt();
        let p = self.cols();
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            for (j, v) in self.matrix.row(i).iter().enumerate() {
                let c = self.col_norms[j];
                data.push(if c > 0.0 { v * target / c } else { *v });
            }
        }
        let m = DenseMatrix::from_row_major(n, p, data).expect("same shape");
        Self::from_dense(m, self.names.clone())
    }

    /// CSV with a header row of column names followed by `n` rows of `p`
    /// numbers.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
            other => Some((i, other)),
        });
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::invalid("design CSV is empty"))?;
        let names: Vec<String> = header?.split(',').map(|s| s.trim().to_string()).collect();
        let p = names.len();
        let mut data = Vec::new();
        let mut rows = 0;
        for (idx, line) in lines {
            let line = line?;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != p {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {p} columns, found {}", cells.len()),
                });
            }
            for c in cells {
                data.push(c.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("expected a number, found {c:?}"),
                })?);
            }
            rows += 1;
        }
        let m = DenseMatrix::from_row_major(rows, p, data)?;
        Ok(Self::from_dense(m, names))
    }
}

#[derive(Clone, Debug)]
pub struct L1QrProblem {
    pub x: DesignMatrix,
    pub y: Signal,
    pub tau: QuantileLevel,
    pub budget_v: f64,
}

impl L1QrProblem {
    pub fn new(x: DesignMatrix, y: Signal, tau: QuantileLevel, budget_v: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                actual: y.len(),
            });
        }
        if x.cols() > MAX_COLUMNS {
            return Err(Error::invalid(format!(
                "at most {MAX_COLUMNS} columns are supported, got {}",
                x.cols()
            )));
        }
        if !(budget_v >= 0.0 && budget_v.is_finite()) {
            return Err(Error::invalid("budget must be finite and nonnegative"));
        }
        Ok(L1QrProblem {
            x,
            y,
            tau,
            budget_v,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L1QrFit {
    pub beta_hat: Vec<f64>,
    /// Fitted values `X beta_hat` with the solver diagnostics.
    pub solve: SolveResult,
}

/// Solves with the configured engine and rescales the coefficients onto the
/// ball if rounding left them outside.
pub fn l1_qr_fit(p: &L1QrProblem, cfg: &SolverConfig) -> Result<L1QrFit> {
    let x = p.x.matrix();
    let id = IdentityOp(x.cols());
    let mut beta = if p.budget_v == 0.0 {
        vec![0.0; x.cols()]
    } else {
        let mut engine = Engine::new(Some(x), &id, cfg.algorithm)?;
        let solve = engine.solve(&p.y, p.tau, Regularizer::Budget(p.budget_v), cfg)?;
        match engine.admm_state() {
            // the projected block is feasible by construction
            Some(state) => state.w.clone(),
            None => solve.theta_hat.into_vec(),
        }
    };
    let norm = l1_norm(&beta);
    if norm > p.budget_v {
        let s = if norm > 0.0 { p.budget_v / norm } else { 0.0 };
        beta.iter_mut().for_each(|b| *b *= s);
    }
    let fitted = x.apply_vec(&beta);
    let solve = SolveResult {
        objective: check_sum(&p.y, &fitted, p.tau),
        theta_hat: Signal::new(fitted)?,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        converged: true,
        rho: None,
    };
    Ok(L1QrFit {
        beta_hat: beta,
        solve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_forces_zero_coefficients() {
        let x = DesignMatrix::new(3, 2, vec![1.0, 0.5, -1.0, 2.0, 0.3, 0.0]).unwrap();
        let y = Signal::new(vec![1.0, -2.0, 0.5]).unwrap();
        let tau = QuantileLevel::new(0.3).unwrap();
        let fit = l1_qr_fit(
            &L1QrProblem::new(x, y.clone(), tau, 0.0).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(fit.beta_hat, vec![0.0, 0.0]);
        let expect = check_sum(&y, &[0.0; 3], tau);
        assert!((fit.solve.objective - expect).abs() < 1e-15);
    }

    #[test]
    fn intercept_only_recovers_median() {
        let y = vec![4.0, -1.0, 2.0, 7.0, 3.0];
        let x = DesignMatrix::new(5, 1, vec![1.0; 5]).unwrap();
        let p = L1QrProblem::new(x, Signal::new(y).unwrap(), QuantileLevel::MEDIAN, 10.0).unwrap();
        let fit = l1_qr_fit(&p, &SolverConfig::precise()).unwrap();
        assert!((fit.beta_hat[0] - 3.0).abs() < 1e-4, "{:?}", fit.beta_hat);
    }

    #[test]
    fn csv_reader() {
        let src = "a,b\n1,2\n3,4\n5,6\n";
        let d = DesignMatrix::read_csv(src.as_bytes()).unwrap();
        assert_eq!((d.rows(), d.cols()), (3, 2));
        assert_eq!(d.names(), &["a".to_string(), "b".to_string()]);
        assert!((d.col_norms()[0] - 35f64.sqrt()).abs() < 1e-12);
        assert!(DesignMatrix::read_csv("a,b\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn normalization_sets_column_norms() {
        let d = DesignMatrix::new(4, 2, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 0.0]).unwrap();
        let nd = d.normalized();
        assert!((nd.col_norms()[0] - 2.0).abs() < 1e-12);
        assert_eq!(nd.col_norms()[1], 0.0);
    }

    #[test]
    fn mismatched_rows_rejected() {
        let x = DesignMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let y = Signal::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(L1QrProblem::new(x, y, QuantileLevel::MEDIAN, 1.0).is_err());
    }
}
