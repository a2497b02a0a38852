//! Tuning grids and BIC selection.

use serde::{Deserialize, Serialize};

use crate::admm::SolverConfig;
use crate::error::{Error, Result};
use crate::qtf::TrendFilter;
use crate::signal::{DiffOrder, QuantileLevel};

/// Evenly spaced grid of `log10` parameter values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for TuningGrid {
    /// 300 points of `log10(lambda n^(r-1))` on `[1, 4.5]`.
    fn default() -> Self {
        TuningGrid {
            lo: 1.0,
            hi: 4.5,
            points: 300,
        }
    }
}

impl TuningGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let g = TuningGrid { lo, hi, points };
        g.validate()?;
        Ok(g)
    }

    pub fn single(log10_value: f64) -> Self {
        TuningGrid {
            lo: log10_value,
            hi: log10_value,
            points: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if self.points > 1 && self.lo >= self.hi {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        Ok(())
    }

    pub fn log10_values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.hi
                } else {
                    self.lo + step * k as f64
                }
            })
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.log10_values()
            .into_iter()
            .map(|v| 10f64.powf(v))
            .collect()
    }
}

/// Formula recorded in every experiment report.
pub const BIC_FORMULA: &str = "2 n log(max(loss / n, 1e-12)) + df log n";

pub fn bic_value(n: usize, check_loss: f64, df: usize) -> f64 {
    let nf = n as f64;
    2.0 * nf * (check_loss / nf).max(1e-12).ln() + df as f64 * nf.ln()
}

/// One grid point of a BIC search. Failed points carry no fit values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BicPoint {
    pub log10_lambda_eff: f64,
    pub lambda_eff: f64,
    pub check_loss: Option<f64>,
    pub df: Option<usize>,
    pub bic: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BicSelection {
    pub lambda_eff: f64,
    pub index: usize,
    pub trace: Vec<BicPoint>,
}

/// Index of the smallest finite BIC, preferring the larger parameter on ties.
pub fn argmin_bic<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.into_iter().enumerate() {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| v <= b) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// Penalized fits over the grid (values are `log10(lambda n^(r-1))`) and the
/// minimizer of BIC.
pub fn bic_select(
    y: &[f64],
    tau: QuantileLevel,
    r: DiffOrder,
    grid: &TuningGrid,
    cfg: &SolverConfig,
) -> Result<BicSelection> {
    grid.validate()?;
    let n = y.len();
    let tf = TrendFilter::new(n, r)?;
    let mut engine = tf.engine(cfg)?;
    let trace: Vec<BicPoint> = grid
        .log10_values()
        .into_iter()
        .map(|lg| {
            let lambda_eff = 10f64.powf(lg);
            match tf.fit_penalized(&mut engine, y, tau, lambda_eff, cfg) {
                Ok(fit) => {
                    let loss = fit.check_loss(y);
                    BicPoint {
                        log10_lambda_eff: lg,
                        lambda_eff,
                        check_loss: Some(loss),
                        df: Some(fit.df),
                        bic: Some(bic_value(n, loss, fit.df)),
                        converged: fit.solve.converged,
                        error: None,
                    }
                }
                Err(e) => BicPoint {
                    log10_lambda_eff: lg,
                    lambda_eff,
                    check_loss: None,
                    df: None,
                    bic: None,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let index = argmin_bic(trace.iter().map(|p| p.bic))
        .ok_or_else(|| Error::invalid("every grid point failed"))?;
    Ok(BicSelection {
        lambda_eff: trace[index].lambda_eff,
        index,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_endpoints() {
        let g = TuningGrid::default().log10_values();
        assert_eq!(g.len(), 300);
        assert_eq!((g[0], g[299]), (1.0, 4.5));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_grids() {
        assert!(TuningGrid::new(2.0, 1.0, 5).is_err());
        assert!(TuningGrid::new(1.0, 2.0, 0).is_err());
        assert!(TuningGrid::new(1.0, 1.0, 1).is_ok());
    }

    #[test]
    fn ties_go_to_the_later_point() {
        assert_eq!(argmin_bic([Some(2.0), Some(1.0), Some(1.0), None]), Some(2));
        assert_eq!(argmin_bic([None, Some(f64::NAN)]), None);
    }

    #[test]
    fn single_point_grid_is_selected() {
        let y = [0.3, 1.2, -0.4, 2.2, 0.9, 1.1, 0.0, 0.5, 1.7, 0.2];
        let sel = bic_select(
            &y,
            QuantileLevel::MEDIAN,
            DiffOrder::new(1).unwrap(),
            &TuningGrid::single(0.5),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(sel.index, 0);
        assert_eq!(sel.trace.len(), 1);
        assert!((sel.lambda_eff - 10f64.powf(0.5)).abs() < 1e-12);
    }
}
