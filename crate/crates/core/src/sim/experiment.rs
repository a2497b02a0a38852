//! Monte Carlo experiments: fit every replicate along a tuning grid, then
//! aggregate under oracle-grid, BIC or fixed tuning.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::SolverConfig;
use crate::error::{Error, Result};
use crate::lasso::{l1_qr_fit, L1QrProblem};
use crate::lattice::{qtvd_fit_with, LatticeIncidence, QtvdMode, QtvdProblem};
use crate::qtf::TrendFilter;
use crate::report::{fmt_f64, to_json_string};
use crate::signal::{DiffOrder, QuantileLevel, RiskValue};
use crate::sim::scenario::{scenario_law, LatticeScenario, RegressionScenario, ScenarioSpec};
use crate::sim::tuning::{argmin_bic, bic_value, TuningGrid, BIC_FORMULA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pqtf1,
    Pqtf2,
    /// Constrained trend filtering of the configured order.
    Cqtf,
    Qtvd,
    L1qr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pqtf1 => "pqtf1",
            Method::Pqtf2 => "pqtf2",
            Method::Cqtf => "cqtf",
            Method::Qtvd => "qtvd",
            Method::L1qr => "l1qr",
        }
    }

    /// Whether grid values are budgets rather than penalties.
    pub fn is_constrained(self) -> bool {
        matches!(self, Method::Cqtf | Method::L1qr)
    }

    /// Grid used when a config does not give one. Penalized trend filters
    /// search `log10(lambda n^(r-1))`, QTVD searches `log10(lambda)` and the
    /// constrained methods search `log10(V)`.
    pub fn default_grid(self) -> TuningGrid {
        match self {
            Method::Pqtf1 | Method::Pqtf2 => TuningGrid::default(),
            Method::Qtvd => TuningGrid {
                lo: 0.0,
                hi: 3.0,
                points: 300,
            },
            Method::Cqtf | Method::L1qr => TuningGrid {
                lo: -1.0,
                hi: 2.0,
                points: 300,
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "pqtf1" => Method::Pqtf1,
            "pqtf2" => Method::Pqtf2,
            "cqtf" => Method::Cqtf,
            "qtvd" => Method::Qtvd,
            "l1qr" => Method::L1qr,
            other => return Err(Error::invalid(format!("unknown method {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tuning {
    /// The grid point minimizing the metric averaged over replicates.
    #[default]
    OracleGrid,
    /// Per-replicate BIC minimizer.
    Bic,
    /// The single parameter in `value`.
    Fixed,
}

impl FromStr for Tuning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle-grid" => Tuning::OracleGrid,
            "bic" => Tuning::Bic,
            "fixed" => Tuning::Fixed,
            other => return Err(Error::invalid(format!("unknown tuning {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: u8,
    /// Sequence length; for QTVD the number of lattice nodes, a perfect
    /// square.
    pub n: usize,
    pub tau: f64,
    pub method: Method,
    /// Difference order of `cqtf`; implied by the other trend methods.
    pub r: Option<usize>,
    pub tuning: Tuning,
    pub grid: Option<TuningGrid>,
    /// Parameter for fixed tuning, on the same scale as the grid but not
    /// in logs.
    pub value: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Columns of the regression design, intercept included.
    pub p: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: 1,
            n: 1000,
            tau: 0.5,
            method: Method::Pqtf1,
            r: None,
            tuning: Tuning::OracleGrid,
            grid: None,
            value: None,
            replicates: 100,
            seed: 1,
            p: None,
            solver: SolverConfig::default(),
        }
    }
}

pub const DEFAULT_REGRESSION_COLUMNS: usize = 10;

impl ExperimentConfig {
    pub fn order(&self) -> Result<Option<DiffOrder>> {
        let implied = match self.method {
            Method::Pqtf1 => Some(1),
            Method::Pqtf2 => Some(2),
            Method::Cqtf => Some(self.r.unwrap_or(1)),
            Method::Qtvd | Method::L1qr => None,
        };
        match (implied, self.r) {
            (Some(k), Some(r)) if k != r => Err(Error::invalid(format!(
                "method {} has order {k}, config gives r = {r}",
                self.method
            ))),
            (None, Some(_)) => Err(Error::invalid(format!(
                "method {} takes no order",
                self.method
            ))),
            (k, _) => k.map(DiffOrder::new).transpose(),
        }
    }

    /// The grid actually searched.
    pub fn effective_grid(&self) -> Result<TuningGrid> {
        let g = match self.tuning {
            Tuning::Fixed => {
                let v = self
                    .value
                    .ok_or_else(|| Error::invalid("fixed tuning needs a value"))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid("fixed value must be positive and finite"));
                }
                TuningGrid::single(v.log10())
            }
            _ => self.grid.unwrap_or_else(|| self.method.default_grid()),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        QuantileLevel::new(self.tau)?;
        self.solver.validate()?;
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        let order = self.order()?;
        self.effective_grid()?;
        if self.tuning == Tuning::Bic && order.is_none() {
            return Err(Error::invalid("bic tuning needs a trend filtering method"));
        }
        ScenarioSpec::new(self.scenario, self.n.max(10), self.seed)?;
        match self.method {
            Method::Qtvd => {
                lattice_side(self.n)?;
            }
            Method::L1qr => {
                RegressionScenario::new(
                    self.n,
                    self.columns(),
                    scenario_law(self.scenario),
                    self.seed,
                )?;
            }
            _ => {
                ScenarioSpec::new(self.scenario, self.n, self.seed)?;
                order.expect("trend method").check_len(self.n)?;
            }
        }
        Ok(())
    }

    fn columns(&self) -> usize {
        self.p.unwrap_or(DEFAULT_REGRESSION_COLUMNS)
    }

    /// Base of the output file names.
    pub fn file_stem(&self) -> String {
        let method = match (self.method, self.r) {
            (Method::Cqtf, r) => format!("cqtf{}", r.unwrap_or(1)),
            (m, _) => m.name().to_string(),
        };
        format!(
            "scenario{}_{}_n{}_seed{}",
            self.scenario, method, self.n, self.seed
        )
    }
}

fn lattice_side(n: usize) -> Result<usize> {
    let m = (n as f64).sqrt().round() as usize;
    if m < 2 || m * m != n {
        return Err(Error::invalid(format!(
            "qtvd needs n = m^2 with m >= 2, got {n}"
        )));
    }
    Ok(m)
}

/// Fit of one replicate at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub replicate: usize,
    pub grid_index: usize,
    pub log10_param: f64,
    pub param: f64,
    /// `None` when the solver failed at this point.
    pub risk: Option<RiskValue>,
    pub check_loss: Option<f64>,
    pub df: Option<usize>,
    pub bic: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std_error: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std_error = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Aggregate { mean, std_error }
    }
}

/// Parameter chosen for one replicate and its metrics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub replicate: usize,
    pub index_mse: usize,
    pub param_mse: f64,
    pub mse: f64,
    pub index_delta: usize,
    pub param_delta: f64,
    pub delta_n_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub grid: TuningGrid,
    pub mse: Aggregate,
    pub delta_n_sq: Aggregate,
    pub avg_mse_x10: f64,
    pub avg_delta_x10: f64,
    /// Risks of the raw observations.
    pub baseline_mse: Aggregate,
    pub baseline_delta_n_sq: Aggregate,
    pub selections: Vec<Selection>,
    /// Grid points where at least one replicate failed; excluded from oracle
    /// selection.
    pub failed_points: usize,
    pub nonconverged_fits: usize,
    pub bic_formula: String,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    /// Replicate-major: every grid point of replicate 0, then replicate 1.
    pub rows: Vec<MetricRow>,
    pub runtime: Duration,
}

struct Replicate {
    rows: Vec<MetricRow>,
    baseline: RiskValue,
}

/// Runs the experiment; replicates go through the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_progress(cfg, &|_| {})
}

/// As [`run_experiment`], calling `progress` with each finished replicate
/// index (in completion order).
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.effective_grid()?;
    let reps: Vec<Replicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let out = run_replicate(cfg, &grid, rep);
            progress(rep);
            out
        })
        .collect::<Result<_>>()?;
    let summary = summarize(cfg, grid, &reps)?;
    let rows = reps.into_iter().flat_map(|r| r.rows).collect();
    Ok(ExperimentReport {
        summary,
        rows,
        runtime: start.elapsed(),
    })
}

fn run_replicate(cfg: &ExperimentConfig, grid: &TuningGrid, rep: usize) -> Result<Replicate> {
    let tau = QuantileLevel::new(cfg.tau)?;
    let law = scenario_law(cfg.scenario);
    let solver = &cfg.solver;
    let logs = grid.log10_values();
    let row = |k: usize,
               out: Result<(Vec<f64>, f64, usize, bool)>,
               truth: &[f64],
               n: usize|
     -> Result<MetricRow> {
        let lg = logs[k];
        Ok(match out {
            Ok((theta, loss, df, converged)) => MetricRow {
                replicate: rep,
                grid_index: k,
                log10_param: lg,
                param: 10f64.powf(lg),
                risk: Some(RiskValue::between(&theta, truth)?),
                check_loss: Some(loss),
                df: Some(df),
                bic: Some(bic_value(n, loss, df)),
                converged,
            },
            Err(_) => MetricRow {
                replicate: rep,
                grid_index: k,
                log10_param: lg,
                param: 10f64.powf(lg),
                risk: None,
                check_loss: None,
                df: None,
                bic: None,
                converged: false,
            },
        })
    };
    match cfg.method {
        Method::Pqtf1 | Method::Pqtf2 | Method::Cqtf => {
            let spec = ScenarioSpec::new(cfg.scenario, cfg.n, cfg.seed)?;
            let r = cfg.order()?.expect("trend method");
            let y = spec.generate_replicate(rep as u64)?;
            let truth = spec.true_quantile(tau)?;
            let tf = TrendFilter::new(cfg.n, r)?;
            let mut engine = tf.engine(solver)?;
            let rows = (0..logs.len())
                .map(|k| {
                    let v = 10f64.powf(logs[k]);
                    let fit = if cfg.method == Method::Cqtf {
                        tf.fit_constrained(&mut engine, &y, tau, v, solver)
                    } else {
                        tf.fit_penalized(&mut engine, &y, tau, v, solver)
                    };
                    let out = fit.map(|f| {
                        let loss = f.check_loss(&y);
                        (f.solve.theta_hat.into_vec(), loss, f.df, f.solve.converged)
                    });
                    row(k, out, &truth, cfg.n)
                })
                .collect::<Result<_>>()?;
            Ok(Replicate {
                rows,
                baseline: RiskValue::between(&y, &truth)?,
            })
        }
        Method::Qtvd => {
            let side = lattice_side(cfg.n)?;
            let model = LatticeScenario::new(side, law, cfg.seed)?;
            let y = model.generate_replicate(rep as u64)?;
            let truth = model.true_quantile(tau)?;
            let inc = LatticeIncidence::new(2, side)?;
            let mut engine = crate::engine::Engine::new(None, &inc, solver.algorithm)?;
            let rows = (0..logs.len())
                .map(|k| {
                    let lambda = 10f64.powf(logs[k]);
                    let p = QtvdProblem::new(y.clone(), tau, QtvdMode::Penalized { lambda })?;
                    let out = qtvd_fit_with(&mut engine, &inc, &p, solver).map(|f| {
                        let loss = crate::signal::check_sum(y.values(), &f.solve.theta_hat, tau);
                        (f.solve.theta_hat.into_vec(), loss, 0, f.solve.converged)
                    });
                    row(k, out, truth.values(), cfg.n)
                })
                .collect::<Result<_>>()?;
            Ok(Replicate {
                rows,
                baseline: RiskValue::between(y.values(), truth.values())?,
            })
        }
        Method::L1qr => {
            let model = RegressionScenario::new(cfg.n, cfg.columns(), law, cfg.seed)?;
            let sample = model.generate_replicate(rep as u64)?;
            let truth = model.true_quantile(&sample, tau)?;
            let rows = (0..logs.len())
                .map(|k| {
                    let v = 10f64.powf(logs[k]);
                    let out = L1QrProblem::new(sample.x.clone(), sample.y.clone(), tau, v)
                        .and_then(|p| l1_qr_fit(&p, solver))
                        .map(|f| {
                            let df = f.beta_hat.iter().filter(|b| b.abs() > 1e-8).count();
                            (
                                f.solve.theta_hat.into_vec(),
                                f.solve.objective,
                                df,
                                f.solve.converged,
                            )
                        });
                    row(k, out, &truth, cfg.n)
                })
                .collect::<Result<_>>()?;
            Ok(Replicate {
                rows,
                baseline: RiskValue::between(&sample.y, &truth)?,
            })
        }
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    grid: TuningGrid,
    reps: &[Replicate],
) -> Result<ExperimentSummary> {
    let points = grid.points;
    let mut failed = vec![false; points];
    let mut sum_mse = vec![0.0; points];
    let mut sum_delta = vec![0.0; points];
    let mut nonconverged = 0;
    for rep in reps {
        for row in &rep.rows {
            match row.risk {
                Some(r) => {
                    sum_mse[row.grid_index] += r.mse;
                    sum_delta[row.grid_index] += r.delta_n_sq;
                }
                None => failed[row.grid_index] = true,
            }
            if !row.converged {
                nonconverged += 1;
            }
        }
    }
    let failed_points = failed.iter().filter(|f| **f).count();
    let argmin = |sums: &[f64]| {
        (0..points)
            .filter(|&k| !failed[k] && sums[k].is_finite())
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if sums[b] <= sums[k] => Some(b),
                _ => Some(k),
            })
    };
    let selections: Vec<Selection> = match cfg.tuning {
        Tuning::OracleGrid | Tuning::Fixed => {
            let (im, id) = match (argmin(&sum_mse), argmin(&sum_delta)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::invalid("every grid point failed")),
            };
            reps.iter()
                .enumerate()
                .map(|(k, rep)| select(k, rep, im, id))
                .collect()
        }
        Tuning::Bic => reps
            .iter()
            .enumerate()
            .map(|(k, rep)| {
                let i = argmin_bic(rep.rows.iter().map(|r| r.bic)).ok_or_else(|| {
                    Error::invalid(format!("every grid point failed in replicate {k}"))
                })?;
                Ok(select(k, rep, i, i))
            })
            .collect::<Result<_>>()?,
    };
    let mse = Aggregate::of(&selections.iter().map(|s| s.mse).collect::<Vec<_>>());
    let delta = Aggregate::of(&selections.iter().map(|s| s.delta_n_sq).collect::<Vec<_>>());
    Ok(ExperimentSummary {
        config: cfg.clone(),
        grid,
        mse,
        delta_n_sq: delta,
        avg_mse_x10: 10.0 * mse.mean,
        avg_delta_x10: 10.0 * delta.mean,
        baseline_mse: Aggregate::of(&reps.iter().map(|r| r.baseline.mse).collect::<Vec<_>>()),
        baseline_delta_n_sq: Aggregate::of(
            &reps
                .iter()
                .map(|r| r.baseline.delta_n_sq)
                .collect::<Vec<_>>(),
        ),
        selections,
        failed_points,
        nonconverged_fits: nonconverged,
        bic_formula: BIC_FORMULA.to_string(),
    })
}

fn select(replicate: usize, rep: &Replicate, index_mse: usize, index_delta: usize) -> Selection {
    let at = |k: usize| rep.rows[k].risk.expect("selected point did not fail");
    Selection {
        replicate,
        index_mse,
        param_mse: rep.rows[index_mse].param,
        mse: at(index_mse).mse,
        index_delta,
        param_delta: rep.rows[index_delta].param,
        delta_n_sq: at(index_delta).delta_n_sq,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "nan".to_string())
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "replicate,grid_index,log10_param,param,mse,delta_n_sq,check_loss,df,bic,converged,failed"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.replicate,
                r.grid_index,
                fmt_f64(r.log10_param),
                fmt_f64(r.param),
                opt(r.risk.map(|v| v.mse)),
                opt(r.risk.map(|v| v.delta_n_sq)),
                opt(r.check_loss),
                r.df.map(|d| d.to_string()).unwrap_or_default(),
                opt(r.bic),
                u8::from(r.converged),
                u8::from(r.risk.is_none()),
            )?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let stem = self.summary.config.file_stem();
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(&csv, buf)?;
        std::fs::write(&json, to_json_string(&self.summary)?)?;
        Ok((csv, json))
    }
}
