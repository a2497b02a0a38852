//! Quantile total variation denoising on the lattice `{1..m}^d`.
//!
//! TV of an array is `(1 / m^(d-1)) sum_{(u,v) in E} |theta_u - theta_v|`
//! over axis-aligned nearest-neighbour edges. Arrays are stored row-major.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::admm::{Regularizer, SolveResult, SolverConfig};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::linop::LinearOp;
use crate::qtf::blend_to_budget;
use crate::signal::{check_sum, empirical_quantile, QuantileLevel, Signal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSignal {
    dims: usize,
    side: usize,
    values: Vec<f64>,
}

impl LatticeSignal {
    pub fn new(dims: usize, side: usize, values: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("lattice dimension must be at least 1"));
        }
        if side < 2 {
            return Err(Error::invalid(format!(
                "lattice side must be at least 2, got {side}"
            )));
        }
        let n = side
            .checked_pow(dims as u32)
            .ok_or_else(|| Error::invalid("lattice too large"))?;
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(LatticeSignal { dims, side, values })
    }

    /// A square 2-d array from its rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: bad.len(),
            });
        }
        Self::new(2, m, rows.into_iter().flatten().collect())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.side; self.dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.dims, self.side, values)
    }

    /// Reads either an `m x m` CSV (2-d) or the general form: a
    /// `shape: m,...,m` header followed by row-major values, comma or
    /// whitespace separated.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut shape: Option<Vec<usize>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(rest) = t.strip_prefix("shape:") {
                let dims = rest
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parse {
                        line: idx + 1,
                        message: format!("bad shape header {t:?}"),
                    })?;
                shape = Some(dims);
                continue;
            }
            let row = t
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("expected numbers, found {t:?}"),
                })?;
            rows.push(row);
        }
        match shape {
            Some(dims) => {
                let m = *dims
                    .first()
                    .ok_or_else(|| Error::invalid("empty shape header"))?;
                if dims.iter().any(|&s| s != m) {
                    return Err(Error::invalid(
                        "only lattices with equal sides are supported",
                    ));
                }
                Self::new(dims.len(), m, rows.into_iter().flatten().collect())
            }
            None => Self::from_rows(rows),
        }
    }

    /// Writes the CSV grid for `d = 2`, otherwise the `shape:` form.
    pub fn write<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let fmt = crate::report::fmt_f64;
        if self.dims == 2 {
            for row in self.values.chunks(self.side) {
                let cells: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        } else {
            let shape: Vec<String> = self.shape().iter().map(|s| s.to_string()).collect();
            writeln!(out, "shape: {}", shape.join(","))?;
            for v in &self.values {
                writeln!(out, "{}", fmt(*v))?;
            }
        }
        Ok(())
    }
}

/// Edge-incidence operator of the lattice scaled by `1 / m^(d-1)`. Edges
/// are ordered by axis, then by the row-major index of their lower node.
#[derive(Clone, Debug)]
pub struct LatticeIncidence {
    n: usize,
    max_stride: usize,
    scale: f64,
    edges: Vec<(usize, usize)>,
}

impl LatticeIncidence {
    pub fn new(dims: usize, side: usize) -> Result<Self> {
        if dims == 0 || side < 2 {
            return Err(Error::invalid("lattice needs d >= 1 and m >= 2"));
        }
        let n = side.pow(dims as u32);
        let mut edges = Vec::with_capacity(dims * (side - 1) * side.pow(dims as u32 - 1));
        for axis in 0..dims {
            let stride = side.pow((dims - 1 - axis) as u32);
            for u in 0..n {
                if (u / stride) % side + 1 < side {
                    edges.push((u, u + stride));
                }
            }
        }
        Ok(LatticeIncidence {
            n,
            max_stride: side.pow(dims as u32 - 1),
            scale: 1.0 / side.pow(dims as u32 - 1) as f64,
            edges,
        })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

impl LinearOp for LatticeIncidence {
    fn rows(&self) -> usize {
        self.edges.len()
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, &(u, v)) in out.iter_mut().zip(&self.edges) {
            *o = self.scale * (x[v] - x[u]);
        }
    }

    fn apply_adjoint(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&we, &(u, v)) in w.iter().zip(&self.edges) {
            out[u] -= self.scale * we;
            out[v] += self.scale * we;
        }
    }

    fn band_width(&self) -> Option<usize> {
        Some(self.max_stride)
    }
}

/// `(1 / m^(d-1)) sum_{(u,v) in E} |theta_u - theta_v|`.
pub fn lattice_tv(theta: &LatticeSignal) -> f64 {
    let inc = LatticeIncidence::new(theta.dims, theta.side).expect("validated at construction");
    tv_with(&inc, &theta.values)
}

fn tv_with(inc: &LatticeIncidence, values: &[f64]) -> f64 {
    inc.edges
        .iter()
        .fold(0.0, |acc, &(u, v)| acc + (values[v] - values[u]).abs())
        * inc.scale
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QtvdMode {
    Penalized { lambda: f64 },
    Constrained { budget: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QtvdProblem {
    pub y: LatticeSignal,
    pub tau: QuantileLevel,
    pub mode: QtvdMode,
}

impl QtvdProblem {
    pub fn new(y: LatticeSignal, tau: QuantileLevel, mode: QtvdMode) -> Result<Self> {
        let v = match mode {
            QtvdMode::Penalized { lambda } => lambda,
            QtvdMode::Constrained { budget } => budget,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(
                "lambda/budget must be finite and nonnegative",
            ));
        }
        Ok(QtvdProblem { y, tau, mode })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeFit {
    #[serde(flatten)]
    pub solve: SolveResult,
    pub shape: Vec<usize>,
    pub tv: f64,
}

impl LatticeFit {
    pub fn to_lattice(&self) -> Result<LatticeSignal> {
        LatticeSignal::new(
            self.shape.len(),
            self.shape[0],
            self.solve.theta_hat.to_vec(),
        )
    }
}

/// Quantile TV denoising in penalized or constrained form.
pub fn qtvd_fit(p: &QtvdProblem, cfg: &SolverConfig) -> Result<LatticeFit> {
    let inc = LatticeIncidence::new(p.y.dims, p.y.side)?;
    let mut engine = Engine::new(None, &inc, cfg.algorithm)?;
    qtvd_fit_with(&mut engine, &inc, p, cfg)
}

/// As [`qtvd_fit`], reusing an engine built on `inc`.
pub fn qtvd_fit_with(
    engine: &mut Engine<'_>,
    inc: &LatticeIncidence,
    p: &QtvdProblem,
    cfg: &SolverConfig,
) -> Result<LatticeFit> {
    let y = p.y.values();
    if inc.cols() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: inc.cols(),
            actual: y.len(),
        });
    }
    let solve = match p.mode {
        QtvdMode::Penalized { lambda } => {
            engine.solve(y, p.tau, Regularizer::Penalty(lambda), cfg)?
        }
        QtvdMode::Constrained { budget } => {
            if tv_with(inc, y) <= budget {
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
                let c = empirical_quantile(y, p.tau);
                SolveResult {
                    objective: check_sum(y, &vec![c; y.len()], p.tau),
                    theta_hat: Signal::new(vec![c; y.len()])?,
                    iterations: 0,
                    primal_residual: 0.0,
                    dual_residual: 0.0,
                    converged: true,
                    rho: None,
                }
            } else {
                let mut solve = engine.solve(y, p.tau, Regularizer::Budget(budget), cfg)?;
                let mut theta = solve.theta_hat.clone().into_vec();
                blend_to_budget(&mut theta, budget, empirical_quantile(y, p.tau), |t| {
                    Ok(tv_with(inc, t))
                })?;
                solve.objective = check_sum(y, &theta, p.tau);
                solve.theta_hat = Signal::new(theta)?;
                solve
            }
        }
    };
    let tv = tv_with(inc, &solve.theta_hat);
    Ok(LatticeFit {
        solve,
        shape: p.y.shape(),
        tv,
    })
}
