//! Data generating models: the six sequence scenarios, a piecewise-constant
//! lattice model and a sparse linear quantile model.
//!
//! Every model has the form `y_i = m_i + s_i e_i` with `e_i` drawn from an
//! [`ErrorLaw`], so the true `tau`-quantile is `m_i + s_i q(tau)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::DesignMatrix;
use crate::lattice::LatticeSignal;
use crate::signal::{QuantileLevel, Signal};
use crate::sim::sampler::{replicate_rng, ErrorLaw};

pub const MIN_SCENARIO_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    pub n: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(id: u8, n: usize, seed: u64) -> Result<Self> {
        if !(1..=6).contains(&id) {
            return Err(Error::invalid(format!("scenario must be 1 to 6, got {id}")));
        }
        if n < MIN_SCENARIO_LEN {
            return Err(Error::invalid(format!(
                "scenario length must be at least {MIN_SCENARIO_LEN}, got {n}"
            )));
        }
        Ok(ScenarioSpec { id, n, seed })
    }

    pub fn error_law(&self) -> ErrorLaw {
        scenario_law(self.id)
    }

    fn location_scale(&self) -> (Vec<f64>, Vec<f64>) {
        location_scale(self.id, self.n)
    }

    /// `theta*(tau)`.
    pub fn true_quantile(&self, tau: QuantileLevel) -> Result<Signal> {
        scenario_truth(self.id, self.n, tau)
    }

    /// The first replicate's data.
    pub fn generate(&self) -> Result<Signal> {
        self.generate_replicate(0)
    }

    pub fn generate_replicate(&self, replicate: u64) -> Result<Signal> {
        self.generate_with_amplitude(replicate, 1.0)
    }

    /// Data with the noise multiplied by `amplitude`; zero gives the median
    /// curve itself.
    pub fn generate_with_amplitude(&self, replicate: u64, amplitude: f64) -> Result<Signal> {
        let mut rng = replicate_rng(self.seed, replicate);
        let law = self.error_law();
        let (loc, scale) = self.location_scale();
        let y = loc
            .iter()
            .zip(&scale)
            .map(|(m, s)| m + amplitude * s * law.sample(&mut rng))
            .collect();
        Signal::new(y)
    }
}

/// Location `m_i` (the median curve) and noise scale `s_i`.
fn location_scale(id: u8, n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let third = n / 3;
    let half = n / 2;
    let mut loc = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    for i in 1..=n {
        let x = i as f64 / nf;
        let step = if i <= third || i > n - third {
            1.0
        } else {
            0.0
        };
        let (m, s) = match id {
            1 | 2 => (step, 1.0),
            3 => (step, x.sqrt()),
            4 => (if i <= half { 3.0 * x } else { 3.0 * (1.0 - x) }, 1.0),
            5 => ((6.0 * std::f64::consts::PI * x).cos(), 1.0),
            _ => {
                // linear pieces meeting at x = 1/2, so the quantile curves are continuous
                let s = if i <= half {
                    (0.25 * x + 1.375) / 3.0
                } else {
                    (7.0 * x - 2.0) / 3.0
                };
                (0.0, s)
            }
        };
        loc.push(m);
        scale.push(s);
    }
    (loc, scale)
}

/// `theta*(tau)` of scenario `id` at any length, including lengths too short
/// for an experiment.
pub fn scenario_truth(id: u8, n: usize, tau: QuantileLevel) -> Result<Signal> {
    if !(1..=6).contains(&id) {
        return Err(Error::invalid(format!("scenario must be 1 to 6, got {id}")));
    }
    let q = scenario_law(id).quantile(tau.value())?;
    let (loc, scale) = location_scale(id, n);
    Signal::new(loc.iter().zip(&scale).map(|(m, s)| m + s * q).collect())
}

/// Error law of a scenario, used homoscedastically by the lattice and
/// regression models.
pub fn scenario_law(id: u8) -> ErrorLaw {
    match id {
        1 => ErrorLaw::Normal,
        2 | 5 => ErrorLaw::Cauchy,
        4 => ErrorLaw::T3,
        _ => ErrorLaw::T2,
    }
}

/// Two-dimensional `side x side` lattice whose median is one on the central
/// square `[side/4, 3 side/4)^2` and zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeScenario {
    pub side: usize,
    pub law: ErrorLaw,
    pub seed: u64,
}

impl LatticeScenario {
    pub fn new(side: usize, law: ErrorLaw, seed: u64) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid("lattice side must be at least 2"));
        }
        Ok(LatticeScenario { side, law, seed })
    }

    fn block(&self) -> Vec<f64> {
        let m = self.side;
        let inside = |k: usize| 4 * k >= m && 4 * k < 3 * m;
        let mut v = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                v.push(if inside(a) && inside(b) { 1.0 } else { 0.0 });
            }
        }
        v
    }

    pub fn true_quantile(&self, tau: QuantileLevel) -> Result<LatticeSignal> {
        let q = self.law.quantile(tau.value())?;
        LatticeSignal::new(
            2,
            self.side,
            self.block().into_iter().map(|m| m + q).collect(),
        )
    }

    pub fn generate_replicate(&self, replicate: u64) -> Result<LatticeSignal> {
        let mut rng = replicate_rng(self.seed, replicate);
        let y = self
            .block()
            .into_iter()
            .map(|m| m + self.law.sample(&mut rng))
            .collect();
        LatticeSignal::new(2, self.side, y)
    }
}

/// `y = X beta* + e` with an intercept column and standard normal covariates.
/// `beta*` is `(0, 1, -1, 0.5, 0, ..., 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionScenario {
    pub n: usize,
    pub p: usize,
    pub law: ErrorLaw,
    pub seed: u64,
}

/// One draw of the regression model. `median` is `X beta*`.
#[derive(Clone, Debug)]
pub struct RegressionSample {
    pub x: DesignMatrix,
    pub y: Signal,
    pub median: Vec<f64>,
}

impl RegressionScenario {
    pub fn new(n: usize, p: usize, law: ErrorLaw, seed: u64) -> Result<Self> {
        if p < 4 {
            return Err(Error::invalid("regression model needs at least 4 columns"));
        }
        if n < 2 {
            return Err(Error::invalid("regression model needs at least 2 rows"));
        }
        Ok(RegressionScenario { n, p, law, seed })
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        beta[1] = 1.0;
        beta[2] = -1.0;
        beta[3] = 0.5;
        beta
    }

    pub fn generate_replicate(&self, replicate: u64) -> Result<RegressionSample> {
        let mut rng = replicate_rng(self.seed, replicate);
        let beta = self.coefficients();
        let mut data = Vec::with_capacity(self.n * self.p);
        let mut median = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let row: Vec<f64> = std::iter::once(1.0)
                .chain((1..self.p).map(|_| ErrorLaw::Normal.sample(&mut rng)))
                .collect();
            median.push(row.iter().zip(&beta).map(|(a, b)| a * b).sum());
            data.extend(row);
        }
        let y = median
            .iter()
            .map(|m| m + self.law.sample(&mut rng))
            .collect();
        Ok(RegressionSample {
            x: DesignMatrix::new(self.n, self.p, data)?,
            y: Signal::new(y)?,
            median,
        })
    }

    /// True `tau`-quantiles of one sample.
    pub fn true_quantile(&self, sample: &RegressionSample, tau: QuantileLevel) -> Result<Signal> {
        let q = self.law.quantile(tau.value())?;
        Signal::new(sample.median.iter().map(|m| m + q).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_one_and_five_medians() {
        let t = scenario_truth(1, 6, QuantileLevel::MEDIAN).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let t = scenario_truth(5, 6, QuantileLevel::MEDIAN).unwrap();
        for (v, e) in t.iter().zip([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn lengths_below_minimum_rejected() {
        assert!(ScenarioSpec::new(1, 6, 0).is_err());
        assert!(ScenarioSpec::new(1, 10, 0).is_ok());
        assert!(ScenarioSpec::new(0, 100, 0).is_err());
        assert!(ScenarioSpec::new(7, 100, 0).is_err());
    }

    #[test]
    fn scenario_six_median_is_zero() {
        let spec = ScenarioSpec::new(6, 50, 1).unwrap();
        assert!(spec
            .true_quantile(QuantileLevel::MEDIAN)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let hi = spec
            .true_quantile(QuantileLevel::new(0.9).unwrap())
            .unwrap();
        let s1 = (0.25 / 50.0 + 1.375) / 3.0;
        assert!((hi[0] - 1.885_618_083_164_150_7 * s1).abs() < 1e-9);
        // both pieces give scale 0.5 at i = n/2 and i = n/2 + 1 differs by 7/(3n)
        let q = 1.885_618_083_164_150_7;
        assert!((hi[24] - 0.5 * q).abs() < 1e-12);
        assert!((hi[25] - hi[24] - q * 7.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_returns_median() {
        let spec = ScenarioSpec::new(3, 40, 5).unwrap();
        let y = spec.generate_with_amplitude(2, 0.0).unwrap();
        assert_eq!(y, spec.true_quantile(QuantileLevel::MEDIAN).unwrap());
    }

    #[test]
    fn lattice_block_and_regression_shapes() {
        let l = LatticeScenario::new(8, ErrorLaw::Cauchy, 3).unwrap();
        let t = l.true_quantile(QuantileLevel::MEDIAN).unwrap();
        assert_eq!(t.values().iter().sum::<f64>(), 16.0);
        assert_eq!(t.values()[2 * 8 + 2], 1.0);
        let r = RegressionScenario::new(30, 5, ErrorLaw::Normal, 1).unwrap();
        let s = r.generate_replicate(0).unwrap();
        assert_eq!((s.x.rows(), s.x.cols()), (30, 5));
        assert!((0..30).all(|i| s.x.matrix().get(i, 0) == 1.0));
    }
}
