//! Empirical convergence rates: the slope of log risk against log n.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::experiment::{run_experiment, ExperimentConfig, ExperimentSummary};
use crate::sim::tuning::TuningGrid;

pub const MIN_RATE_SIZES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// All risks equal, so the slope carries no information.
    pub degenerate: bool,
}

/// Least squares fit of `log(risk)` on `log(n)`.
pub fn rate_slope(sizes: &[usize], risks: &[f64]) -> Result<RateFit> {
    if sizes.len() != risks.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len(),
            actual: risks.len(),
        });
    }
    if sizes.len() < MIN_RATE_SIZES {
        return Err(Error::invalid(format!(
            "need at least {MIN_RATE_SIZES} sizes"
        )));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::invalid(
            "sizes must be positive and strictly increasing",
        ));
    }
    if let Some(r) = risks.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::invalid(format!(
            "risks must be positive and finite, got {r}"
        )));
    }
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = risks.iter().map(|r| r.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_std_error = (ssr / (k - 2.0) / sxx).sqrt();
    let degenerate = risks.iter().all(|r| *r == risks[0]);
    Ok(RateFit {
        slope,
        intercept,
        slope_std_error,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    /// Experiment run at every size; its `n` is ignored.
    pub experiment: ExperimentConfig,
    pub sizes: Vec<usize>,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            experiment: ExperimentConfig {
                scenario: 5,
                // wide enough to hold the oracle penalty from n = 256 up
                grid: Some(TuningGrid {
                    lo: -1.0,
                    hi: 3.0,
                    points: 81,
                }),
                replicates: 30,
                ..ExperimentConfig::default()
            },
            sizes: vec![256, 512, 1024, 2048, 4096],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub sizes: Vec<usize>,
    /// Tuned average `Delta_n^2` at each size.
    pub risks: Vec<f64>,
    pub fit: RateFit,
    pub summaries: Vec<ExperimentSummary>,
}

/// Runs the experiment at every size and fits the slope of the tuned average
/// `Delta_n^2`.
pub fn run_rate_study(cfg: &RateConfig) -> Result<RateReport> {
    run_rate_study_with_progress(cfg, &|_| {})
}

/// As [`run_rate_study`], calling `progress` with each finished size.
pub fn run_rate_study_with_progress(
    cfg: &RateConfig,
    progress: &dyn Fn(usize),
) -> Result<RateReport> {
    if cfg.sizes.len() < MIN_RATE_SIZES {
        return Err(Error::invalid(format!(
            "need at least {MIN_RATE_SIZES} sizes"
        )));
    }
    let mut summaries = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let exp = ExperimentConfig {
            n,
            ..cfg.experiment.clone()
        };
        summaries.push(run_experiment(&exp)?.summary);
        progress(n);
    }
    let risks: Vec<f64> = summaries.iter().map(|s| s.delta_n_sq.mean).collect();
    let fit = rate_slope(&cfg.sizes, &risks)?;
    Ok(RateReport {
        sizes: cfg.sizes.clone(),
        risks,
        fit,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let sizes = [256, 512, 1024, 2048, 4096];
        let risks: Vec<f64> = sizes
            .iter()
            .map(|&n| 3.0 * (n as f64).powf(-2.0 / 3.0))
            .collect();
        let fit = rate_slope(&sizes, &risks).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.slope_std_error < 1e-12);
        assert!(!fit.degenerate);
    }

    #[test]
    fn flat_risks_are_flagged() {
        let fit = rate_slope(&[10, 20, 30, 40], &[0.5; 4]).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(rate_slope(&[10, 20, 30], &[1.0, 0.5, 0.2]).is_err());
        assert!(rate_slope(&[10, 30, 20, 40], &[1.0; 4]).is_err());
        assert!(rate_slope(&[10, 20, 30, 40], &[1.0, 0.0, 1.0, 1.0]).is_err());
    }
}
