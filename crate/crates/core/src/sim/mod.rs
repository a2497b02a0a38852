//! Simulation harness: scenario generators, tuning, Monte Carlo experiments
//! and rate studies.

pub mod experiment;
pub mod rate;
pub mod sampler;
pub mod scenario;
pub mod tuning;

pub use experiment::{
    run_experiment, run_experiment_with_progress, Aggregate, ExperimentConfig, ExperimentReport,
    ExperimentSummary, Method, MetricRow, Selection, Tuning,
};
pub use rate::{
    rate_slope, run_rate_study, run_rate_study_with_progress, RateConfig, RateFit, RateReport,
};
pub use sampler::{replicate_rng, ErrorLaw};
pub use scenario::{
    scenario_law, scenario_truth, LatticeScenario, RegressionSample, RegressionScenario,
    ScenarioSpec,
};
pub use tuning::{bic_select, bic_value, BicPoint, BicSelection, TuningGrid, BIC_FORMULA};
