use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use quantile_tf::lattice::{qtvd_fit, LatticeSignal, QtvdMode, QtvdProblem};
use quantile_tf::oracle::{cqtf_oracle, pqtf_oracle};
use quantile_tf::qtf::{cqtf_fit, pqtf_fit, CqtfProblem, PqtfProblem, TrendFilter};
use quantile_tf::report::{fmt_f64, to_json_string};
use quantile_tf::sim::{
    bic_select, rate_slope, run_experiment_with_progress, run_rate_study_with_progress,
    ExperimentConfig, RateConfig, Tuning, TuningGrid,
};
use quantile_tf::{check_objective, Algorithm, DiffOrder, QuantileLevel, Signal, SolverConfig};

use crate::args::{
    AlgorithmArg, DenoiseArgs, ExperimentArgs, FitArgs, GridArgs, OracleArgs, RateArgs,
    SimulateArgs, SolverArgs, TruthArg, TuneArgs,
};
use crate::error::{CliError, CliResult};

/// Outcome of a command that ran to the end.
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    fn from_flag(converged: bool) -> Self {
        if converged {
            Outcome::Converged
        } else {
            Outcome::NotConverged
        }
    }
}

pub struct Context {
    pub quiet: bool,
}

impl Context {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn read_signal(path: &Path) -> CliResult<Signal> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Signal::read_text(BufReader::new(f))?)
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let f = File::open(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_reader(BufReader::new(f))
                .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn apply_solver(cfg: &mut SolverConfig, args: &SolverArgs) {
    if let Some(a) = args.algorithm {
        cfg.algorithm = match a {
            AlgorithmArg::Ipm => Algorithm::InteriorPoint,
            AlgorithmArg::Admm => Algorithm::Admm,
        };
    }
    if let Some(e) = args.eps {
        cfg.eps_abs = e;
    }
    if let Some(m) = args.max_iters {
        cfg.max_iters = m;
    }
}

fn apply_grid(base: TuningGrid, args: &GridArgs) -> TuningGrid {
    TuningGrid {
        lo: args.grid_lo.unwrap_or(base.lo),
        hi: args.grid_hi.unwrap_or(base.hi),
        points: args.grid_points.unwrap_or(base.points),
    }
}

fn has_grid_flags(args: &GridArgs) -> bool {
    args.grid_lo.is_some() || args.grid_hi.is_some() || args.grid_points.is_some()
}

/// Resolved settings of `fit` and `denoise2d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub tau: f64,
    pub order: usize,
    pub lambda: Option<f64>,
    pub budget: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tau: 0.5,
            order: 1,
            lambda: None,
            budget: None,
            solver: SolverConfig::default(),
        }
    }
}

fn resolve_fit(
    config: Option<&Path>,
    tau: Option<f64>,
    order: Option<usize>,
    lambda: Option<f64>,
    budget: Option<f64>,
    solver: &SolverArgs,
) -> CliResult<FitConfig> {
    let mut cfg: FitConfig = read_config(config)?;
    if let Some(t) = tau {
        cfg.tau = t;
    }
    if let Some(r) = order {
        cfg.order = r;
    }
    // a flag for one mode replaces the other mode from the config file
    if lambda.is_some() {
        cfg.lambda = lambda;
        cfg.budget = None;
    }
    if budget.is_some() {
        cfg.budget = budget;
        cfg.lambda = None;
    }
    apply_solver(&mut cfg.solver, solver);
    if cfg.lambda.is_some() == cfg.budget.is_some() {
        return Err(CliError::Usage(
            "exactly one of --lambda and --budget is required".into(),
        ));
    }
    cfg.solver.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    config: &'a FitConfig,
    fit: T,
}

pub fn fit(ctx: &Context, args: &FitArgs) -> CliResult<Outcome> {
    let cfg = resolve_fit(
        args.config.as_deref(),
        args.tau,
        args.order,
        args.lambda,
        args.budget,
        &args.solver,
    )?;
    let y = read_signal(&args.input)?;
    let tau = QuantileLevel::new(cfg.tau)?;
    let r = DiffOrder::new(cfg.order)?;
    ctx.progress(&format!(
        "fitting n = {}, tau = {}, r = {}",
        y.len(),
        cfg.tau,
        cfg.order
    ));
    let fit = match (cfg.lambda, cfg.budget) {
        (Some(lambda), _) => pqtf_fit(&PqtfProblem::new(y, tau, r, lambda)?, &cfg.solver)?,
        (_, Some(v)) => cqtf_fit(&CqtfProblem::new(y, tau, r, v)?, &cfg.solver)?,
        _ => unreachable!("validated above"),
    };
    let json = to_json_string(&Output {
        config: &cfg,
        fit: &fit,
    })?;
    write_output(args.out.as_deref(), json.as_bytes())?;
    Ok(Outcome::from_flag(fit.solve.converged))
}

pub fn denoise2d(ctx: &Context, args: &DenoiseArgs) -> CliResult<Outcome> {
    let cfg = resolve_fit(
        args.config.as_deref(),
        args.tau,
        None,
        args.lambda,
        args.budget,
        &args.solver,
    )?;
    let f = File::open(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    let y = LatticeSignal::read(BufReader::new(f))?;
    let mode = match (cfg.lambda, cfg.budget) {
        (Some(lambda), _) => QtvdMode::Penalized { lambda },
        (_, Some(budget)) => QtvdMode::Constrained { budget },
        _ => unreachable!("validated above"),
    };
    ctx.progress(&format!("denoising lattice of shape {:?}", y.shape()));
    let fit = qtvd_fit(
        &QtvdProblem::new(y, QuantileLevel::new(cfg.tau)?, mode)?,
        &cfg.solver,
    )?;
    let mut buf = Vec::new();
    let param = match mode {
        QtvdMode::Penalized { lambda } => format!("lambda={}", fmt_f64(lambda)),
        QtvdMode::Constrained { budget } => format!("budget={}", fmt_f64(budget)),
    };
    writeln!(
        buf,
        "# qtf denoise2d tau={} {param} algorithm={} objective={} tv={} iterations={} converged={}",
        fmt_f64(cfg.tau),
        serde_json::to_value(cfg.solver.algorithm)?
            .as_str()
            .unwrap_or_default(),
        fmt_f64(fit.solve.objective),
        fmt_f64(fit.tv),
        fit.solve.iterations,
        fit.solve.converged,
    )
    .expect("writing to memory");
    fit.to_lattice()?.write(&mut buf)?;
    write_output(args.out.as_deref(), &buf)?;
    Ok(Outcome::from_flag(fit.solve.converged))
}

fn apply_experiment(cfg: &mut ExperimentConfig, args: &ExperimentArgs) -> CliResult<()> {
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    if let Some(t) = args.tau {
        cfg.tau = t;
    }
    if let Some(m) = &args.method {
        cfg.method = m.parse()?;
    }
    if let Some(r) = args.order {
        cfg.r = Some(r);
    }
    if let Some(t) = &args.tuning {
        cfg.tuning = t.parse()?;
    }
    if let Some(v) = args.value {
        cfg.value = Some(v);
        if args.tuning.is_none() {
            cfg.tuning = Tuning::Fixed;
        }
    }
    if let Some(k) = args.replicates {
        cfg.replicates = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.columns {
        cfg.p = Some(p);
    }
    if has_grid_flags(&args.grid) {
        let base = cfg.grid.unwrap_or_else(|| cfg.method.default_grid());
        cfg.grid = Some(apply_grid(base, &args.grid));
    }
    apply_solver(&mut cfg.solver, &args.solver);
    Ok(())
}

fn experiment_outcome(nonconverged: usize, failed: usize) -> Outcome {
    Outcome::from_flag(nonconverged == 0 && failed == 0)
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> CliResult<Outcome> {
    let mut cfg: ExperimentConfig = read_config(args.config.as_deref())?;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    apply_experiment(&mut cfg, &args.experiment)?;
    cfg.validate()?;
    if !args.out.is_dir() {
        return Err(CliError::Usage(format!(
            "output directory {} does not exist",
            args.out.display()
        )));
    }
    ctx.progress(&format!(
        "simulating scenario {} with {} (n = {}, {} replicates)",
        cfg.scenario, cfg.method, cfg.n, cfg.replicates
    ));
    let total = cfg.replicates;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let quiet = ctx.quiet;
    let report = run_experiment_with_progress(&cfg, &|_| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if !quiet {
            eprintln!("replicate {k}/{total} done");
        }
    })?;
    let (csv, json) = report.write_files(&args.out)?;
    let s = &report.summary;
    ctx.progress(&format!(
        "avg mse x10 = {}, avg delta x10 = {} in {:.2} s; wrote {} and {}",
        fmt_f64(s.avg_mse_x10),
        fmt_f64(s.avg_delta_x10),
        report.runtime.as_secs_f64(),
        csv.display(),
        json.display()
    ));
    Ok(experiment_outcome(s.nonconverged_fits, s.failed_points))
}

pub fn rate(ctx: &Context, args: &RateArgs) -> CliResult<Outcome> {
    let mut cfg: RateConfig = read_config(args.config.as_deref())?;
    if let Some(s) = &args.sizes {
        cfg.sizes = s.clone();
    }
    if args.self_test {
        let risks: Vec<f64> = cfg
            .sizes
            .iter()
            .map(|&n| 0.5 * (n as f64).powf(-2.0 / 3.0))
            .collect();
        let fit = rate_slope(&cfg.sizes, &risks)?;
        #[derive(Serialize)]
        struct SelfTest<'a> {
            sizes: &'a [usize],
            risks: Vec<f64>,
            fit: quantile_tf::sim::RateFit,
        }
        let json = to_json_string(&SelfTest {
            sizes: &cfg.sizes,
            risks,
            fit,
        })?;
        write_output(args.out.as_deref(), json.as_bytes())?;
        return Ok(Outcome::Converged);
    }
    match args.truth {
        Some(TruthArg::Sinusoid) => cfg.experiment.scenario = 5,
        Some(TruthArg::Steps) => cfg.experiment.scenario = 1,
        None => {}
    }
    apply_experiment(&mut cfg.experiment, &args.experiment)?;
    for &n in &cfg.sizes {
        ExperimentConfig {
            n,
            ..cfg.experiment.clone()
        }
        .validate()?;
    }
    let report = run_rate_study_with_progress(&cfg, &|n| ctx.progress(&format!("size {n} done")))?;
    #[derive(Serialize)]
    struct RateOutput<'a> {
        config: &'a RateConfig,
        report: &'a quantile_tf::sim::RateReport,
    }
    let json = to_json_string(&RateOutput {
        config: &cfg,
        report: &report,
    })?;
    write_output(args.out.as_deref(), json.as_bytes())?;
    ctx.progress(&format!(
        "slope {} (std error {})",
        fmt_f64(report.fit.slope),
        fmt_f64(report.fit.slope_std_error)
    ));
    let nonconverged = report.summaries.iter().map(|s| s.nonconverged_fits).sum();
    let failed = report.summaries.iter().map(|s| s.failed_points).sum();
    Ok(experiment_outcome(nonconverged, failed))
}

pub fn oracle(ctx: &Context, args: &OracleArgs) -> CliResult<Outcome> {
    let y = read_signal(&args.input)?;
    let tau = QuantileLevel::new(args.tau)?;
    let r = DiffOrder::new(args.order)?;
    let cfg = SolverConfig::precise();
    ctx.progress(&format!(
        "solving the exact linear program for n = {}",
        y.len()
    ));
    let (optimum, theta, fit, penalty) = match (args.lambda, args.budget) {
        (Some(lambda), _) => {
            let p = PqtfProblem::new(y.clone(), tau, r, lambda)?;
            let (opt, theta) = pqtf_oracle(&p)?;
            (opt, theta, pqtf_fit(&p, &cfg)?, lambda)
        }
        (_, Some(v)) => {
            let p = CqtfProblem::new(y.clone(), tau, r, v)?;
            let (opt, theta) = cqtf_oracle(&p)?;
            (opt, theta, cqtf_fit(&p, &cfg)?, 0.0)
        }
        _ => {
            return Err(CliError::Usage(
                "one of --lambda and --budget is required".into(),
            ))
        }
    };
    #[derive(Serialize)]
    struct OracleOutput {
        tau: f64,
        order: usize,
        lambda: Option<f64>,
        budget: Option<f64>,
        optimum: f64,
        theta: Vec<f64>,
        solver_objective: f64,
        solver_theta: Vec<f64>,
        objective_gap: f64,
    }
    let solver_objective = check_objective(&y, fit.theta(), tau)? + penalty * fit.tv;
    let out = OracleOutput {
        tau: args.tau,
        order: args.order,
        lambda: args.lambda,
        budget: args.budget,
        optimum,
        theta,
        solver_objective,
        solver_theta: fit.theta().to_vec(),
        objective_gap: (solver_objective - optimum).abs(),
    };
    write_output(args.out.as_deref(), to_json_string(&out)?.as_bytes())?;
    Ok(Outcome::Converged)
}

pub fn tune(ctx: &Context, args: &TuneArgs) -> CliResult<Outcome> {
    let y = read_signal(&args.input)?;
    let tau = QuantileLevel::new(args.tau)?;
    let r = DiffOrder::new(args.order)?;
    let mut solver = SolverConfig::default();
    apply_solver(&mut solver, &args.solver);
    solver.validate()?;
    let grid = apply_grid(TuningGrid::default(), &args.grid);
    ctx.progress(&format!("bic search over {} grid points", grid.points));
    let selection = bic_select(&y, tau, r, &grid, &solver)?;
    let tf = TrendFilter::new(y.len(), r)?;
    let mut engine = tf.engine(&solver)?;
    let fit = tf.fit_penalized(&mut engine, &y, tau, selection.lambda_eff, &solver)?;
    #[derive(Serialize)]
    struct TuneOutput<'a> {
        tau: f64,
        order: usize,
        grid: TuningGrid,
        solver: SolverConfig,
        bic_formula: &'static str,
        selection: &'a quantile_tf::sim::BicSelection,
        fit: &'a quantile_tf::qtf::TrendFit,
    }
    let out = TuneOutput {
        tau: args.tau,
        order: args.order,
        grid,
        solver,
        bic_formula: quantile_tf::sim::BIC_FORMULA,
        selection: &selection,
        fit: &fit,
    };
    write_output(args.out.as_deref(), to_json_string(&out)?.as_bytes())?;
    Ok(Outcome::from_flag(fit.solve.converged))
}
