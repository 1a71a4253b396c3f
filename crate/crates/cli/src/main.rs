//! Command-line interface: solve one instance, backtest a return history,
//! cross-check PGA against the exhaustive oracle, or run the simulation
//! study. Results go to stdout (or --output); progress and summaries go to
//! stderr. Exit codes: 0 success, 1 input error, 2 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sparse_sharpe::data_io::{
    self, backtest_csv_string, report_to_json_string, sim_csv_string, solve_csv_string,
    LoadOptions, MissingPolicy, RiskFree, Unit,
};
use sparse_sharpe::oracle::{run_simulation, SimConfig, StepRule};
use sparse_sharpe::{
    check_eper, compute_moments, run_backtest, solve, solve_global_exhaustive, BacktestConfig,
    Certificate, Error, Init, ReturnsMatrix, SolveResult, SolverConfig, SparsityBudget,
};

#[derive(Parser)]
#[command(
    name = "sparse-sharpe",
    about = "m-sparse Sharpe-ratio maximization: solver, oracle, simulation and backtests",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model on the whole input and solve for the portfolio
    Solve(SolveArgs),
    /// Moving-window backtest with Sharpe/wealth/cost/sparsity metrics
    Backtest(BacktestArgs),
    /// Solve by PGA and by exhaustive enumeration, report the gap
    Oracle(OracleArgs),
    /// Run the randomized global-optimality study
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum UnitArg {
    Percent,
    Fraction,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum MissingArg {
    Reject,
    DropRow,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum StepRuleArg {
    A9,
    Default,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum InitArg {
    Mean,
    Zero,
    Uniform,
    Ones,
}

impl From<InitArg> for Init {
    fn from(value: InitArg) -> Self {
        match value {
            InitArg::Mean => Init::MeanVector,
            InitArg::Zero => Init::Zero,
            InitArg::Uniform => Init::Uniform,
            InitArg::Ones => Init::Ones,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Returns CSV (header row required; see README for the FF recipe)
    #[arg(long)]
    input: PathBuf,
    /// Cell unit of the input file
    #[arg(long, value_enum, default_value = "percent")]
    unit: UnitArg,
    /// Risk-free series CSV to subtract (labels must align per period)
    #[arg(long)]
    riskfree: Option<PathBuf>,
    /// Name or index of the date column
    #[arg(long)]
    date_column: Option<String>,
    /// What to do with FF missing-data sentinels (-99.99, -999)
    #[arg(long, value_enum, default_value = "reject")]
    missing_policy: MissingArg,
}

impl InputArgs {
    fn load(&self) -> Result<ReturnsMatrix, Error> {
        let opts = LoadOptions {
            unit: match self.unit {
                UnitArg::Percent => Unit::Percent,
                UnitArg::Fraction => Unit::Fraction,
            },
            riskfree: match &self.riskfree {
                Some(p) => RiskFree::File(p.clone()),
                None => RiskFree::None,
            },
            date_column: self.date_column.clone(),
            missing_policy: match self.missing_policy {
                MissingArg::Reject => MissingPolicy::Reject,
                MissingArg::DropRow => MissingPolicy::DropRow,
            },
        };
        data_io::load_returns_csv(&self.input, &opts)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

impl OutputArgs {
    fn emit(&self, json: impl FnOnce() -> Result<String, Error>, csv: impl FnOnce() -> Result<String, Error>) -> Result<(), Error> {
        let body = match self.format {
            FormatArg::Json => json()?,
            FormatArg::Csv => csv()?,
        };
        match &self.output {
            Some(path) => data_io::write_text(&body, path),
            None => {
                print!("{body}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Maximum number of active assets
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Starting point of the iteration
    #[arg(long, value_enum, default_value = "mean")]
    init: InitArg,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, Error> {
        Ok(SolverConfig::new(SparsityBudget::new(self.m)?)
            .with_eps(self.eps)
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .with_init(self.init.into()))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Moving-window length T
    #[arg(long)]
    window: usize,
    /// Comma-separated proportional cost rates
    #[arg(long, value_delimiter = ',', default_value = "0")]
    cost_rates: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    initial_wealth: f64,
    /// Also write a (cost rate, final wealth) CSV here
    #[arg(long)]
    cost_curve: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trials: usize,
    /// Base seed; required so reruns reproduce byte-identically
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 10)]
    n_assets: usize,
    #[arg(long, default_value_t = 50)]
    n_samples: usize,
    #[arg(long, default_value_t = 500)]
    pga_iters: usize,
    /// Comma-separated starting points
    #[arg(long, value_enum, value_delimiter = ',', default_value = "zero,uniform,ones")]
    inits: Vec<InitArg>,
    #[arg(long, value_enum, default_value = "a9")]
    step_rule: StepRuleArg,
    /// Keep per-trial records in the report
    #[arg(long)]
    records: bool,
    #[command(flatten)]
    output: OutputArgs,
}

/// Oracle-vs-PGA comparison on one instance.
#[derive(Serialize)]
struct OracleReport {
    pga_objective: f64,
    oracle_objective: f64,
    /// f(PGA) - f(oracle); nonnegative up to roundoff.
    gap: f64,
    pga_certificate: Certificate,
    /// Whether a Global certificate (if any) is consistent with the oracle.
    certificate_agrees: bool,
    oracle_support: Vec<usize>,
    pga_result: SolveResult,
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Error> {
    let returns = args.input.load()?;
    let config = args.solver.config()?;
    let model = compute_moments(&returns, config.eps)?;
    let result = solve(&model, &config)?;
    eprintln!(
        "solved {} assets, m = {}: {} iterations, converged = {}, sharpe = {:?}",
        model.n_assets(),
        args.solver.m,
        result.iterations,
        result.converged,
        result.sharpe
    );
    args.output.emit(
        || report_to_json_string(&result),
        || solve_csv_string(&result),
    )
}

fn cmd_backtest(args: &BacktestArgs) -> Result<(), Error> {
    let returns = args.input.load()?;
    let solver = args.solver.config()?;
    let config = BacktestConfig {
        window: args.window,
        solver,
        cost_rates: args.cost_rates.clone(),
        initial_wealth: args.initial_wealth,
    };
    let result = run_backtest(&returns, &config)?;
    eprintln!(
        "backtest over {} periods: test SR = {:?}, CW = {:.4}, sparsity {:.4} +/- {:.4}",
        result.portfolio_returns.len(),
        result.test_sharpe,
        result.cumulative_wealth,
        result.sparsity_mean,
        result.sparsity_std
    );
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.cost_curve {
        data_io::write_cost_curve_csv(&result.wealth_by_cost_rate, path)?;
    }
    args.output.emit(
        || report_to_json_string(&result),
        || backtest_csv_string(&result),
    )
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Error> {
    let returns = args.input.load()?;
    let config = args.solver.config()?;
    let model = compute_moments(&returns, config.eps)?;
    let budget = SparsityBudget::new(args.solver.m)?;
    if args.solver.m > model.n_assets() {
        return Err(Error::InvalidArgument(format!(
            "m = {} exceeds asset count {}",
            args.solver.m,
            model.n_assets()
        )));
    }
    let (v_oracle, f_oracle) = solve_global_exhaustive(&model, budget)?;
    let result = solve(&model, &config)?;
    let f_pga = model.objective(result.v_star.view())?;
    let gap = f_pga - f_oracle;
    let certificate_agrees = if result.certificate.is_global() {
        gap <= 1e-8 * (1.0 + f_oracle.abs())
    } else {
        true
    };
    let report = OracleReport {
        pga_objective: f_pga,
        oracle_objective: f_oracle,
        gap,
        pga_certificate: result.certificate.clone(),
        certificate_agrees,
        oracle_support: (0..v_oracle.len()).filter(|&i| v_oracle[i] > 0.0).collect(),
        pga_result: result,
    };
    eprintln!(
        "oracle objective {f_oracle:.12e}, PGA objective {f_pga:.12e}, gap {gap:.3e}, \
         certificate agrees: {certificate_agrees}, EPER: {}",
        check_eper(&model)
    );
    args.output.emit(
        || report_to_json_string(&report),
        || {
            Err(Error::InvalidArgument(
                "oracle reports are JSON-only; use --format json".into(),
            ))
        },
    )
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let mut config = SimConfig::new(args.trials, args.seed);
    config.m = SparsityBudget::new(args.m)?;
    config.eps = args.eps;
    config.n_assets = args.n_assets;
    config.n_samples = args.n_samples;
    config.pga_iters = args.pga_iters;
    config.inits = args.inits.iter().map(|&i| Init::from(i)).collect();
    config.step_rule = match args.step_rule {
        StepRuleArg::A9 => StepRule::A9,
        StepRuleArg::Default => StepRule::Default,
    };
    config.record_trials = args.records;
    let report = run_simulation(&config)?;
    eprintln!(
        "simulation: {}/{} trials reached the global optimum from every init \
         (fraction {:.4}); per-init successes {:?}",
        report.success_count, report.trials, report.success_fraction, report.per_init_success
    );
    args.output.emit(
        || report_to_json_string(&report),
        || sim_csv_string(&report),
    )
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        // input and configuration problems
        Error::Dimension(_)
        | Error::NonFinite(_)
        | Error::InvalidArgument(_)
        | Error::TooFewObservations { .. }
        | Error::EnumerationBudget { .. }
        | Error::Parse { .. }
        | Error::MissingData { .. }
        | Error::Alignment(_)
        | Error::SchemaVersion(_)
        | Error::Io { .. }
        | Error::Json { .. } => 1,
        // numeric failures
        Error::ZeroVector
        | Error::ZeroVariance
        | Error::NegativeComponent { .. }
        | Error::NonPositiveExpectedReturn(_)
        | Error::NonFiniteIterate { .. }
        | Error::Ruin { .. }
        | Error::NonPositiveWealthFactor { .. } => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code_for(&e))
        }
    }
}
