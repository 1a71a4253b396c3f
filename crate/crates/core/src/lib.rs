//! m-sparse Sharpe-ratio maximization.
//!
//! Selecting at most m of N assets, long-only and fully invested, to
//! maximize the sample Sharpe ratio is equivalent to the sparse quadratic
//! program min { 1/2 v'Q_eps v - p'v : v >= 0, ||v||_0 <= m }, which a
//! proximal gradient iteration with a closed-form hard-thresholding prox
//! solves to a certified local or global optimum. The crate bundles:
//!
//! - [`moments`]: sample moments and the quadratic model,
//! - [`prox`]: the exact prox of the m-sparse nonnegative indicator,
//! - [`solver`]: the PGA iteration, stopping rules and optimality
//!   certificates,
//! - [`oracle`]: an exhaustive global solver for small instances and the
//!   simulation harness that measures PGA's global-optimality rate,
//! - [`backtest`]: a moving-window trading simulation with Sharpe,
//!   wealth, transaction-cost and sparsity metrics,
//! - [`data_io`]: CSV ingestion and JSON/CSV report serialization.

pub mod backtest;
pub mod data_io;
pub mod error;
mod linalg;
pub mod moments;
pub mod oracle;
pub mod prox;
pub mod solver;

pub use backtest::{
    cumulative_wealth, evolve_weights, run_backtest, sparsity_stats, wealth_with_costs,
    BacktestConfig, BacktestResult, CertificateTally,
};
pub use data_io::{LoadOptions, MissingPolicy, RiskFree, Unit};
pub use error::{Error, Result};
pub use moments::{compute_moments, sample_sharpe, MomentModel, ReturnsMatrix};
pub use oracle::{
    gen_random_instance, run_simulation, solve_global_exhaustive, solve_nnqp_on_support,
    SimConfig, SimReport, StepRule,
};
pub use prox::{prox_m_sparse_nonneg, SparsityBudget};
pub use solver::{
    certify_global, check_eper, check_fixed_point, normalize_to_portfolio, scale_to_subtraction,
    solve, Certificate, CertificateKind, Init, SolveResult, SolverConfig, SparsePortfolio,
};
