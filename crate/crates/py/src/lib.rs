//! Python bindings: the solver, the prox, the exhaustive oracle, the
//! backtester and the simulation study, over plain lists of floats.
//!
//! ```python
//! import sparse_sharpe_py as ss
//!
//! result = ss.solve(returns, m=3)          # returns: list of rows
//! result.weights, result.sharpe, result.certificate
//!
//! bt = ss.run_backtest(returns, window=60, m=10, cost_rates=[0.0, 0.005])
//! bt.test_sharpe, bt.cumulative_wealth
//! ```

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use sparse_sharpe::data_io::report_to_json_string;
use sparse_sharpe::oracle::{SimConfig, SimReport, StepRule};
use sparse_sharpe::{
    BacktestConfig, BacktestResult, Error, Init, MomentModel, ReturnsMatrix, SolveResult,
    SolverConfig, SparsityBudget,
};

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } | Error::Json { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn returns_matrix(rows: Vec<Vec<f64>>) -> PyResult<ReturnsMatrix> {
    let t = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("return rows have unequal lengths"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((t, n), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    ReturnsMatrix::new(values).map_err(to_py_err)
}

fn parse_init(name: &str) -> PyResult<Init> {
    match name {
        "mean" => Ok(Init::MeanVector),
        "zero" => Ok(Init::Zero),
        "uniform" => Ok(Init::Uniform),
        "ones" => Ok(Init::Ones),
        other => Err(PyValueError::new_err(format!(
            "unknown init {other:?}; expected mean|zero|uniform|ones"
        ))),
    }
}

fn solver_config(m: usize, eps: f64, tol: f64, max_iter: usize, init: &str) -> PyResult<SolverConfig> {
    Ok(SolverConfig::new(SparsityBudget::new(m).map_err(to_py_err)?)
        .with_eps(eps)
        .with_tol(tol)
        .with_max_iter(max_iter)
        .with_init(parse_init(init)?))
}

/// Nearest m-sparse nonnegative vector: keeps the m largest strictly
/// positive entries, zeros the rest.
#[pyfunction]
fn prox_m_sparse_nonneg(v: Vec<f64>, m: usize) -> PyResult<Vec<f64>> {
    let budget = SparsityBudget::new(m).map_err(to_py_err)?;
    let arr = Array1::from(v);
    Ok(sparse_sharpe::prox_m_sparse_nonneg(arr.view(), budget).to_vec())
}

/// Mean over sample standard deviation of a return sequence.
#[pyfunction]
fn sample_sharpe(returns: Vec<f64>) -> PyResult<f64> {
    sparse_sharpe::sample_sharpe(&returns).map_err(to_py_err)
}

/// Solver output.
#[pyclass(name = "SolveResult")]
struct PySolveResult {
    inner: SolveResult,
}

#[pymethods]
impl PySolveResult {
    /// Portfolio weights (nonnegative, unit sum, or all-zero fallback).
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.portfolio.weights().to_vec()
    }

    /// Raw solution of the subtraction-form model.
    #[getter]
    fn v_star(&self) -> Vec<f64> {
        self.inner.v_star.to_vec()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn sharpe(&self) -> Option<f64> {
        self.inner.sharpe
    }

    #[getter]
    fn fixed_point_residual(&self) -> f64 {
        self.inner.fixed_point_residual
    }

    /// One of global_by_cardinality, global_by_gradient, local_only,
    /// zero_portfolio.
    #[getter]
    fn certificate(&self) -> &'static str {
        self.inner.certificate.kind.as_str()
    }

    #[getter]
    fn gradient_margin(&self) -> Option<f64> {
        self.inner.certificate.gradient_margin
    }

    #[getter]
    fn support_size(&self) -> usize {
        self.inner.portfolio.support_size()
    }

    fn to_json(&self) -> PyResult<String> {
        report_to_json_string(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        let sharpe = match self.inner.sharpe {
            Some(s) => format!("{s}"),
            None => "None".into(),
        };
        format!(
            "SolveResult(iterations={}, converged={}, certificate='{}', sharpe={sharpe})",
            self.inner.iterations,
            if self.inner.converged { "True" } else { "False" },
            self.certificate(),
        )
    }
}

/// Fits sample moments on the whole return history and runs the proximal
/// gradient solver.
#[pyfunction]
#[pyo3(signature = (returns, m, eps=1e-3, tol=1e-5, max_iter=10000, init="mean"))]
fn solve(
    returns: Vec<Vec<f64>>,
    m: usize,
    eps: f64,
    tol: f64,
    max_iter: usize,
    init: &str,
) -> PyResult<PySolveResult> {
    let returns = returns_matrix(returns)?;
    let config = solver_config(m, eps, tol, max_iter, init)?;
    let model = sparse_sharpe::compute_moments(&returns, config.eps).map_err(to_py_err)?;
    let inner = sparse_sharpe::solve(&model, &config).map_err(to_py_err)?;
    Ok(PySolveResult { inner })
}

/// Exhaustive global optimum over all size-m supports; returns
/// (v_star, objective). Guarded at 1e6 supports.
#[pyfunction]
#[pyo3(signature = (returns, m, eps=1e-3))]
fn solve_global_exhaustive(
    returns: Vec<Vec<f64>>,
    m: usize,
    eps: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let returns = returns_matrix(returns)?;
    let model = sparse_sharpe::compute_moments(&returns, eps).map_err(to_py_err)?;
    let budget = SparsityBudget::new(m).map_err(to_py_err)?;
    if m > model.n_assets() {
        return Err(PyValueError::new_err(format!(
            "m = {m} exceeds asset count {}",
            model.n_assets()
        )));
    }
    let (v, f) = sparse_sharpe::solve_global_exhaustive(&model, budget).map_err(to_py_err)?;
    Ok((v.to_vec(), f))
}

/// Backtest output.
#[pyclass(name = "BacktestResult")]
struct PyBacktestResult {
    inner: BacktestResult,
}

#[pymethods]
impl PyBacktestResult {
    #[getter]
    fn test_sharpe(&self) -> Option<f64> {
        self.inner.test_sharpe
    }

    #[getter]
    fn cumulative_wealth(&self) -> f64 {
        self.inner.cumulative_wealth
    }

    /// List of (cost rate, final wealth) pairs.
    #[getter]
    fn wealth_by_cost_rate(&self) -> Vec<(f64, f64)> {
        self.inner.wealth_by_cost_rate.clone()
    }

    #[getter]
    fn sparsity_mean(&self) -> f64 {
        self.inner.sparsity_mean
    }

    #[getter]
    fn sparsity_std(&self) -> f64 {
        self.inner.sparsity_std
    }

    #[getter]
    fn portfolio_returns(&self) -> Vec<f64> {
        self.inner.portfolio_returns.clone()
    }

    #[getter]
    fn weights_by_period(&self) -> Vec<Vec<f64>> {
        self.inner
            .weights_by_period
            .iter()
            .map(|w| w.weights().to_vec())
            .collect()
    }

    #[getter]
    fn support_sizes(&self) -> Vec<usize> {
        self.inner
            .weights_by_period
            .iter()
            .map(|w| w.support_size())
            .collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        report_to_json_string(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        let sr = match self.inner.test_sharpe {
            Some(s) => format!("{s}"),
            None => "None".into(),
        };
        format!(
            "BacktestResult(periods={}, test_sharpe={sr}, cumulative_wealth={})",
            self.inner.portfolio_returns.len(),
            self.inner.cumulative_wealth
        )
    }
}

/// Moving-window backtest; `returns` rows are periods of excess returns
/// (fractions).
#[pyfunction]
#[pyo3(signature = (returns, window, m, eps=1e-3, tol=1e-5, max_iter=10000, cost_rates=vec![0.0], initial_wealth=1.0))]
#[allow(clippy::too_many_arguments)]
fn run_backtest(
    returns: Vec<Vec<f64>>,
    window: usize,
    m: usize,
    eps: f64,
    tol: f64,
    max_iter: usize,
    cost_rates: Vec<f64>,
    initial_wealth: f64,
) -> PyResult<PyBacktestResult> {
    let returns = returns_matrix(returns)?;
    let config = BacktestConfig {
        window,
        solver: solver_config(m, eps, tol, max_iter, "mean")?,
        cost_rates,
        initial_wealth,
    };
    let inner = sparse_sharpe::run_backtest(&returns, &config).map_err(to_py_err)?;
    Ok(PyBacktestResult { inner })
}

/// Simulation study output.
#[pyclass(name = "SimReport")]
struct PySimReport {
    inner: SimReport,
}

#[pymethods]
impl PySimReport {
    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }

    #[getter]
    fn success_count(&self) -> usize {
        self.inner.success_count
    }

    #[getter]
    fn success_fraction(&self) -> f64 {
        self.inner.success_fraction
    }

    #[getter]
    fn per_init_success(&self) -> Vec<usize> {
        self.inner.per_init_success.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        report_to_json_string(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SimReport(trials={}, success_fraction={})",
            self.inner.trials, self.inner.success_fraction
        )
    }
}

/// Randomized study of how often PGA reaches the exhaustive global optimum.
#[pyfunction]
#[pyo3(signature = (trials, seed, n_assets=10, n_samples=50, m=3, eps=1e-3, pga_iters=500, step_rule="a9", inits=None, records=false))]
#[allow(clippy::too_many_arguments)]
fn run_simulation(
    trials: usize,
    seed: u64,
    n_assets: usize,
    n_samples: usize,
    m: usize,
    eps: f64,
    pga_iters: usize,
    step_rule: &str,
    inits: Option<Vec<String>>,
    records: bool,
) -> PyResult<PySimReport> {
    let mut config = SimConfig::new(trials, seed);
    config.n_assets = n_assets;
    config.n_samples = n_samples;
    config.m = SparsityBudget::new(m).map_err(to_py_err)?;
    config.eps = eps;
    config.pga_iters = pga_iters;
    config.step_rule = match step_rule {
        "a9" => StepRule::A9,
        "default" => StepRule::Default,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown step rule {other:?}; expected a9|default"
            )))
        }
    };
    if let Some(names) = inits {
        config.inits = names
            .iter()
            .map(|n| parse_init(n))
            .collect::<PyResult<Vec<_>>>()?;
    }
    config.record_trials = records;
    let inner = sparse_sharpe::run_simulation(&config).map_err(to_py_err)?;
    Ok(PySimReport { inner })
}

/// Sharpe ratio of a weight vector under the model fitted on `returns`.
#[pyfunction]
#[pyo3(signature = (returns, weights, eps=1e-3))]
fn sharpe_of_weights(returns: Vec<Vec<f64>>, weights: Vec<f64>, eps: f64) -> PyResult<f64> {
    let returns = returns_matrix(returns)?;
    let model: MomentModel =
        sparse_sharpe::compute_moments(&returns, eps).map_err(to_py_err)?;
    model
        .sharpe(Array1::from(weights).view())
        .map_err(to_py_err)
}

#[pymodule]
fn sparse_sharpe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(prox_m_sparse_nonneg, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sharpe, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_global_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(run_backtest, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe_of_weights, m)?)?;
    m.add_class::<PySolveResult>()?;
    m.add_class::<PyBacktestResult>()?;
    m.add_class::<PySimReport>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
