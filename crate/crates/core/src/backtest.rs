//! Moving-window trading simulation and its evaluation metrics: test Sharpe
//! ratio, cumulative wealth, transaction-cost-adjusted wealth and sparsity
//! statistics.

use ndarray::{Array1, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{compute_moments_view, sample_sharpe, ReturnsMatrix};
use crate::solver::{solve, CertificateKind, SolverConfig, SparsePortfolio};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestConfig {
    /// Fitting window length T; each portfolio is fitted on the previous T rows.
    pub window: usize,
    pub solver: SolverConfig,
    /// Transaction cost rates to evaluate (0 = frictionless).
    pub cost_rates: Vec<f64>,
    pub initial_wealth: f64,
}

impl BacktestConfig {
    pub fn new(window: usize, solver: SolverConfig) -> Self {
        Self {
            window,
            solver,
            cost_rates: vec![0.0],
            initial_wealth: 1.0,
        }
    }
}

/// Count of certificate kinds over the backtest periods.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateTally {
    pub global_by_cardinality: usize,
    pub global_by_gradient: usize,
    pub local_only: usize,
    pub zero_portfolio: usize,
}

impl CertificateTally {
    fn record(&mut self, kind: CertificateKind) {
        match kind {
            CertificateKind::GlobalByCardinality => self.global_by_cardinality += 1,
            CertificateKind::GlobalByGradient => self.global_by_gradient += 1,
            CertificateKind::LocalOnly => self.local_only += 1,
            CertificateKind::ZeroPortfolio => self.zero_portfolio += 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestResult {
    pub weights_by_period: Vec<SparsePortfolio>,
    /// Labels of the out-of-sample periods, when the input carried dates.
    pub dates: Option<Vec<String>>,
    /// Out-of-sample portfolio returns; a zero portfolio contributes 0.
    pub portfolio_returns: Vec<f64>,
    /// None when the return sequence is degenerate (fewer than 2 returns or
    /// zero variance); the reason is recorded in `warnings`.
    pub test_sharpe: Option<f64>,
    pub cumulative_wealth: f64,
    /// (cost rate, final wealth) per configured rate.
    pub wealth_by_cost_rate: Vec<(f64, f64)>,
    pub sparsity_mean: f64,
    pub sparsity_std: f64,
    pub certificates: CertificateTally,
    pub warnings: Vec<String>,
}

/// Runs the moving-window protocol: for each period t past the window, fit
/// moments on the trailing T rows, solve for the portfolio, and realize the
/// return x_t'w - 1 with price relatives x_t = r_t + 1. A zero portfolio
/// holds the risk-free asset and contributes excess return 0.
pub fn run_backtest(returns: &ReturnsMatrix, config: &BacktestConfig) -> Result<BacktestResult> {
    let total = returns.n_periods();
    let window = config.window;
    if window < 2 {
        return Err(Error::InvalidArgument(format!(
            "window must be at least 2, got {window}"
        )));
    }
    if window >= total {
        return Err(Error::InvalidArgument(format!(
            "window {window} must be smaller than the number of periods {total}"
        )));
    }
    if config.initial_wealth.is_nan() || config.initial_wealth <= 0.0 {
        return Err(Error::InvalidArgument(
            "initial wealth must be positive".into(),
        ));
    }
    for &nu in &config.cost_rates {
        if !(0.0..1.0).contains(&nu) {
            return Err(Error::InvalidArgument(format!(
                "cost rate {nu} outside [0, 1)"
            )));
        }
    }

    let values = returns.values();
    let mut weights = Vec::with_capacity(total - window);
    let mut rets = Vec::with_capacity(total - window);
    let mut relatives = Vec::with_capacity(total - window);
    let mut tally = CertificateTally::default();
    let mut warnings = Vec::new();

    for t in window..total {
        let fit = values.slice_axis(Axis(0), (t - window..t).into());
        let model = compute_moments_view(fit, config.solver.eps)?;
        let result = solve(&model, &config.solver)?;
        if !result.converged {
            warnings.push(format!(
                "period {t}: solver hit max_iter = {} without converging",
                config.solver.max_iter
            ));
        }
        tally.record(result.certificate.kind);

        let x = values.row(t).mapv(|r| r + 1.0);
        let w = &result.portfolio;
        let r_hat = if w.is_zero() {
            0.0
        } else {
            x.dot(&w.weights()) - 1.0
        };
        weights.push(result.portfolio);
        rets.push(r_hat);
        relatives.push(x);
    }

    let test_sharpe = match sample_sharpe(&rets) {
        Ok(s) => Some(s),
        Err(e) => {
            warnings.push(format!("test Sharpe unavailable: {e}"));
            None
        }
    };
    let cumulative = cumulative_wealth(&rets, config.initial_wealth)?;
    let mut wealth_by_cost_rate = Vec::with_capacity(config.cost_rates.len());
    for &nu in &config.cost_rates {
        let w = wealth_with_costs(&weights, &relatives, nu, config.initial_wealth)?;
        wealth_by_cost_rate.push((nu, w));
    }
    let (sparsity_mean, sparsity_std) = sparsity_stats(&weights)?;
    let dates = returns
        .dates()
        .map(|d| d[window..].to_vec());

    Ok(BacktestResult {
        weights_by_period: weights,
        dates,
        portfolio_returns: rets,
        test_sharpe,
        cumulative_wealth: cumulative,
        wealth_by_cost_rate,
        sparsity_mean,
        sparsity_std,
        certificates: tally,
        warnings,
    })
}

/// initial * prod(1 + r_t). Errors on any return <= -1 (ruin).
pub fn cumulative_wealth(portfolio_returns: &[f64], initial: f64) -> Result<f64> {
    if initial.is_nan() || initial <= 0.0 {
        return Err(Error::InvalidArgument(
            "initial wealth must be positive".into(),
        ));
    }
    let mut wealth = initial;
    for (i, &r) in portfolio_returns.iter().enumerate() {
        if r <= -1.0 {
            return Err(Error::Ruin { index: i, value: r });
        }
        wealth *= 1.0 + r;
    }
    Ok(wealth)
}

/// Weights drifted by realized price relatives:
/// w~_i = w_i x_i / (w'x). The all-zero portfolio evolves to itself
/// (w'x = 0 is guarded); output sums to 1 whenever the input does.
pub fn evolve_weights(w_prev: ArrayView1<f64>, x_prev: ArrayView1<f64>) -> Array1<f64> {
    let wx = w_prev.dot(&x_prev);
    if wx == 0.0 {
        return w_prev.to_owned();
    }
    let mut out = w_prev.to_owned();
    out *= &x_prev;
    out /= wx;
    out
}

/// Proportional-transaction-cost wealth:
///   S = initial * prod_t [ gross_t * (1 - nu/2 * sum_i |w_{t,i} - w~_{t-1,i}|) ],
/// where gross_t = w_t'x_t for an invested portfolio and 1 (the risk-free
/// gross return) for the zero portfolio, and w~ starts at the zero vector so
/// the first-period turnover is the full buy-in.
pub fn wealth_with_costs(
    weights: &[SparsePortfolio],
    price_relatives: &[Array1<f64>],
    nu: f64,
    initial: f64,
) -> Result<f64> {
    if weights.len() != price_relatives.len() {
        return Err(Error::Alignment(format!(
            "{} weight vectors vs {} price-relative vectors",
            weights.len(),
            price_relatives.len()
        )));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::InvalidArgument(format!(
            "cost rate {nu} outside [0, 1)"
        )));
    }
    if initial.is_nan() || initial <= 0.0 {
        return Err(Error::InvalidArgument(
            "initial wealth must be positive".into(),
        ));
    }
    let mut wealth = initial;
    let mut evolved: Option<Array1<f64>> = None;
    for (t, (w, x)) in weights.iter().zip(price_relatives).enumerate() {
        if w.weights().len() != x.len() {
            return Err(Error::Alignment(format!(
                "period {t}: {} weights vs {} price relatives",
                w.weights().len(),
                x.len()
            )));
        }
        let gross = if w.is_zero() { 1.0 } else { w.weights().dot(x) };
        let turnover = match &evolved {
            Some(prev) => w
                .weights()
                .iter()
                .zip(prev.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>(),
            None => w.weights().sum(),
        };
        let factor = gross * (1.0 - 0.5 * nu * turnover);
        if factor <= 0.0 {
            return Err(Error::NonPositiveWealthFactor {
                index: t,
                value: factor,
            });
        }
        wealth *= factor;
        evolved = Some(evolve_weights(w.weights(), x.view()));
    }
    Ok(wealth)
}

/// Mean and sample standard deviation (length-1 divisor) of the support
/// sizes, counted on exact zeros. The std of a single observation is 0.
pub fn sparsity_stats(weights: &[SparsePortfolio]) -> Result<(f64, f64)> {
    if weights.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let counts: Vec<f64> = weights.iter().map(|w| w.support_size() as f64).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let std = if counts.len() < 2 {
        0.0
    } else {
        (counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok((mean, std))
}
