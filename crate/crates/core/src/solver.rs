//! Proximal gradient solver for the m-sparse subtraction model
//! min { 1/2 v'Q_eps v - p'v : v >= 0, ||v||_0 <= m }, plus portfolio
//! normalization and the global-optimality certificate.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm2};
use crate::moments::MomentModel;
use crate::prox::{in_omega, prox_m_sparse_nonneg, SparsityBudget};

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// v0 = p (the default).
    MeanVector,
    Zero,
    /// v0 = 1/N.
    Uniform,
    Ones,
    Custom(Vec<f64>),
}

/// Solver parameters. `eps` is the regularizer used when a model is fitted
/// on behalf of this config (backtests, CLI, simulation); a model passed
/// directly to [`solve`] carries its own eps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub m: SparsityBudget,
    pub eps: f64,
    /// alpha = step_safety / lambda1_hat; must lie strictly in (0, 1).
    pub step_safety: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub init: Init,
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(m: SparsityBudget) -> Self {
        Self {
            m,
            eps: 1e-3,
            step_safety: 0.999,
            tol: 1e-5,
            max_iter: 10_000,
            init: Init::MeanVector,
            record_trace: false,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_step_safety(mut self, step_safety: f64) -> Self {
        self.step_safety = step_safety;
        self
    }

    pub fn with_trace(mut self, record_trace: bool) -> Self {
        self.record_trace = record_trace;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_safety > 0.0 && self.step_safety < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step_safety must lie in (0, 1), got {}",
                self.step_safety
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Long-only weight vector: nonnegative, summing to 1 within 1e-12, or
/// exactly all-zero (the risk-free fallback).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePortfolio {
    #[serde(with = "crate::data_io::serde_arr")]
    weights: Array1<f64>,
}

impl SparsePortfolio {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if let Some((i, &x)) = weights.iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::NegativeComponent { index: i, value: x });
        }
        let sum: f64 = weights.sum();
        let zero = weights.iter().all(|&x| x == 0.0);
        if !zero && (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1 (or an all-zero fallback)"
            )));
        }
        Ok(Self { weights })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            weights: Array1::zeros(n),
        }
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&x| x == 0.0)
    }

    /// |supp(w)|, counted on exact zeros.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&x| x != 0.0).count()
    }
}

/// Outcome of the optimality check on the solver's terminal iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Fewer than m active assets: provably a global maximizer.
    GlobalByCardinality,
    /// Exactly m active assets and every inactive gradient clears the
    /// strict margin condition: provably a global maximizer.
    GlobalByGradient,
    /// Only local optimality is guaranteed.
    LocalOnly,
    /// v* = 0: no positive expected return was available.
    ZeroPortfolio,
}

/// Certificate plus the measured margin of the inactive-gradient condition,
/// min over inactive i of (grad_i f(v*) + eps * min support value).
/// Strictness is checked with zero slack on the computed values; margins
/// below ~1e-10 should be treated as numerically ambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub gradient_margin: Option<f64>,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::GlobalByCardinality => "global_by_cardinality",
            CertificateKind::GlobalByGradient => "global_by_gradient",
            CertificateKind::LocalOnly => "local_only",
            CertificateKind::ZeroPortfolio => "zero_portfolio",
        }
    }
}

impl Certificate {
    pub fn is_global(&self) -> bool {
        matches!(
            self.kind,
            CertificateKind::GlobalByCardinality | CertificateKind::GlobalByGradient
        )
    }
}

/// Solver output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    /// Raw solution of the subtraction model.
    #[serde(with = "crate::data_io::serde_arr")]
    pub v_star: Array1<f64>,
    /// v* normalized onto the simplex (zero fallback when v* = 0).
    pub portfolio: SparsePortfolio,
    pub iterations: usize,
    pub converged: bool,
    /// f(v_k) per iterate, starting at v0 when v0 is feasible; non-increasing.
    pub objective_trace: Option<Vec<f64>>,
    /// ||v - prox(v - alpha grad f(v))|| at the terminal iterate.
    pub fixed_point_residual: f64,
    pub certificate: Certificate,
    /// Sharpe ratio of the portfolio; None for the zero portfolio.
    pub sharpe: Option<f64>,
}

/// One proximal gradient step v -> prox(v - alpha grad f(v)).
pub(crate) fn pga_step(
    model: &MomentModel,
    v: &Array1<f64>,
    alpha: f64,
    m: SparsityBudget,
) -> Array1<f64> {
    let mut y = model.gradient_unchecked(v.view());
    y *= -alpha;
    y += v;
    prox_m_sparse_nonneg(y.view(), m)
}

fn initial_vector(model: &MomentModel, init: &Init) -> Result<Array1<f64>> {
    let n = model.n_assets();
    let v = match init {
        Init::MeanVector => model.p().to_owned(),
        Init::Zero => Array1::zeros(n),
        Init::Uniform => Array1::from_elem(n, 1.0 / n as f64),
        Init::Ones => Array1::ones(n),
        Init::Custom(c) => {
            if c.len() != n {
                return Err(Error::Dimension(format!(
                    "custom init has length {}, model has {n} assets",
                    c.len()
                )));
            }
            let arr = Array1::from(c.clone());
            if !all_finite(&arr.view()) {
                return Err(Error::NonFinite("custom init contains NaN or inf".into()));
            }
            arr
        }
    };
    Ok(v)
}

/// Runs the PGA iteration until the relative-change stopping rule fires or
/// `max_iter` is exhausted; assembles portfolio, residual and certificate.
pub fn solve(model: &MomentModel, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let n = model.n_assets();
    let m = config.m;
    if m.get() > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity budget m = {} exceeds asset count {n}",
            m.get()
        )));
    }
    let alpha = config.step_safety / model.lambda1();

    let mut v = initial_vector(model, &config.init)?;
    let mut trace = if config.record_trace {
        let mut t = Vec::new();
        if in_omega(v.view(), m) {
            t.push(model.objective_unchecked(v.view()));
        }
        Some(t)
    } else {
        None
    };

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=config.max_iter {
        let next = pga_step(model, &v, alpha, m);
        if !all_finite(&next.view()) {
            return Err(Error::NonFiniteIterate { iteration: k });
        }
        if let Some(t) = &mut trace {
            t.push(model.objective_unchecked(next.view()));
        }
        let prev_norm = norm2(&v.view());
        let step = norm2(&(&next - &v).view());
        v = next;
        iterations = k;
        // Algorithm's relative test, with an absolute fallback when the
        // previous iterate is the zero vector.
        let stop = if prev_norm == 0.0 {
            norm2(&v.view()) <= config.tol
        } else {
            step / prev_norm <= config.tol
        };
        if stop {
            converged = true;
            break;
        }
    }

    let fixed_point_residual = check_fixed_point(model, v.view(), alpha, m);
    let mut certificate = certify_global(model, v.view(), m);
    if !converged && certificate.is_global() {
        // the global conditions are only meaningful at a fixed point
        certificate.kind = CertificateKind::LocalOnly;
    }
    let portfolio = normalize_to_portfolio(v.view())?;
    let sharpe = if portfolio.is_zero() {
        None
    } else {
        Some(model.sharpe_unchecked(portfolio.weights()))
    };

    Ok(SolveResult {
        v_star: v,
        portfolio,
        iterations,
        converged,
        objective_trace: trace,
        fixed_point_residual,
        certificate,
        sharpe,
    })
}

/// ||v - prox(v - alpha grad f(v))||_2; zero exactly at fixed points of the
/// iteration.
pub fn check_fixed_point(
    model: &MomentModel,
    v: ArrayView1<f64>,
    alpha: f64,
    m: SparsityBudget,
) -> f64 {
    let owned = v.to_owned();
    let stepped = pga_step(model, &owned, alpha, m);
    norm2(&(&owned - &stepped).view())
}

/// Existence of Positive Expected Return: true iff max_i p_i > 0,
/// equivalently some feasible portfolio has positive expected return.
pub fn check_eper(model: &MomentModel) -> bool {
    model.p().iter().any(|&x| x > 0.0)
}

/// Classifies a converged iterate per the global-optimality conditions:
/// strictly fewer than m active assets, or exactly m with every inactive
/// gradient strictly above -eps * (smallest active value).
pub fn certify_global(model: &MomentModel, v_star: ArrayView1<f64>, m: SparsityBudget) -> Certificate {
    let support: Vec<usize> = (0..v_star.len()).filter(|&i| v_star[i] > 0.0).collect();
    if support.is_empty() {
        return Certificate {
            kind: CertificateKind::ZeroPortfolio,
            gradient_margin: None,
        };
    }
    let gradient_margin = if support.len() < v_star.len() {
        let min_support = support
            .iter()
            .map(|&i| v_star[i])
            .fold(f64::INFINITY, f64::min);
        let grad = model.gradient_unchecked(v_star);
        let margin = (0..v_star.len())
            .filter(|i| v_star[*i] <= 0.0)
            .map(|i| grad[i] + model.eps() * min_support)
            .fold(f64::INFINITY, f64::min);
        Some(margin)
    } else {
        None
    };
    let kind = if support.len() < m.get() {
        CertificateKind::GlobalByCardinality
    } else if support.len() == m.get() && gradient_margin.is_none_or(|mg| mg > 0.0) {
        CertificateKind::GlobalByGradient
    } else {
        CertificateKind::LocalOnly
    };
    Certificate {
        kind,
        gradient_margin,
    }
}

/// v / (v'1) when the sum is positive, the zero portfolio otherwise.
/// Entries below -1e-12 are rejected; solver outputs are exactly nonnegative.
pub fn normalize_to_portfolio(v: ArrayView1<f64>) -> Result<SparsePortfolio> {
    for (i, &x) in v.iter().enumerate() {
        if x < -1e-12 {
            return Err(Error::NegativeComponent { index: i, value: x });
        }
    }
    let clamped = v.mapv(|x| x.max(0.0));
    let sum = clamped.sum();
    if sum > 0.0 {
        Ok(SparsePortfolio {
            weights: clamped / sum,
        })
    } else {
        Ok(SparsePortfolio::zero(v.len()))
    }
}

/// Maps a fractional-model optimum w onto the subtraction model:
/// (p'w / w'Q_eps w) w. Undefined unless p'w > 0.
pub fn scale_to_subtraction(model: &MomentModel, w: ArrayView1<f64>) -> Result<Array1<f64>> {
    if w.len() != model.n_assets() {
        return Err(Error::Dimension(format!(
            "vector has length {}, model has {} assets",
            w.len(),
            model.n_assets()
        )));
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let ptw = model.p().dot(&w);
    if ptw <= 0.0 {
        return Err(Error::NonPositiveExpectedReturn(ptw));
    }
    let quad = w.dot(&model.apply_q_eps(w));
    Ok(w.to_owned() * (ptw / quad))
}
