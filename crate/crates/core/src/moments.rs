//! Sample moments of a return matrix and the quadratic model built from them.
//!
//! For a T x N excess-return matrix R the model is
//!   p = (1/T) R' 1,   Q = (R - column means) / sqrt(T-1),   Q_eps = Q'Q + eps I,
//! and the solver works with f(v) = 1/2 v'Q_eps v - p'v.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, power_iteration_upper};

/// T x N matrix of per-period excess asset returns (fractions, 0.01 = 1%),
/// with optional period and asset labels.
#[derive(Debug, Clone)]
pub struct ReturnsMatrix {
    values: Array2<f64>,
    dates: Option<Vec<String>>,
    asset_names: Option<Vec<String>>,
}

impl ReturnsMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        Self::with_labels(values, None, None)
    }

    pub fn with_labels(
        values: Array2<f64>,
        dates: Option<Vec<String>>,
        asset_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (t, n) = (values.nrows(), values.ncols());
        if t < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 periods for a sample standard deviation, got {t}"
            )));
        }
        if n == 0 {
            return Err(Error::Dimension("need at least one asset".into()));
        }
        if let Some((i, j)) = first_non_finite(&values.view()) {
            return Err(Error::NonFinite(format!(
                "return entry at period {i}, asset {j}"
            )));
        }
        if let Some(d) = &dates {
            if d.len() != t {
                return Err(Error::Dimension(format!(
                    "{} date labels for {t} periods",
                    d.len()
                )));
            }
        }
        if let Some(a) = &asset_names {
            if a.len() != n {
                return Err(Error::Dimension(format!(
                    "{} asset names for {n} assets",
                    a.len()
                )));
            }
        }
        Ok(Self {
            values,
            dates,
            asset_names,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn asset_names(&self) -> Option<&[String]> {
        self.asset_names.as_deref()
    }
}

fn first_non_finite(values: &ArrayView2<f64>) -> Option<(usize, usize)> {
    for (i, row) in values.rows().into_iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// The optimization instance: mean vector p, centered factor Q, regularizer
/// eps, and a cached upper bound on the spectral norm of Q_eps.
///
/// Q_eps itself is materialized as an N x N Gram matrix only when N <= T;
/// otherwise v -> Q_eps v is applied in factored form Q'(Qv) + eps v.
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct MomentModel {
    p: Array1<f64>,
    q: Array2<f64>,
    gram: Option<Array2<f64>>,
    eps: f64,
    lambda1: f64,
}

/// Builds the model from raw return rows per the sample-moment formulas.
pub fn compute_moments(returns: &ReturnsMatrix, eps: f64) -> Result<MomentModel> {
    compute_moments_view(returns.values(), eps)
}

/// Same as [`compute_moments`] but on a borrowed window of rows
/// (the backtester fits one model per moving window).
pub fn compute_moments_view(values: ArrayView2<f64>, eps: f64) -> Result<MomentModel> {
    let (t, n) = (values.nrows(), values.ncols());
    if t < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 periods, got {t}"
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("need at least one asset".into()));
    }
    if first_non_finite(&values).is_some() {
        return Err(Error::NonFinite("return matrix contains NaN or inf".into()));
    }
    let p = values.mean_axis(Axis(0)).expect("t >= 2");
    let scale = 1.0 / ((t as f64) - 1.0).sqrt();
    let q = (&values - &p) * scale;
    MomentModel::from_factors(p, q, eps)
}

impl MomentModel {
    /// Builds the model directly from p and Q (the simulation harness
    /// generates Q rather than returns). Q columns need not be centered.
    pub fn from_factors(p: Array1<f64>, q: Array2<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        let n = p.len();
        if q.ncols() != n {
            return Err(Error::Dimension(format!(
                "Q has {} columns but p has {n} entries",
                q.ncols()
            )));
        }
        if !all_finite(&p.view()) || first_non_finite(&q.view()).is_some() {
            return Err(Error::NonFinite("model factors contain NaN or inf".into()));
        }
        let gram = if n <= q.nrows() {
            let mut g = q.t().dot(&q);
            for i in 0..n {
                g[[i, i]] += eps;
            }
            Some(g)
        } else {
            None
        };
        let mut model = Self {
            p,
            q,
            gram,
            eps,
            lambda1: f64::NAN,
        };
        model.lambda1 = model.spectral_norm_upper();
        Ok(model)
    }

    pub fn n_assets(&self) -> usize {
        self.p.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn p(&self) -> ArrayView1<'_, f64> {
        self.p.view()
    }

    pub fn q(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    /// Cached upper bound on ||Q_eps||_2 (never an underestimate; an
    /// overestimate only shrinks the step size).
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// v -> Q_eps v, factored as Q'(Qv) + eps v unless the Gram matrix is cached.
    pub fn apply_q_eps(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match &self.gram {
            Some(g) => g.dot(&v),
            None => {
                let qv = self.q.dot(&v);
                let mut out = self.q.t().dot(&qv);
                out.scaled_add(self.eps, &v);
                out
            }
        }
    }

    /// Principal submatrix of Q_eps on the given (sorted, unique) indices.
    pub(crate) fn q_eps_submatrix(&self, support: &[usize]) -> Array2<f64> {
        let s = support.len();
        match &self.gram {
            Some(g) => {
                let mut a = Array2::zeros((s, s));
                for (ai, &i) in support.iter().enumerate() {
                    for (aj, &j) in support.iter().enumerate() {
                        a[[ai, aj]] = g[[i, j]];
                    }
                }
                a
            }
            None => {
                let cols = self.q.select(Axis(1), support);
                let mut a = cols.t().dot(&cols);
                for i in 0..s {
                    a[[i, i]] += self.eps;
                }
                a
            }
        }
    }

    /// f(v) = 1/2 v'Q_eps v - p'v.
    pub fn objective(&self, v: ArrayView1<f64>) -> Result<f64> {
        self.check_len(v.len())?;
        Ok(self.objective_unchecked(v))
    }

    pub(crate) fn objective_unchecked(&self, v: ArrayView1<f64>) -> f64 {
        0.5 * v.dot(&self.apply_q_eps(v)) - self.p.dot(&v)
    }

    /// grad f(v) = Q_eps v - p.
    pub fn gradient(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_len(v.len())?;
        Ok(self.gradient_unchecked(v))
    }

    pub(crate) fn gradient_unchecked(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut g = self.apply_q_eps(v);
        g -= &self.p;
        g
    }

    /// Regularized sample Sharpe ratio p'w / sqrt(w'Q_eps w) of a nonzero
    /// weight vector.
    pub fn sharpe(&self, w: ArrayView1<f64>) -> Result<f64> {
        self.check_len(w.len())?;
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(self.sharpe_unchecked(w))
    }

    pub(crate) fn sharpe_unchecked(&self, w: ArrayView1<f64>) -> f64 {
        self.p.dot(&w) / w.dot(&self.apply_q_eps(w)).sqrt()
    }

    /// Recomputes the spectral-norm upper bound: power iteration on
    /// v -> Q_eps v (relative tolerance 1e-10, at most 10000 iterations,
    /// start vector 1/sqrt(N)), inflated by (1 + 1e-6); falls back to the
    /// always-valid bound ||Q'Q||_F + eps if the iteration stagnates.
    pub fn spectral_norm_upper(&self) -> f64 {
        let fallback = self.gram_frobenius() + self.eps;
        power_iteration_upper(
            |v| self.apply_q_eps(v.view()),
            self.n_assets(),
            10_000,
            fallback,
        )
    }

    /// ||Q'Q||_F, computed from whichever Gram product is smaller
    /// (Q'Q and QQ' share nonzero eigenvalues, hence Frobenius norms).
    fn gram_frobenius(&self) -> f64 {
        let g = if self.q.ncols() <= self.q.nrows() {
            self.q.t().dot(&self.q)
        } else {
            self.q.dot(&self.q.t())
        };
        g.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_assets() {
            return Err(Error::Dimension(format!(
                "vector has length {len}, model has {} assets",
                self.n_assets()
            )));
        }
        Ok(())
    }
}

/// Mean divided by sample standard deviation (length-1 divisor) of a
/// return sequence; the out-of-sample test statistic of a backtest.
pub fn sample_sharpe(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: returns.len(),
        });
    }
    if returns.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::ZeroVariance);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(mean / var.sqrt())
}
