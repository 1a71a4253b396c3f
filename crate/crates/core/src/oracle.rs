//! Exhaustive global solver for small instances and the simulation harness
//! that measures how often PGA lands on the global optimum.

use itertools::Itertools;
use ndarray::{Array1, Array2};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, norm2, power_iteration_upper};
use crate::moments::MomentModel;
use crate::prox::{in_omega, SparsityBudget};
use crate::solver::{certify_global, check_fixed_point, pga_step, Certificate, CertificateKind, Init};

/// Hard cap on the number of enumerated supports.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

const NNQP_MAX_ITER: usize = 1_000_000;

/// C(n, k) without overflow (saturating).
fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn enumeration_guard(n: usize, m: usize) -> Result<()> {
    let count = binomial(n, m);
    if count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            n,
            m,
            count,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Global minimizer of 1/2 v'Q_eps v - p'v over {v >= 0, v_j = 0 off the
/// support}. The restricted problem is strongly convex, so projected
/// gradient from zero with a clamp-at-zero prox converges to the unique
/// optimum; iteration stops when the prox-step length (the fixed-point
/// residual) drops to 1e-12 * (1 + ||v||).
pub fn solve_nnqp_on_support(model: &MomentModel, support: &[usize]) -> Result<Array1<f64>> {
    let n = model.n_assets();
    if support.is_empty() {
        return Err(Error::InvalidArgument("support must be nonempty".into()));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) || *support.last().unwrap() >= n {
        return Err(Error::InvalidArgument(
            "support must be a strictly increasing set of valid indices".into(),
        ));
    }
    let s = support.len();
    let a = model.q_eps_submatrix(support);
    let b = Array1::from_iter(support.iter().map(|&i| model.p()[i]));

    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lam = power_iteration_upper(|v| a.dot(v), s, 10_000, frob.max(model.eps()));
    let alpha = 1.0 / lam;

    // Run past the contractive phase to a bit-exact fixed point so the
    // oracle's own error stays far below the 1e-10 comparisons made
    // against it (the residual bound 1e-12 (1 + ||v||) is still met).
    let mut x: Array1<f64> = Array1::zeros(s);
    for _ in 0..NNQP_MAX_ITER {
        let mut y = a.dot(&x);
        y -= &b;
        y *= -alpha;
        y += &x;
        y.mapv_inplace(|t| t.max(0.0));
        let residual = norm2(&(&y - &x).view());
        let done = y == x || residual <= 1e-15 * (1.0 + norm2(&y.view()));
        x = y;
        if done {
            break;
        }
    }

    let mut v = Array1::zeros(n);
    for (k, &i) in support.iter().enumerate() {
        v[i] = x[k];
    }
    Ok(v)
}

/// Enumerates every size-m support (smaller supports embed in larger ones),
/// solves each restricted convex problem, and returns the best minimizer
/// with its objective value. Ties keep the lexicographically smallest
/// support. Guarded by [`ENUMERATION_BUDGET`].
pub fn solve_global_exhaustive(
    model: &MomentModel,
    m: SparsityBudget,
) -> Result<(Array1<f64>, f64)> {
    let n = model.n_assets();
    let m = m.get().min(n);
    enumeration_guard(n, m)?;
    // v = 0 is feasible for every support and has objective 0
    let mut best_v = Array1::zeros(n);
    let mut best_f = 0.0;
    for support in (0..n).combinations(m) {
        let v = solve_nnqp_on_support(model, &support)?;
        let f = model.objective_unchecked(v.view());
        if f < best_f {
            best_f = f;
            best_v = v;
        }
    }
    Ok((best_v, best_f))
}

/// Step-size rule for the simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// alpha = 0.99 / lambda1_hat, the simulation-protocol step.
    A9,
    /// alpha = 0.999 / lambda1_hat, the solver default.
    Default,
}

impl StepRule {
    pub fn step_safety(self) -> f64 {
        match self {
            StepRule::A9 => 0.99,
            StepRule::Default => 0.999,
        }
    }
}

/// Simulation protocol parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_assets: usize,
    /// Rows of the simulated factor matrix Q.
    pub n_samples: usize,
    pub m: SparsityBudget,
    pub eps: f64,
    /// Component range for the mean vector p.
    pub p_range: (f64, f64),
    pub trials: usize,
    pub seed: u64,
    pub inits: Vec<Init>,
    pub success_threshold: f64,
    pub pga_iters: usize,
    pub step_rule: StepRule,
    /// Keep per-trial records in the report.
    pub record_trials: bool,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            n_assets: 10,
            n_samples: 50,
            m: SparsityBudget::new(3).expect("3 >= 1"),
            eps: 1e-3,
            p_range: (-10.0, 10.0),
            trials,
            seed,
            inits: vec![Init::Zero, Init::Uniform, Init::Ones],
            success_threshold: 1e-10,
            pga_iters: 500,
            step_rule: StepRule::A9,
            record_trials: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_assets == 0 || self.n_samples == 0 {
            return Err(Error::InvalidArgument(
                "n_assets and n_samples must be positive".into(),
            ));
        }
        if self.m.get() > self.n_assets {
            return Err(Error::InvalidArgument(format!(
                "m = {} exceeds n_assets = {}",
                self.m.get(),
                self.n_assets
            )));
        }
        if self.p_range.0.is_nan() || self.p_range.1.is_nan() || self.p_range.0 >= self.p_range.1 {
            return Err(Error::InvalidArgument("empty p_range".into()));
        }
        if self.inits.is_empty() {
            return Err(Error::InvalidArgument("need at least one init".into()));
        }
        if self.pga_iters == 0 {
            return Err(Error::InvalidArgument("pga_iters must be positive".into()));
        }
        enumeration_guard(self.n_assets, self.m.get())
    }
}

/// Result of one PGA run inside a trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitRunRecord {
    pub init: Init,
    /// ||v_end - v*|| / ||v*|| (absolute when ||v*|| = 0).
    pub v_error: f64,
    /// |f(v_end) - f(v*)| / |f(v*)| (absolute when f(v*) = 0).
    pub f_error: f64,
    pub objective: f64,
    pub fixed_point_residual: f64,
    pub certificate: Certificate,
    pub success: bool,
    /// Iterations violating the sufficient-decrease inequality
    /// F(v+) + a||dv||^2 <= F(v) + 1e-12 with a = (1/alpha - lambda1_hat)/2.
    pub decrease_violations: usize,
    /// Iterations violating the geometric boundedness envelope
    /// gamma^k ||v0|| + alpha ||p|| (1-gamma^k)/(1-gamma), gamma = 1 - alpha eps.
    pub boundedness_violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub oracle_objective: f64,
    pub success: bool,
    pub inits: Vec<InitRunRecord>,
}

/// Aggregate simulation outcome. A trial is a success when every configured
/// init drives both normalized errors below the threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub trials: usize,
    pub success_count: usize,
    pub success_fraction: f64,
    /// Successes counted per init independently, same order as config.inits.
    pub per_init_success: Vec<usize>,
    pub decrease_violations: usize,
    pub boundedness_violations: usize,
    pub config: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<TrialRecord>>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trial substream: the trial index is mixed into the base seed so
/// trials are independent of execution order.
fn substream_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_add(1)))
}

fn uniform01(rng: &mut ChaCha20Rng) -> f64 {
    // 53 uniform bits in [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_in(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Standard normals via the Box-Muller transform on the generator's
/// uniforms; pairs are drawn together, a trailing odd draw is kept.
fn fill_standard_normals(rng: &mut ChaCha20Rng, out: &mut [f64]) {
    let mut i = 0;
    while i < out.len() {
        let u1 = 1.0 - uniform01(rng); // (0, 1]
        let u2 = uniform01(rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out[i] = r * theta.cos();
        i += 1;
        if i < out.len() {
            out[i] = r * theta.sin();
            i += 1;
        }
    }
}

/// Draws one model instance: rows of Q from N(0, Sigma) with
/// Sigma_ij = 0.5^|i-j| (applied through the lower Cholesky factor),
/// p componentwise uniform on p_range.
pub fn gen_random_instance(rng: &mut ChaCha20Rng, config: &SimConfig) -> Result<MomentModel> {
    let n = config.n_assets;
    let mut sigma = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sigma[[i, j]] = 0.5f64.powi((i as i32 - j as i32).abs());
        }
    }
    let l = cholesky_lower(&sigma)?;
    let mut q = Array2::zeros((config.n_samples, n));
    let mut z = vec![0.0; n];
    for t in 0..config.n_samples {
        fill_standard_normals(rng, &mut z);
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += l[[i, k]] * z[k];
            }
            q[[t, i]] = acc;
        }
    }
    let p = Array1::from_iter((0..n).map(|_| uniform_in(rng, config.p_range.0, config.p_range.1)));
    MomentModel::from_factors(p, q, config.eps)
}

fn normalized_error(value: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        value / denom
    } else {
        value
    }
}

fn init_vector(init: &Init, model: &MomentModel) -> Result<Array1<f64>> {
    let n = model.n_assets();
    Ok(match init {
        Init::MeanVector => model.p().to_owned(),
        Init::Zero => Array1::zeros(n),
        Init::Uniform => Array1::from_elem(n, 1.0 / n as f64),
        Init::Ones => Array1::ones(n),
        Init::Custom(c) => {
            if c.len() != n {
                return Err(Error::Dimension(format!(
                    "custom init has length {}, instance has {n} assets",
                    c.len()
                )));
            }
            Array1::from(c.clone())
        }
    })
}

/// Runs the full protocol: per trial, draw an instance, compute the
/// exhaustive global optimum, run PGA for a fixed number of iterations from
/// each configured init, and record normalized errors, certificates and the
/// per-iteration descent/boundedness checks.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let m = config.m;
    let mut success_count = 0;
    let mut per_init_success = vec![0usize; config.inits.len()];
    let mut decrease_violations = 0;
    let mut boundedness_violations = 0;
    let mut records = config.record_trials.then(Vec::new);

    for trial in 0..config.trials {
        let mut rng = ChaCha20Rng::seed_from_u64(substream_seed(config.seed, trial as u64));
        let model = gen_random_instance(&mut rng, config)?;
        let (v_oracle, f_oracle) = solve_global_exhaustive(&model, m)?;
        let oracle_norm = norm2(&v_oracle.view());
        let oracle_abs_f = f_oracle.abs();

        let lambda1 = model.lambda1();
        let alpha = config.step_rule.step_safety() / lambda1;
        let decrease_coeff = 0.5 * (1.0 / alpha - lambda1);
        let gamma = 1.0 - alpha * model.eps();
        let p_norm_step = alpha * norm2(&model.p());

        let mut trial_success = true;
        let mut init_records = Vec::with_capacity(config.inits.len());
        for (init_idx, init) in config.inits.iter().enumerate() {
            let mut v = init_vector(init, &model)?;
            let mut f_prev = in_omega(v.view(), m).then(|| model.objective_unchecked(v.view()));
            let mut envelope = norm2(&v.view());
            let mut d_viol = 0;
            let mut b_viol = 0;
            for _ in 0..config.pga_iters {
                let next = pga_step(&model, &v, alpha, m);
                let f_next = model.objective_unchecked(next.view());
                if let Some(fp) = f_prev {
                    let dv2 = (&next - &v).mapv(|x| x * x).sum();
                    if f_next + decrease_coeff * dv2 > fp + 1e-12 {
                        d_viol += 1;
                    }
                }
                f_prev = Some(f_next);
                envelope = gamma * envelope + p_norm_step;
                if norm2(&next.view()) > envelope + 1e-9 {
                    b_viol += 1;
                }
                v = next;
            }

            let residual = check_fixed_point(&model, v.view(), alpha, m);
            let mut certificate = certify_global(&model, v.view(), m);
            if residual > 1e-6 * (1.0 + norm2(&v.view())) && certificate.is_global() {
                certificate.kind = CertificateKind::LocalOnly;
            }

            let objective = model.objective_unchecked(v.view());
            let v_error = normalized_error(norm2(&(&v - &v_oracle).view()), oracle_norm);
            let f_error = normalized_error((objective - f_oracle).abs(), oracle_abs_f);
            let success =
                v_error < config.success_threshold && f_error < config.success_threshold;
            if success {
                per_init_success[init_idx] += 1;
            } else {
                trial_success = false;
            }
            decrease_violations += d_viol;
            boundedness_violations += b_viol;
            init_records.push(InitRunRecord {
                init: init.clone(),
                v_error,
                f_error,
                objective,
                fixed_point_residual: residual,
                certificate,
                success,
                decrease_violations: d_viol,
                boundedness_violations: b_viol,
            });
        }
        if trial_success {
            success_count += 1;
        }
        if let Some(r) = &mut records {
            r.push(TrialRecord {
                trial,
                oracle_objective: f_oracle,
                success: trial_success,
                inits: init_records,
            });
        }
    }

    Ok(SimReport {
        trials: config.trials,
        success_count,
        success_fraction: if config.trials > 0 {
            success_count as f64 / config.trials as f64
        } else {
            0.0
        },
        per_init_success,
        decrease_violations,
        boundedness_violations,
        config: config.clone(),
        records,
    })
}
