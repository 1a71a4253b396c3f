//! Invariant and property checks across the library.

mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sparse_sharpe::{
    check_fixed_point, cumulative_wealth, evolve_weights, prox_m_sparse_nonneg, sample_sharpe,
    solve, solve_global_exhaustive, sparsity_stats, wealth_with_costs, SolverConfig,
    SparsePortfolio, SparsityBudget,
};

use sparse_sharpe::backtest::{run_backtest, BacktestConfig};
use sparse_sharpe::moments::ReturnsMatrix;

fn budget(m: usize) -> SparsityBudget {
    SparsityBudget::new(m).unwrap()
}

proptest! {
    #[test]
    fn prox_output_feasible_and_optimal(
        v in proptest::collection::vec(-5.0f64..5.0, 1..10),
        m in 1usize..5,
    ) {
        let arr = Array1::from(v.clone());
        let h = prox_m_sparse_nonneg(arr.view(), budget(m));
        // feasibility: nonnegative, at most m exact nonzeros
        prop_assert!(h.iter().all(|&x| x >= 0.0));
        prop_assert!(h.iter().filter(|&&x| x != 0.0).count() <= m);
        // kept entries are bit-identical to the input
        for i in 0..v.len() {
            prop_assert!(h[i] == 0.0 || h[i] == v[i]);
        }
        // distance matches the exhaustive oracle
        let dist = norm((&arr - &h).view());
        let best = brute_force_prox_distance(&v, m);
        prop_assert!((dist - best).abs() <= 1e-12);
        // idempotence, exactly
        let hh = prox_m_sparse_nonneg(h.view(), budget(m));
        prop_assert_eq!(&hh, &h);
        // norm contraction
        prop_assert!(norm(h.view()) <= norm(arr.view()) + 1e-15);
    }

    #[test]
    fn prox_scaling_equivariance(
        v in proptest::collection::vec(-5.0f64..5.0, 1..10),
        m in 1usize..4,
        c in prop::sample::select(vec![0.5f64, 2.0, 4.0, 0.25]),
    ) {
        // dyadic scales keep the arithmetic exact
        let arr = Array1::from(v);
        let scaled = prox_m_sparse_nonneg((&arr * c).view(), budget(m));
        let direct = prox_m_sparse_nonneg(arr.view(), budget(m)) * c;
        prop_assert_eq!(scaled, direct);
    }

    #[test]
    fn evolve_conserves_unit_sum(
        raw in proptest::collection::vec(0.0f64..1.0, 2..8),
        x in proptest::collection::vec(0.5f64..1.5, 8),
    ) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-3);
        let w = Array1::from(raw.iter().map(|r| r / total).collect::<Vec<_>>());
        let x = Array1::from(x[..w.len()].to_vec());
        let evolved = evolve_weights(w.view(), x.view());
        prop_assert!((evolved.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(evolved.iter().all(|&e| e >= 0.0));
    }
}

#[test]
fn sharpe_homogeneity() {
    let mut r = rng(11);
    for _ in 0..50 {
        let model = random_model(&mut r, 12, 6, 1e-3);
        let w = Array1::from(uniform_vec(&mut r, 6, 0.0, 1.0));
        if w.iter().all(|&x| x == 0.0) {
            continue;
        }
        let base = model.sharpe(w.view()).unwrap();
        for c in [0.1, 1.0, 10.0] {
            let scaled = model.sharpe((&w * c).view()).unwrap();
            assert!(
                (scaled - base).abs() <= 1e-12 * base.abs().max(1.0),
                "sharpe not scale invariant: {base} vs {scaled} at c={c}"
            );
        }
    }
}

#[test]
fn centering_annihilates_column_sums() {
    let mut r = rng(12);
    for _ in 0..20 {
        let t = 3 + (uniform(&mut r, 0.0, 30.0) as usize);
        let n = 1 + (uniform(&mut r, 0.0, 8.0) as usize);
        let values = Array2::from_shape_vec((t, n), uniform_vec(&mut r, t * n, -0.2, 0.2)).unwrap();
        let returns = ReturnsMatrix::new(values).unwrap();
        let model = sparse_sharpe::compute_moments(&returns, 1e-3).unwrap();
        for j in 0..n {
            let col = model.q().column(j).to_owned();
            let magnitude = col.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
            let sum: f64 = col.sum();
            assert!(sum.abs() <= 1e-10 * (t as f64) * magnitude.max(1e-30));
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(13);
    for _ in 0..25 {
        let model = random_model(&mut r, 10, 5, 1e-3);
        let v = Array1::from(uniform_vec(&mut r, 5, -2.0, 2.0));
        let g = model.gradient(v.view()).unwrap();
        let fd = finite_diff_gradient(&model, v.view());
        let err = norm((&g - &fd).view());
        assert!(err <= 1e-5 * (1.0 + norm(g.view())));
    }
}

#[test]
fn strong_convexity_and_lipschitz_witnesses() {
    let mut r = rng(14);
    for _ in 0..40 {
        let model = random_model(&mut r, 9, 4, 1e-2);
        let x = Array1::from(uniform_vec(&mut r, 4, -3.0, 3.0));
        let y = Array1::from(uniform_vec(&mut r, 4, -3.0, 3.0));
        let fx = model.objective(x.view()).unwrap();
        let fy = model.objective(y.view()).unwrap();
        let gx = model.gradient(x.view()).unwrap();
        let gy = model.gradient(y.view()).unwrap();
        let diff = &y - &x;
        let inner = gx.dot(&diff);
        let d2 = diff.dot(&diff);
        // eps-strong convexity
        assert!(
            fy - fx >= inner + 0.5 * model.eps() * d2 - 1e-10 * (1.0 + fx.abs() + fy.abs())
        );
        // gradient Lipschitz with constant lambda1
        let glip = norm((&gx - &gy).view());
        assert!(glip <= model.lambda1() * d2.sqrt() * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn objective_bounded_below_by_unconstrained_minimum() {
    let mut r = rng(15);
    for _ in 0..25 {
        let model = random_model(&mut r, 8, 4, 1e-2);
        let q_eps = dense_q_eps(&model);
        let v_free = gauss_solve(&q_eps, &model.p().to_owned());
        let f_min = model.objective(v_free.view()).unwrap();
        for _ in 0..20 {
            let v = Array1::from(uniform_vec(&mut r, 4, -5.0, 5.0));
            let f = model.objective(v.view()).unwrap();
            assert!(f >= f_min - 1e-9 * (1.0 + f_min.abs()));
        }
    }
}

#[test]
fn spectral_upper_bound_vs_jacobi() {
    let mut r = rng(16);
    for _ in 0..20 {
        let model = random_model(&mut r, 7, 5, 1e-3);
        let lam_hat = model.lambda1();
        let lam_true = jacobi_eigen_max(&dense_q_eps(&model));
        assert!(
            lam_hat >= lam_true * (1.0 - 1e-9),
            "estimate {lam_hat} below true {lam_true}"
        );
        assert!(
            lam_hat <= lam_true * (1.0 + 2e-6),
            "estimate {lam_hat} too loose vs {lam_true}"
        );
    }
}

#[test]
fn solve_iterates_feasible_and_decreasing() {
    let mut r = rng(17);
    for _ in 0..15 {
        let model = random_model(&mut r, 12, 6, 1e-3);
        let config = SolverConfig::new(budget(3))
            .with_tol(1e-12)
            .with_trace(true)
            .with_max_iter(50_000);
        let res = solve(&model, &config).unwrap();
        let trace = res.objective_trace.as_ref().unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "trace increased: {} -> {}", w[0], w[1]);
        }
        // terminal iterate feasible
        assert!(res.v_star.iter().all(|&x| x >= 0.0));
        assert!(res.v_star.iter().filter(|&&x| x != 0.0).count() <= 3);
        // portfolio invariants
        let w = res.portfolio.weights();
        assert!(w.iter().all(|&x| x >= 0.0));
        let sum = w.sum();
        assert!(res.portfolio.is_zero() || (sum - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn converged_runs_satisfy_fixed_point_bound() {
    let mut r = rng(18);
    let mut converged_seen = 0;
    for _ in 0..30 {
        let model = random_model(&mut r, 15, 8, 1e-3);
        let config = SolverConfig::new(budget(3))
            .with_tol(1e-8)
            .with_max_iter(200_000);
        let res = solve(&model, &config).unwrap();
        if !res.converged {
            continue;
        }
        converged_seen += 1;
        let alpha = config.step_safety / model.lambda1();
        let residual = check_fixed_point(&model, res.v_star.view(), alpha, budget(3));
        assert!(residual <= 1e-6 * (1.0 + norm(res.v_star.view())));
    }
    assert!(converged_seen >= 25, "only {converged_seen} runs converged");
}

#[test]
fn convergence_rate_tail_is_bounded() {
    let mut r = rng(19);
    for _ in 0..10 {
        let model = random_model(&mut r, 12, 6, 1e-2);
        let config = SolverConfig::new(budget(2))
            .with_tol(0.0)
            .with_trace(true)
            .with_max_iter(3_000);
        let res = solve(&model, &config).unwrap();
        let trace = res.objective_trace.unwrap();
        let f_star = *trace.last().unwrap();
        let gaps: Vec<f64> = trace.iter().map(|f| f - f_star).collect();
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let k0 = gaps.len() / 2;
        let head = (k0 as f64) * gaps[k0];
        for (k, gap) in gaps.iter().enumerate().skip(k0) {
            let scaled = (k as f64) * gap;
            assert!(
                scaled <= 2.0 * head + 1e-10,
                "k*gap grew along the tail: {scaled} vs {head}"
            );
        }
    }
}

#[test]
fn steps_vanish_and_are_square_summable() {
    // the descent inequality caps sum ||v_{k+1} - v_k||^2 by (F(v_1) - F_min)/a
    let mut r = rng(26);
    for _ in 0..10 {
        let model = random_model(&mut r, 12, 6, 1e-2);
        let config = SolverConfig::new(budget(2))
            .with_tol(0.0)
            .with_trace(true)
            .with_max_iter(2_000);
        let res = solve(&model, &config).unwrap();
        let alpha = config.step_safety / model.lambda1();
        let a = 0.5 * (1.0 / alpha - model.lambda1());

        // replay the iteration to collect step norms
        let mut v = model.p().to_owned();
        let mut steps = Vec::new();
        for _ in 0..res.iterations {
            let next = {
                let g = model.gradient(v.view()).unwrap();
                let y = &v - &(g * alpha);
                sparse_sharpe::prox_m_sparse_nonneg(y.view(), budget(2))
            };
            steps.push(norm((&next - &v).view()));
            v = next;
        }
        let trace = res.objective_trace.unwrap();
        // v0 = p may be infeasible, so the trace starts at F(v_1) and the
        // descent inequality covers the steps from v_1 onward
        let f_first = trace[0];
        let f_last = *trace.last().unwrap();
        let sum_sq: f64 = steps.iter().skip(1).map(|s| s * s).sum();
        assert!(
            a * sum_sq <= (f_first - f_last) + 1e-9,
            "square-summability bound violated: a*sum = {} vs drop = {}",
            a * sum_sq,
            f_first - f_last
        );
        // steps vanish along the run
        let head: f64 = steps.iter().take(10).cloned().fold(0.0, f64::max);
        let tail: f64 = steps.iter().rev().take(10).cloned().fold(0.0, f64::max);
        assert!(tail <= head.max(1e-12));
        assert!(*steps.last().unwrap() <= 1e-10 * (1.0 + norm(v.view())));
    }
}

#[test]
fn subtraction_form_identity_at_oracle_optima() {
    let mut r = rng(20);
    let mut eper_count = 0;
    for _ in 0..25 {
        let model = random_model(&mut r, 10, 6, 1e-3);
        if !sparse_sharpe::check_eper(&model) {
            continue;
        }
        eper_count += 1;
        let (v_hat, _) = solve_global_exhaustive(&model, budget(2)).unwrap();
        let ptv = model.p().dot(&v_hat);
        let quad = v_hat.dot(&model.apply_q_eps(v_hat.view()));
        assert!(
            (ptv - quad).abs() <= 1e-8 * (1.0 + ptv.abs()),
            "p'v = {ptv} vs v'Qv = {quad}"
        );
        assert!(ptv > 0.0);
    }
    assert!(eper_count >= 20);
}

#[test]
fn oracle_restricted_solutions_satisfy_kkt() {
    let mut r = rng(21);
    for _ in 0..20 {
        let model = random_model(&mut r, 10, 7, 1e-3);
        let support: Vec<usize> = match uniform(&mut r, 0.0, 3.0) as usize {
            0 => vec![0],
            1 => vec![1, 4],
            _ => vec![0, 2, 5],
        };
        let v = sparse_sharpe::solve_nnqp_on_support(&model, &support).unwrap();
        let g = model.gradient(v.view()).unwrap();
        for &i in &support {
            if v[i] > 0.0 {
                assert!(g[i].abs() <= 1e-8, "interior gradient {} at {i}", g[i]);
            } else {
                assert!(g[i] >= -1e-8, "active-at-zero gradient {} at {i}", g[i]);
            }
        }
        for i in 0..7 {
            if !support.contains(&i) {
                assert_eq!(v[i], 0.0);
            }
        }
    }
}

#[test]
fn cost_model_monotonicity_and_zero_rate_identity() {
    let mut r = rng(22);
    for _ in 0..20 {
        let n = 4;
        let periods = 6;
        let mut weights = Vec::new();
        let mut relatives = Vec::new();
        let mut rets = Vec::new();
        for _ in 0..periods {
            let w = if uniform(&mut r, 0.0, 1.0) < 0.2 {
                SparsePortfolio::zero(n)
            } else {
                let raw = Array1::from(uniform_vec(&mut r, n, 0.0, 1.0));
                let sum = raw.sum();
                SparsePortfolio::new(raw / sum).unwrap()
            };
            let x = Array1::from(uniform_vec(&mut r, n, 0.85, 1.15));
            rets.push(if w.is_zero() {
                0.0
            } else {
                w.weights().dot(&x) - 1.0
            });
            weights.push(w);
            relatives.push(x);
        }
        let w0 = wealth_with_costs(&weights, &relatives, 0.0, 1.0).unwrap();
        let cw = cumulative_wealth(&rets, 1.0).unwrap();
        assert_eq!(w0, cw, "zero-rate wealth differs from cumulative wealth");
        let mut prev = w0;
        for nu in [0.001, 0.005, 0.02] {
            let w = wealth_with_costs(&weights, &relatives, nu, 1.0).unwrap();
            assert!(w <= prev + 1e-15);
            prev = w;
        }
    }
}

#[test]
fn backtest_window_independence() {
    // perturbing data before the windows of the kept periods leaves the
    // shared suffix of weights unchanged
    let mut r = rng(23);
    let total = 26;
    let n = 4;
    let window = 8;
    let base = Array2::from_shape_vec(
        (total, n),
        uniform_vec(&mut r, total * n, -0.05, 0.06),
    )
    .unwrap();
    let mut perturbed = base.clone();
    for j in 0..n {
        perturbed[[0, j]] += 0.01;
        perturbed[[1, j]] -= 0.02;
    }
    let solver = SolverConfig::new(budget(2));
    let config = BacktestConfig::new(window, solver);
    let a = run_backtest(&ReturnsMatrix::new(base).unwrap(), &config).unwrap();
    let b = run_backtest(&ReturnsMatrix::new(perturbed).unwrap(), &config).unwrap();
    // periods whose fitting windows start at row >= 2 are unaffected
    for t in 2..a.weights_by_period.len() {
        assert_eq!(
            a.weights_by_period[t].weights(),
            b.weights_by_period[t].weights(),
            "weights differ at out-of-sample period {t}"
        );
        assert_eq!(a.portfolio_returns[t], b.portfolio_returns[t]);
    }
}

#[test]
fn sparsity_respects_budget_in_backtests() {
    let mut r = rng(24);
    let values =
        Array2::from_shape_vec((40, 6), uniform_vec(&mut r, 240, -0.04, 0.05)).unwrap();
    let returns = ReturnsMatrix::new(values).unwrap();
    for m in [1, 2, 4] {
        let config = BacktestConfig::new(12, SolverConfig::new(budget(m)));
        let result = run_backtest(&returns, &config).unwrap();
        assert!(result
            .weights_by_period
            .iter()
            .all(|w| w.support_size() <= m));
        let (mean, std) = sparsity_stats(&result.weights_by_period).unwrap();
        assert!(mean <= m as f64 && std >= 0.0);
    }
}

#[test]
fn sample_sharpe_of_constant_shifted_noise() {
    // degenerate and near-degenerate sequences
    assert!(sample_sharpe(&[0.02, 0.02]).is_err());
    let s = sample_sharpe(&[0.01, 0.03]).unwrap();
    assert!((s - 0.02 / (0.0002f64).sqrt()).abs() < 1e-12);
}
