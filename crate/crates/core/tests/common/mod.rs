#![allow(dead_code)]

//! Independent oracles used by the integration suites. Everything here is
//! deliberately written against the math, not the library internals.

use itertools::Itertools;
use ndarray::{Array1, Array2, ArrayView1};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sparse_sharpe::MomentModel;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

pub fn uniform_vec(rng: &mut ChaCha20Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, lo, hi)).collect()
}

/// Random well-behaved instance with a dense factor and mixed-sign means.
pub fn random_model(rng: &mut ChaCha20Rng, t: usize, n: usize, eps: f64) -> MomentModel {
    let q = Array2::from_shape_vec((t, n), uniform_vec(rng, t * n, -1.0, 1.0)).unwrap();
    let p = Array1::from(uniform_vec(rng, n, -1.0, 1.0));
    MomentModel::from_factors(p, q, eps).unwrap()
}

/// Exhaustive minimum of ||u - v|| over u in Omega = {u >= 0, ||u||_0 <= m}.
/// On a fixed support the optimal u clamps v at zero, so the squared
/// distance is sum of off-support v_i^2 plus on-support min(v_i, 0)^2.
pub fn brute_force_prox_distance(v: &[f64], m: usize) -> f64 {
    let n = v.len();
    let m = m.min(n);
    let mut best = f64::INFINITY;
    for support in (0..n).combinations(m) {
        let mut d2 = 0.0;
        let mut idx = 0;
        for (i, &x) in v.iter().enumerate() {
            let on_support = idx < support.len() && support[idx] == i;
            if on_support {
                idx += 1;
                if x < 0.0 {
                    d2 += x * x;
                }
            } else {
                d2 += x * x;
            }
        }
        if d2 < best {
            best = d2;
        }
    }
    best.sqrt()
}

/// Largest eigenvalue of a symmetric matrix by the cyclic Jacobi method.
pub fn jacobi_eigen_max(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).fold(f64::NEG_INFINITY, f64::max)
}

/// Dense Q_eps = Q'Q + eps I of a model.
pub fn dense_q_eps(model: &MomentModel) -> Array2<f64> {
    let q = model.q();
    let n = model.n_assets();
    let mut g = q.t().dot(&q);
    for i in 0..n {
        g[[i, i]] += model.eps();
    }
    g
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[pivot, k]];
                m[[pivot, k]] = tmp;
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = m[[row, col]] / m[[col, col]];
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        for k in (col + 1)..n {
            let xk = x[k];
            x[col] -= m[[col, k]] * xk;
        }
        x[col] /= m[[col, col]];
    }
    x
}

/// Central finite differences of the model objective.
pub fn finite_diff_gradient(model: &MomentModel, v: ArrayView1<f64>) -> Array1<f64> {
    let n = v.len();
    let mut g = Array1::zeros(n);
    for i in 0..n {
        let h = 1e-5 * (1.0 + v[i].abs());
        let mut vp = v.to_owned();
        let mut vm = v.to_owned();
        vp[i] += h;
        vm[i] -= h;
        g[i] = (model.objective(vp.view()).unwrap() - model.objective(vm.view()).unwrap())
            / (2.0 * h);
    }
    g
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}
