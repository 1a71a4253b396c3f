//! Proximity operator of the indicator of Omega = {v >= 0, ||v||_0 <= m}.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of active assets in a portfolio (the `m` of the m-sparse
/// constraint). Always at least 1; the upper bound m <= N is checked where
/// the asset count is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparsityBudget(usize);

impl SparsityBudget {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "sparsity budget m must be at least 1".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Nearest point of Omega to `v`: keep the m largest strictly positive
/// entries and zero out everything else. If `v` has at most m positive
/// entries, all of them survive. Ties among equal positive values are
/// broken toward the lowest index so the selection is deterministic.
/// Pruned entries are written as exact zeros.
pub fn prox_m_sparse_nonneg(v: ArrayView1<f64>, m: SparsityBudget) -> Array1<f64> {
    let m = m.get();
    let mut positive: Vec<usize> = (0..v.len()).filter(|&j| v[j] > 0.0).collect();
    if positive.len() > m {
        positive.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        positive.truncate(m);
    }
    let mut h = Array1::zeros(v.len());
    for &j in &positive {
        h[j] = v[j];
    }
    h
}

/// Whether `v` lies in Omega for the given budget.
pub fn in_omega(v: ArrayView1<f64>, m: SparsityBudget) -> bool {
    v.iter().all(|&x| x >= 0.0) && v.iter().filter(|&&x| x > 0.0).count() <= m.get()
}
