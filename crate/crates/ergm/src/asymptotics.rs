//! Closed-form reference quantities for the offset model: the Poisson
//! degree limit of the edges-plus-offset model and expected degrees under
//! block mixing, both at finite n and in the large-n limit.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::terms::ilogit;

/// Limiting degree pmf of the edges-plus-offset model: Poisson(e^theta).
pub fn poisson_limit_pmf(theta: f64, d: usize) -> f64 {
    let lambda = theta.exp();
    (d as f64 * theta - lambda - ln_gamma(d as f64 + 1.0)).exp()
}

/// Exact degree pmf at finite n: Binomial(n-1, ilogit(theta - log n)).
pub fn finite_n_degree_pmf(theta: f64, n: usize, d: usize) -> f64 {
    assert!(n >= 2, "need at least two nodes");
    assert!(d <= n - 1, "degree {d} impossible with {n} nodes");
    let p = ilogit(theta - (n as f64).ln());
    let m = (n - 1) as f64;
    let k = d as f64;
    let ln_choose = ln_gamma(m + 1.0) - ln_gamma(k + 1.0) - ln_gamma(m - k + 1.0);
    (ln_choose + k * p.ln() + (m - k) * (1.0 - p).ln()).exp()
}

/// Group proportions and a symmetric matrix of mixing coefficients.
/// Entries of `eta` may be negative infinity to forbid a mixing cell.
#[derive(Clone, Debug)]
pub struct MixingSpec {
    pub proportions: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
}

impl MixingSpec {
    pub fn new(proportions: Vec<f64>, eta: Vec<Vec<f64>>) -> Result<Self> {
        let k = proportions.len();
        let total: f64 = proportions.iter().sum();
        if proportions.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::ModelMismatch(
                "group proportions must be nonnegative and sum to 1".into(),
            ));
        }
        if eta.len() != k || eta.iter().any(|row| row.len() != k) {
            return Err(Error::ModelMismatch(format!(
                "mixing matrix must be {k}x{k}"
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let (x, y) = (eta[a][b], eta[b][a]);
                if x != y && !(x.is_nan() && y.is_nan()) {
                    return Err(Error::ModelMismatch(
                        "mixing matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(MixingSpec { proportions, eta })
    }

    pub fn n_groups(&self) -> usize {
        self.proportions.len()
    }
}

/// Limiting expected degree of an actor in `group`: the availability of
/// each partner group times e^eta for that pair, summed over groups.
pub fn mixing_expected_degree(spec: &MixingSpec, group: usize) -> f64 {
    spec.proportions
        .iter()
        .zip(&spec.eta[group])
        .map(|(&p, &eta)| if eta == f64::NEG_INFINITY { 0.0 } else { p * eta.exp() })
        .sum()
}

/// Exact finite-n expected degree of an actor in `group` when the groups
/// have the given sizes. The sum runs over the other n-1 actors, so the
/// actor's own group contributes size-1 terms; the difference from the
/// limiting form vanishes as 1/n.
pub fn finite_n_mixing_degree(spec: &MixingSpec, group_sizes: &[usize], group: usize) -> f64 {
    assert_eq!(group_sizes.len(), spec.n_groups(), "group count mismatch");
    let n: usize = group_sizes.iter().sum();
    let log_n = (n as f64).ln();
    let mut total = 0.0;
    for (k, &size) in group_sizes.iter().enumerate() {
        let eta = spec.eta[group][k];
        if eta == f64::NEG_INFINITY {
            continue;
        }
        let others = if k == group { size.saturating_sub(1) } else { size };
        total += others as f64 * ilogit(eta - log_n);
    }
    total
}
