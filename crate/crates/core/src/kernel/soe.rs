//! Sum-of-exponentials approximation of convolution kernels, which turns a
//! TSPL kernel into a finite set of Markovian factors.

use super::{ExpFactors, KernelSpec};
use crate::error::{Error, Result};
use crate::lsq::solve_box_qp;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SoeFit<T> {
    pub factors: ExpFactors<T>,
    /// Largest relative error on the fitting grid.
    pub max_rel_error: T,
    /// Root-mean-square relative error on the fitting grid.
    pub rms_rel_error: T,
}

/// Fits `K(u) ≈ Σ_j w_j e^{-μ_j u}` with `terms` rates spread geometrically
/// over `[1/max_lag, 1/min_lag]`, non-negative weights, relative least
/// squares on a log-spaced lag grid (plus `u = 0`).
pub fn fit_sum_of_exponentials<T: Scalar>(
    kernel: &KernelSpec<T>,
    terms: usize,
    min_lag: T,
    max_lag: T,
) -> Result<SoeFit<T>> {
    if !(2..=8).contains(&terms) {
        return Err(Error::InvalidArgument(format!("sum-of-exponentials needs 2..=8 terms, got {terms}")));
    }
    if !(min_lag > T::zero() && max_lag > min_lag && max_lag.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid lag range [{min_lag}, {max_lag}]")));
    }
    if !kernel.is_convolution() {
        return Err(Error::Contract("sum-of-exponentials fit needs a convolution kernel".into()));
    }
    let n_grid = 240;
    let log_lo = min_lag.ln();
    let log_hi = max_lag.ln();
    let mut lags = vec![T::zero()];
    for i in 0..n_grid {
        let w = T::from_usize_lossy(i) / T::from_usize_lossy(n_grid - 1);
        lags.push((log_lo + (log_hi - log_lo) * w).exp());
    }
    let targets: Vec<T> = lags.iter().map(|&u| kernel.lag_value(u).unwrap_or_else(T::zero)).collect();

    let rate_lo = max_lag.recip();
    let rate_hi = min_lag.recip();
    let rates: Vec<T> = (0..terms)
        .map(|j| {
            let w = T::from_usize_lossy(j) / T::from_usize_lossy(terms - 1);
            (rate_lo.ln() + (rate_hi.ln() - rate_lo.ln()) * w).exp()
        })
        .collect();

    // Relative residuals: row i scaled by 1 / K(u_i).
    let rows: Vec<Vec<T>> =
        lags.iter().zip(&targets).map(|(&u, &k)| rates.iter().map(|&r| (-r * u).exp() / k).collect()).collect();
    let m = terms;
    let mut h = vec![vec![T::zero(); m]; m];
    let mut g = vec![T::zero(); m];
    for row in &rows {
        for i in 0..m {
            g[i] += row[i];
            for j in 0..m {
                h[i][j] += row[i] * row[j];
            }
        }
    }
    let lower = vec![T::zero(); m];
    let upper = vec![T::infinity(); m];
    let sol = solve_box_qp(&h, &g, &lower, &upper)?;
    let factors = ExpFactors { weights: sol.x, rates };

    let mut max_rel = T::zero();
    let mut sq = T::zero();
    for (&u, &k) in lags.iter().zip(&targets) {
        let rel = ((factors.value(u) - k) / k).abs();
        max_rel = max_rel.max(rel);
        sq += rel * rel;
    }
    let rms = (sq / T::from_usize_lossy(lags.len())).sqrt();
    Ok(SoeFit { factors, max_rel_error: max_rel, rms_rel_error: rms })
}
