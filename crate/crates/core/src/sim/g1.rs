//! Path-specific history term `g1(t) = ∫_{-Δ}^0 K1(s, t) σ_s dW_s`.
//!
//! Finite history intervals use the left-point sum `Σ K1(s_i, t) σ_i ΔW_i`.
//! An unbounded tail `(-inf, s_0)` is represented by a few standard normals:
//! per-factor Gaussians with their exact covariance for exponential-type
//! kernels, or geometric cells with exact per-cell variance otherwise, cut
//! where the remaining mass of `K1²` drops below [`TAIL_MASS_TOL`].

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg::symmetric_eigen;
use crate::model::{Betas, HistorySegment};
use crate::scalar::Scalar;

/// Relative `K1²` mass allowed beyond the last tail cell.
pub const TAIL_MASS_TOL: f64 = 1e-12;

const MAX_TAIL_CELLS: usize = 400;
const TAIL_GROWTH: f64 = 1.25;

/// Past Brownian noise for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PastNoise<T> {
    /// One increment per finite history interval, variance = interval length.
    pub intervals: Vec<T>,
    /// Standard normals driving the unbounded tail.
    pub tail: Vec<T>,
}

impl<T: Scalar> PastNoise<T> {
    pub fn zeros(n_intervals: usize, tail_dim: usize) -> Self {
        Self { intervals: vec![T::zero(); n_intervals], tail: vec![T::zero(); tail_dim] }
    }
}

#[derive(Debug, Clone)]
enum Plan<T> {
    Zero,
    /// `g1(t_n) = Σ_j w_j e^{-μ_j t_n} G_j`.
    Factors {
        weights: Vec<T>,
        /// `decay[j][n] = e^{-μ_j t_n}`.
        decay: Vec<Vec<T>>,
        /// `coef[j][i] = e^{μ_j s_i} σ_i`.
        coef: Vec<Vec<T>>,
        /// `G_tail = tail_map · z`.
        tail_map: Vec<Vec<T>>,
    },
    /// `g1(t_n) = e^{h(t_n) - h(0)} g1(0)`.
    Separable {
        ratio: Vec<T>,
        coef: Vec<T>,
        tail_std: T,
    },
    /// Direct sums for convolution kernels without an exponential form.
    General {
        kernel: KernelSpec<T>,
        times: Vec<T>,
        starts: Vec<T>,
        sigmas: Vec<T>,
        /// `tail[c][n]`: standard deviation of tail cell `c` at `t_n`.
        tail: Vec<Vec<T>>,
    },
}

/// Precomputed map from [`PastNoise`] to `g1` on a fixed time grid.
#[derive(Debug, Clone)]
pub struct G1Plan<T> {
    plan: Plan<T>,
    n_intervals: usize,
    tail_dim: usize,
    n_times: usize,
}

impl<T: Scalar> G1Plan<T> {
    /// `zero` forces `g1 ≡ 0`. `cell_width` is the width of the first tail
    /// cell for kernels without an exponential form.
    pub fn new(
        k1: &KernelSpec<T>,
        history: &HistorySegment<T>,
        betas: &Betas<T>,
        t_grid: &[T],
        cell_width: T,
        zero: bool,
    ) -> Result<Self> {
        history.validate()?;
        let n_intervals = history.n_intervals();
        let n_times = t_grid.len();
        if zero || history.is_empty() {
            return Ok(Self { plan: Plan::Zero, n_intervals, tail_dim: 0, n_times });
        }
        if t_grid.iter().any(|&t| !(t >= T::zero()) || !t.is_finite()) {
            return Err(Error::InvalidArgument("g1 time grid must lie in [0, +inf)".into()));
        }
        let sigmas = history.sigmas(betas);
        let starts: Vec<T> = history.times()[..n_intervals].to_vec();
        let tail_sigma = sigmas[0];
        let s0 = history.times()[0];
        let has_tail = history.is_unbounded() && tail_sigma != T::zero();

        if let Some(f) = k1.exp_factors() {
            let lo = k1.support_start();
            let decay = f.rates.iter().map(|&m| t_grid.iter().map(|&t| (-m * t).exp()).collect()).collect();
            let coef = f
                .rates
                .iter()
                .map(|&m| {
                    starts
                        .iter()
                        .zip(&sigmas)
                        .map(|(&s, &sig)| if s < lo { T::zero() } else { (m * s).exp() * sig })
                        .collect()
                })
                .collect();
            let tail_map = if has_tail && lo < s0 { factor_tail_map(&f.rates, s0, lo, tail_sigma) } else { Vec::new() };
            let tail_dim = tail_map.first().map_or(0, Vec::len);
            return Ok(Self {
                plan: Plan::Factors { weights: f.weights, decay, coef, tail_map },
                n_intervals,
                tail_dim,
                n_times,
            });
        }

        if let (Some(sep), KernelFamily::ShiftedPower { .. }) = (k1.separable_decomposition(), k1.family()) {
            let h0 = sep.h(T::zero());
            let ratio = t_grid.iter().map(|&t| (sep.h(t) - h0).exp()).collect();
            let coef = starts
                .iter()
                .zip(&sigmas)
                .map(|(&s, &sig)| k1.evaluate(s, T::zero()).map(|k| k * sig))
                .collect::<Result<_>>()?;
            let tail_std = if has_tail {
                tail_sigma.abs() * k1.integral(T::two(), T::neg_infinity(), s0, T::zero())?.sqrt()
            } else {
                T::zero()
            };
            let tail_dim = usize::from(tail_std > T::zero());
            return Ok(Self { plan: Plan::Separable { ratio, coef, tail_std }, n_intervals, tail_dim, n_times });
        }

        let tail = if has_tail { geometric_tail(k1, s0, tail_sigma, t_grid, cell_width)? } else { Vec::new() };
        let tail_dim = tail.len();
        Ok(Self {
            plan: Plan::General { kernel: *k1, times: t_grid.to_vec(), starts, sigmas, tail },
            n_intervals,
            tail_dim,
            n_times,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    /// Number of standard normals the unbounded tail consumes.
    pub fn tail_dim(&self) -> usize {
        self.tail_dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.plan, Plan::Zero)
    }

    /// Writes `g1` on the grid into `out`.
    pub fn evaluate(&self, noise: &PastNoise<T>, out: &mut [T]) -> Result<()> {
        if out.len() != self.n_times {
            return Err(Error::DimensionMismatch(format!(
                "g1 output has {} slots for {} times",
                out.len(),
                self.n_times
            )));
        }
        if !self.is_zero() && (noise.intervals.len() != self.n_intervals || noise.tail.len() != self.tail_dim) {
            return Err(Error::DimensionMismatch(format!(
                "past noise has {} increments and {} tail draws, expected {} and {}",
                noise.intervals.len(),
                noise.tail.len(),
                self.n_intervals,
                self.tail_dim
            )));
        }
        match &self.plan {
            Plan::Zero => out.iter_mut().for_each(|v| *v = T::zero()),
            Plan::Factors { weights, decay, coef, tail_map } => {
                let totals: Vec<T> = coef
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let past: T = c.iter().zip(&noise.intervals).map(|(&a, &w)| a * w).sum();
                        let tail: T = tail_map
                            .get(j)
                            .map_or(T::zero(), |row| row.iter().zip(&noise.tail).map(|(&a, &z)| a * z).sum());
                        weights[j] * (past + tail)
                    })
                    .collect();
                for (n, v) in out.iter_mut().enumerate() {
                    *v = totals.iter().zip(decay).map(|(&g, d)| g * d[n]).sum();
                }
            }
            Plan::Separable { ratio, coef, tail_std } => {
                let mut g0: T = coef.iter().zip(&noise.intervals).map(|(&a, &w)| a * w).sum();
                if let Some(&z) = noise.tail.first() {
                    g0 += *tail_std * z;
                }
                for (v, &r) in out.iter_mut().zip(ratio) {
                    *v = r * g0;
                }
            }
            Plan::General { kernel, times, starts, sigmas, tail } => {
                let weighted: Vec<T> = sigmas.iter().zip(&noise.intervals).map(|(&s, &w)| s * w).collect();
                for (n, v) in out.iter_mut().enumerate() {
                    let t = times[n];
                    let mut acc = T::zero();
                    for (&s, &x) in starts.iter().zip(&weighted) {
                        if x != T::zero() {
                            acc += kernel.evaluate(s, t)? * x;
                        }
                    }
                    for (row, &z) in tail.iter().zip(&noise.tail) {
                        acc += row[n] * z;
                    }
                    *v = acc;
                }
            }
        }
        Ok(())
    }
}

/// Loading matrix `L` with `L Lᵀ = Cov(G_tail)`, where
/// `G_tail_j = σ ∫_{lo}^{s0} e^{μ_j s} dW_s`.
fn factor_tail_map<T: Scalar>(rates: &[T], s0: T, lo: T, sigma: T) -> Vec<Vec<T>> {
    let m = rates.len();
    let mut cov = vec![vec![T::zero(); m]; m];
    for j in 0..m {
        for k in 0..m {
            let r = rates[j] + rates[k];
            let upper = (r * s0).exp();
            let lower = if lo.is_finite() { (r * lo).exp() } else { T::zero() };
            cov[j][k] = sigma * sigma * (upper - lower) / r;
        }
    }
    let (vals, vecs) = symmetric_eigen(&cov);
    (0..m).map(|j| (0..m).map(|k| vecs[j][k] * vals[k].max(T::zero()).sqrt()).collect()).collect()
}

/// Geometric cells `(edge_{c+1}, edge_c]` growing backwards from `s0`, with
/// per-cell standard deviation `|σ| sqrt(∫_cell K1(s, t_n)² ds)`.
fn geometric_tail<T: Scalar>(k1: &KernelSpec<T>, s0: T, sigma: T, t_grid: &[T], first_width: T) -> Result<Vec<Vec<T>>> {
    let total = k1.integral(T::two(), T::neg_infinity(), s0, T::zero())?;
    if !total.is_finite() {
        return Err(Error::Contract("K1 is not square-integrable over the unbounded history".into()));
    }
    if total == T::zero() {
        return Ok(Vec::new());
    }
    let mut edges = vec![s0];
    let mut width = first_width;
    while edges.len() <= MAX_TAIL_CELLS {
        let last = *edges.last().unwrap_or(&s0);
        let next = (last - width).max(k1.support_start());
        edges.push(next);
        let rest = k1.integral(T::two(), T::neg_infinity(), next, T::zero())?;
        if rest <= T::lit(TAIL_MASS_TOL) * total || next <= k1.support_start() {
            break;
        }
        width *= T::lit(TAIL_GROWTH);
    }
    edges
        .windows(2)
        .map(|w| {
            t_grid
                .iter()
                .map(|&t| Ok(sigma.abs() * k1.integral(T::two(), w[1], w[0], t)?.sqrt()))
                .collect::<Result<Vec<T>>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn betas() -> Betas<f64> {
        Betas::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn zero_noise_gives_zero() {
        let k = KernelSpec::tspl(1.5, 0.05, f64::INFINITY).unwrap();
        let h = HistorySegment::constant(0.0, 0.04, 1.0).unwrap();
        let plan = G1Plan::new(&k, &h, &betas(), &[0.0, 0.5], 0.01, false).unwrap();
        let mut out = vec![1.0; 2];
        plan.evaluate(&PastNoise::zeros(1, plan.tail_dim()), &mut out).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn factor_plan_matches_left_point_sum() {
        let k = KernelSpec::convex_combo(0.3, 2.0, 20.0).unwrap();
        let times = vec![-1.0, -0.6, -0.25, 0.0];
        let h = HistorySegment::new(times.clone(), vec![0.0; 4], vec![0.04, 0.09, 0.01, 0.0], false).unwrap();
        let grid = [0.0, 0.1, 0.7];
        let plan = G1Plan::new(&k, &h, &betas(), &grid, 0.01, false).unwrap();
        let dw = vec![0.3, -0.2, 0.1];
        let mut out = vec![0.0; 3];
        plan.evaluate(&PastNoise { intervals: dw.clone(), tail: vec![] }, &mut out).unwrap();
        let sig = [0.2, 0.3, 0.1];
        for (n, &t) in grid.iter().enumerate() {
            let want: f64 = (0..3).map(|i| k.evaluate(times[i], t).unwrap() * sig[i] * dw[i]).sum();
            assert_relative_eq!(out[n], want, max_relative = 1e-12);
        }
    }

    #[test]
    fn exponential_tail_has_exact_variance() {
        // Var g1(t) = σ² λ/2 e^{-2λt} for Δ = ∞
        let k = KernelSpec::exponential(10.0).unwrap();
        let h = HistorySegment::constant(0.0, 0.04, f64::INFINITY).unwrap();
        let plan = G1Plan::new(&k, &h, &betas(), &[0.0, 0.2], 0.01, false).unwrap();
        assert_eq!(plan.tail_dim(), 1);
        let mut out = vec![0.0; 2];
        plan.evaluate(&PastNoise { intervals: vec![], tail: vec![1.0] }, &mut out).unwrap();
        assert_relative_eq!(out[0], 0.2 * 5.0f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(out[1], out[0] * (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn combo_tail_covariance_matches() {
        let k = KernelSpec::convex_combo(0.4, 3.0, 30.0).unwrap();
        let h = HistorySegment::constant(0.0, 0.04, f64::INFINITY).unwrap();
        let t = 0.05;
        let plan = G1Plan::new(&k, &h, &betas(), &[t], 0.01, false).unwrap();
        assert_eq!(plan.tail_dim(), 2);
        // Var g1(t) = Σ_z g1(t; e_z)² must equal σ² ∫_{-∞}^0 K(s,t)² ds.
        let mut var = 0.0;
        for z in 0..2 {
            let mut e = vec![0.0; 2];
            e[z] = 1.0;
            let mut out = vec![0.0];
            plan.evaluate(&PastNoise { intervals: vec![], tail: e }, &mut out).unwrap();
            var += out[0] * out[0];
        }
        let want = 0.04 * k.integral(2.0, f64::NEG_INFINITY, 0.0, t).unwrap();
        assert_relative_eq!(var, want, max_relative = 1e-10);
    }

    #[test]
    fn geometric_tail_variance_for_tspl() {
        let k = KernelSpec::tspl(1.5, 0.05, f64::INFINITY).unwrap();
        let h = HistorySegment::constant(0.0, 0.04, f64::INFINITY).unwrap();
        let t = 0.3;
        let plan = G1Plan::new(&k, &h, &betas(), &[t], 1.0 / 252.0, false).unwrap();
        let Plan::General { tail, .. } = &plan.plan else { panic!("expected general plan") };
        let var: f64 = tail.iter().map(|row| row[0] * row[0]).sum();
        let want = 0.04 * k.integral(2.0, f64::NEG_INFINITY, 0.0, t).unwrap();
        assert_relative_eq!(var, want, max_relative = 1e-9);
    }

    #[test]
    fn shifted_power_is_separable_in_time() {
        let k = KernelSpec::shifted_power(1.5, 2.0).unwrap();
        let h = HistorySegment::new(vec![-2.0, -1.0, 0.0], vec![0.0; 3], vec![0.04, 0.09, 0.0], false).unwrap();
        let plan = G1Plan::new(&k, &h, &betas(), &[0.0, 0.5], 0.01, false).unwrap();
        let mut out = vec![0.0; 2];
        let dw = vec![0.4, -0.7];
        plan.evaluate(&PastNoise { intervals: dw.clone(), tail: vec![] }, &mut out).unwrap();
        let want: f64 = k.evaluate(-2.0, 0.5).unwrap() * 0.2 * 0.4 + k.evaluate(-1.0, 0.5).unwrap() * 0.3 * -0.7;
        assert_relative_eq!(out[1], want, max_relative = 1e-12);
    }

    #[test]
    fn rejects_wrong_noise_shape() {
        let k = KernelSpec::exponential(1.0).unwrap();
        let h = HistorySegment::constant(0.0, 0.04, 1.0).unwrap();
        let plan = G1Plan::new(&k, &h, &betas(), &[0.0], 0.01, false).unwrap();
        let mut out = vec![0.0];
        assert!(plan.evaluate(&PastNoise::zeros(3, 0), &mut out).is_err());
    }
}
