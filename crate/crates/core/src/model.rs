//! Model parameters and the deterministic initial segment on `[-Δ, 0]`.

use crate::error::{invalid_param, Error, Result};
use crate::kernel::KernelSpec;
use crate::scalar::{CompensatedSum, Scalar};

/// Loadings of `σ = β0 + β1 R1 + β2 √R2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
}

impl<T: Scalar> Betas<T> {
    pub fn new(b0: T, b1: T, b2: T) -> Self {
        Self { b0, b1, b2 }
    }

    /// `β0 + β1 r1 + β2 √r2`; `r2` must be non-negative.
    pub fn sigma(&self, r1: T, r2: T) -> T {
        self.b0 + self.b1 * r1 + self.b2 * r2.sqrt()
    }

    /// `β0 + β1 r1 + β2 q` with `q = √r2` already taken.
    pub fn sigma_from_sqrt(&self, r1: T, q: T) -> T {
        self.b0 + self.b1 * r1 + self.b2 * q
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.b0, self.b1, self.b2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub betas: Betas<T>,
    pub k1: KernelSpec<T>,
    pub k2: KernelSpec<T>,
    /// Initial price.
    pub s0: T,
    /// History length `Δ` in years; `0` means no initial segment.
    pub delta: T,
}

impl<T: Scalar> ModelParams<T> {
    /// Validates `β0 >= 0`, `β2 >= 0`, `s0 > 0` and `Δ ∈ [0, +inf]`.
    /// `β1` is unconstrained here.
    pub fn new(betas: Betas<T>, k1: KernelSpec<T>, k2: KernelSpec<T>, s0: T, delta: T) -> Result<Self> {
        if !(betas.b0 >= T::zero()) || !betas.b0.is_finite() {
            return Err(invalid_param("beta0", betas.b0.to_f64_lossy(), "must be finite and >= 0"));
        }
        if !betas.b1.is_finite() {
            return Err(invalid_param("beta1", betas.b1.to_f64_lossy(), "must be finite"));
        }
        if !(betas.b2 >= T::zero()) || !betas.b2.is_finite() {
            return Err(invalid_param("beta2", betas.b2.to_f64_lossy(), "must be finite and >= 0"));
        }
        if !(s0 > T::zero()) || !s0.is_finite() {
            return Err(invalid_param("s0", s0.to_f64_lossy(), "must be finite and > 0"));
        }
        if !(delta >= T::zero()) {
            return Err(invalid_param("delta", delta.to_f64_lossy(), "must lie in [0, +inf]"));
        }
        Ok(Self { betas, k1, k2, s0, delta })
    }

    /// Checks that `history` spans exactly `[-Δ, 0]`.
    pub fn check_history_span(&self, history: &HistorySegment<T>) -> Result<()> {
        let span = history.length();
        let ok = if self.delta.is_infinite() {
            span.is_infinite()
        } else {
            span.is_finite() && (span - self.delta).abs() <= T::lit(1e-9) * T::one().max(self.delta)
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("history spans {span} years but the model declares delta = {}", self.delta)))
        }
    }
}

/// Piecewise-constant initial conditions `(r1, r2)` on `[-Δ, 0]`.
///
/// Grid values are left-point: interval `[times[i], times[i+1])` carries
/// `(r1[i], r2[i])`. When `unbounded` is set the segment extends to `-inf`
/// with the values at `times[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment<T> {
    times: Vec<T>,
    r1: Vec<T>,
    r2: Vec<T>,
    unbounded: bool,
}

impl<T: Scalar> HistorySegment<T> {
    /// `times` strictly increasing and ending at 0. Values are not
    /// range-checked so that invalid inputs can reach the assumption checker;
    /// see [`HistorySegment::validate`].
    pub fn new(times: Vec<T>, r1: Vec<T>, r2: Vec<T>, unbounded: bool) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("history needs at least the point t = 0".into()));
        }
        if r1.len() != times.len() || r2.len() != times.len() {
            return Err(Error::DimensionMismatch(format!(
                "history has {} times, {} r1 values and {} r2 values",
                times.len(),
                r1.len(),
                r2.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("history times must be finite".into()));
        }
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("history times must be strictly increasing (index {})", w + 1)));
        }
        if *times.last().unwrap_or(&T::zero()) != T::zero() {
            return Err(Error::InvalidArgument("history must end at t = 0".into()));
        }
        Ok(Self { times, r1, r2, unbounded })
    }

    /// No initial segment (`Δ = 0`).
    pub fn empty() -> Self {
        Self { times: vec![T::zero()], r1: vec![T::zero()], r2: vec![T::zero()], unbounded: false }
    }

    /// Constant `(r1, r2)` over `[-Δ, 0]`; `Δ` may be `+inf`.
    pub fn constant(r1: T, r2: T, delta: T) -> Result<Self> {
        if !(delta >= T::zero()) {
            return Err(invalid_param("delta", delta.to_f64_lossy(), "must lie in [0, +inf]"));
        }
        if delta == T::zero() {
            return Ok(Self::empty());
        }
        if delta.is_infinite() {
            return Self::new(vec![T::zero()], vec![r1], vec![r2], true);
        }
        Self::new(vec![-delta, T::zero()], vec![r1; 2], vec![r2; 2], false)
    }

    /// Constant history with implied volatility `sigma`, realized through
    /// `r1 = 0` and `r2 = ((σ - β0) / β2)^2`.
    pub fn constant_sigma(sigma: T, betas: &Betas<T>, delta: T) -> Result<Self> {
        if betas.b2 == T::zero() {
            return Err(invalid_param("beta2", 0.0, "a constant-sigma history needs beta2 > 0"));
        }
        let root = (sigma - betas.b0) / betas.b2;
        if root < T::zero() {
            return Err(invalid_param("sigma", sigma.to_f64_lossy(), "must be >= beta0 when r1 = 0"));
        }
        Self::constant(T::zero(), root * root, delta)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn r1(&self) -> &[T] {
        &self.r1
    }

    pub fn r2(&self) -> &[T] {
        &self.r2
    }

    pub fn is_unbounded(&self) -> bool {
        self.unbounded
    }

    /// No interval carries any mass.
    pub fn is_empty(&self) -> bool {
        !self.unbounded && self.times.len() == 1
    }

    /// `Δ`, possibly `+inf`.
    pub fn length(&self) -> T {
        if self.unbounded {
            T::infinity()
        } else {
            -self.times[0]
        }
    }

    /// Number of finite intervals.
    pub fn n_intervals(&self) -> usize {
        self.times.len() - 1
    }

    /// Implied `σ_s` at every grid point.
    pub fn sigmas(&self, betas: &Betas<T>) -> Vec<T> {
        self.r1.iter().zip(&self.r2).map(|(&a, &b)| betas.sigma(a, b)).collect()
    }

    /// Rejects non-finite values and negative `r2`.
    pub fn validate(&self) -> Result<()> {
        for (i, (&a, &b)) in self.r1.iter().zip(&self.r2).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Data(format!("non-finite history value at s = {}", self.times[i])));
            }
            if b < T::zero() {
                return Err(Error::Data(format!("negative r2 = {b} at s = {}", self.times[i])));
            }
        }
        Ok(())
    }
}

/// `g2(t) = ∫_{-Δ}^0 K2(s, t) σ_s^2 ds` for each `t` in `t_grid`, exact for the
/// piecewise-constant history.
pub fn deterministic_g2<T: Scalar>(
    k2: &KernelSpec<T>,
    history: &HistorySegment<T>,
    betas: &Betas<T>,
    t_grid: &[T],
) -> Result<Vec<T>> {
    history.validate()?;
    let sig2: Vec<T> = history.sigmas(betas).into_iter().map(|s| s * s).collect();
    let times = history.times();
    t_grid
        .iter()
        .map(|&t| {
            if t < T::zero() {
                return Err(Error::InvalidArgument(format!("g2 evaluated at negative time {t}")));
            }
            let mut acc = CompensatedSum::new();
            for i in 0..history.n_intervals() {
                if sig2[i] != T::zero() {
                    acc.add(sig2[i] * k2.integral(T::one(), times[i], times[i + 1], t)?);
                }
            }
            if history.is_unbounded() && sig2[0] != T::zero() {
                acc.add(sig2[0] * k2.integral(T::one(), T::neg_infinity(), times[0], t)?);
            }
            Ok(acc.value())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_formula() {
        let b = Betas::new(0.04, -0.1, 0.6);
        assert_relative_eq!(b.sigma(0.0, 0.04), 0.16, max_relative = 1e-15);
        assert_relative_eq!(b.sigma(1.0, 0.0), -0.06, max_relative = 1e-15);
    }

    #[test]
    fn params_validation() {
        let k = KernelSpec::exponential(1.0).unwrap();
        let b = Betas::new(0.02, -0.1, 0.6);
        assert!(ModelParams::new(b, k, k, 100.0, f64::INFINITY).is_ok());
        assert!(ModelParams::new(Betas::new(-0.1, 0.0, 0.1), k, k, 1.0, 1.0).is_err());
        assert!(ModelParams::new(Betas::new(0.1, 0.0, -0.1), k, k, 1.0, 1.0).is_err());
        assert!(ModelParams::new(b, k, k, 0.0, 1.0).is_err());
    }

    #[test]
    fn history_shapes() {
        let h = HistorySegment::<f64>::constant(0.0, 0.09, f64::INFINITY).unwrap();
        assert!(h.is_unbounded() && h.length().is_infinite() && !h.is_empty());
        let h = HistorySegment::<f64>::constant(0.0, 0.09, 2.0).unwrap();
        assert_eq!(h.length(), 2.0);
        assert_eq!(h.n_intervals(), 1);
        assert!(HistorySegment::<f64>::constant(0.0, 0.09, 0.0).unwrap().is_empty());
        assert!(HistorySegment::new(vec![-1.0, -1.0, 0.0], vec![0.0; 3], vec![0.0; 3], false).is_err());
        assert!(HistorySegment::new(vec![-1.0, -0.5], vec![0.0; 2], vec![0.0; 2], false).is_err());
    }

    #[test]
    fn constant_sigma_history_reproduces_sigma() {
        let b = Betas::new(0.02, -0.1, 0.6);
        let h = HistorySegment::constant_sigma(0.2, &b, f64::INFINITY).unwrap();
        assert_relative_eq!(h.r2()[0], 0.09, max_relative = 1e-14);
        assert_relative_eq!(h.sigmas(&b)[0], 0.2, max_relative = 1e-14);
    }

    #[test]
    fn g2_constant_history_exponential() {
        // ∫_{-∞}^0 λ e^{-λ(t-s)} σ² ds = σ² e^{-λ t}
        let b = Betas::new(0.02, -0.1, 0.6);
        let h = HistorySegment::constant_sigma(0.2, &b, f64::INFINITY).unwrap();
        let k2 = KernelSpec::exponential(15.0).unwrap();
        let grid = [0.0, 0.1, 1.0];
        let g2 = deterministic_g2(&k2, &h, &b, &grid).unwrap();
        for (&t, &g) in grid.iter().zip(&g2) {
            assert_relative_eq!(g, 0.04 * (-15.0 * t).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn g2_finite_history_splits_additively() {
        let b = Betas::new(0.0, 0.0, 1.0);
        let k2 = KernelSpec::tspl(1.5, 0.05, f64::INFINITY).unwrap();
        let whole = HistorySegment::constant(0.0, 0.04, 1.0).unwrap();
        let split = HistorySegment::new(vec![-1.0, -0.3, 0.0], vec![0.0; 3], vec![0.04; 3], false).unwrap();
        let a = deterministic_g2(&k2, &whole, &b, &[0.5]).unwrap()[0];
        let c = deterministic_g2(&k2, &split, &b, &[0.5]).unwrap()[0];
        assert_relative_eq!(a, c, max_relative = 1e-13);
    }

    #[test]
    fn g2_is_zero_without_history() {
        let b = Betas::new(0.2, 0.0, 0.0);
        let k2 = KernelSpec::exponential(2.0).unwrap();
        let g2 = deterministic_g2(&k2, &HistorySegment::empty(), &b, &[0.0, 1.0]).unwrap();
        assert_eq!(g2, vec![0.0, 0.0]);
    }
}
