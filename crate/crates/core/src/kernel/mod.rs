//! Parametric kernels `K(s, t)` on `{s <= t}` weighting past returns and past
//! squared returns.
//!
//! Four families are supported:
//!
//! | family          | `K(s, t)`                                              |
//! |-----------------|--------------------------------------------------------|
//! | exponential     | `λ e^{-λ(t-s)}`                                        |
//! | TSPL            | `Z / (t - s + δ)^α`                                    |
//! | convex combo    | `θ λa e^{-λa(t-s)} + (1-θ) λb e^{-λb(t-s)}`            |
//! | shifted power   | `((s + Δ) / (t + Δ))^a · 1{s >= -Δ}`                   |
//!
//! Every kernel carries a support cutoff `Δ` (history length, years). Values
//! for `s < -Δ` are zero. TSPL kernels are normalized to unit mass over their
//! support.

mod kv;
pub mod soe;

use std::fmt;

use crate::error::{invalid_param, Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::scalar::Scalar;

pub use soe::{fit_sum_of_exponentials, SoeFit};

/// Family discriminant, used for serialization and dispatch tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Exponential,
    Tspl,
    ConvexComboExp,
    ShiftedPower,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Exponential => "exponential",
            KernelKind::Tspl => "tspl",
            KernelKind::ConvexComboExp => "combo",
            KernelKind::ShiftedPower => "shifted_power",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(KernelKind::Exponential),
            "tspl" => Ok(KernelKind::Tspl),
            "combo" | "convex_combo" | "convex_combo_exp" => Ok(KernelKind::ConvexComboExp),
            "shifted_power" | "shiftedpower" => Ok(KernelKind::ShiftedPower),
            other => Err(Error::Parse(format!("unknown kernel family `{other}`"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily<T> {
    Exponential { lambda: T },
    Tspl { alpha: T, delta: T, z: T },
    ConvexComboExp { theta: T, lambda_a: T, lambda_b: T },
    ShiftedPower { a: T },
}

/// An immutable, validated kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T> {
    family: KernelFamily<T>,
    cutoff: T,
}

/// `K(s, t) = f(s) e^{h(t)}` with `h` non-increasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Separable<T> {
    /// `f(s) = λ e^{λ s}`, `h(t) = -λ t`.
    Exponential { lambda: T },
    /// `f(s) = (s + Δ)^a 1{s >= -Δ}`, `h(t) = -a ln(t + Δ)`.
    ShiftedPower { a: T, delta: T },
}

impl<T: Scalar> Separable<T> {
    pub fn f(&self, s: T) -> T {
        match *self {
            Separable::Exponential { lambda } => lambda * (lambda * s).exp(),
            Separable::ShiftedPower { a, delta } => {
                if s < -delta {
                    T::zero()
                } else {
                    (s + delta).powf(a)
                }
            }
        }
    }

    pub fn h(&self, t: T) -> T {
        match *self {
            Separable::Exponential { lambda } => -lambda * t,
            Separable::ShiftedPower { a, delta } => -a * (t + delta).ln(),
        }
    }

    pub fn h_prime(&self, t: T) -> T {
        match *self {
            Separable::Exponential { lambda } => -lambda,
            Separable::ShiftedPower { a, delta } => -a / (t + delta),
        }
    }

    /// `K(t, t) = f(t) e^{h(t)}`, evaluated without overflow.
    pub fn diagonal(&self, _t: T) -> T {
        match *self {
            Separable::Exponential { lambda } => lambda,
            Separable::ShiftedPower { .. } => T::one(),
        }
    }
}

/// `K(lag) = Σ_j weights[j] e^{-rates[j] lag}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFactors<T> {
    pub weights: Vec<T>,
    pub rates: Vec<T>,
}

impl<T: Scalar> ExpFactors<T> {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn value(&self, lag: T) -> T {
        self.weights.iter().zip(&self.rates).map(|(&w, &r)| w * (-r * lag).exp()).sum()
    }
}

fn check_positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(invalid_param(name, v.to_f64_lossy(), "must be finite and > 0"));
    }
    Ok(())
}

fn check_cutoff<T: Scalar>(cutoff: T) -> Result<()> {
    if cutoff.is_nan() || cutoff <= T::zero() {
        return Err(invalid_param("cutoff", cutoff.to_f64_lossy(), "must lie in (0, +inf]"));
    }
    Ok(())
}

/// `∫_a^b (v + δ)^{-q} dv` for `0 <= a <= b <= +inf`.
pub(crate) fn power_law_integral<T: Scalar>(q: T, delta: T, a: T, b: T) -> T {
    if b <= a {
        return T::zero();
    }
    let base = a + delta;
    if b.is_infinite() {
        return if q > T::one() { base.powf(T::one() - q) / (q - T::one()) } else { T::infinity() };
    }
    let log_ratio = ((b - a) / base).ln_1p();
    if q == T::one() {
        return log_ratio;
    }
    let one_minus_q = T::one() - q;
    base.powf(one_minus_q) * (-(one_minus_q * log_ratio).exp_m1()) / (q - T::one())
}

/// `∫_a^b c e^{-r v} dv` for `0 <= a <= b <= +inf`.
pub(crate) fn exp_integral<T: Scalar>(c: T, r: T, a: T, b: T) -> T {
    if b <= a {
        return T::zero();
    }
    let head = c / r * (-r * a).exp();
    if b.is_infinite() {
        head
    } else {
        head * (-(-r * (b - a)).exp_m1())
    }
}

/// Unit-mass constant `Z` for `Z / (u + δ)^α` on `[0, cutoff]`.
pub fn normalization_constant<T: Scalar>(alpha: T, delta: T, cutoff: T) -> Result<T> {
    check_positive("alpha", alpha)?;
    check_positive("delta", delta)?;
    check_cutoff(cutoff)?;
    if cutoff.is_infinite() && alpha <= T::one() {
        return Err(invalid_param(
            "alpha",
            alpha.to_f64_lossy(),
            "TSPL on an infinite support needs alpha > 1 (alpha <= 1 requires a finite cutoff)",
        ));
    }
    let mass = power_law_integral(alpha, delta, T::zero(), cutoff);
    Ok(T::one() / mass)
}

impl<T: Scalar> KernelSpec<T> {
    pub fn exponential(lambda: T) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self { family: KernelFamily::Exponential { lambda }, cutoff: T::infinity() })
    }

    /// TSPL kernel normalized to unit mass over `[0, cutoff]`.
    pub fn tspl(alpha: T, delta: T, cutoff: T) -> Result<Self> {
        let z = normalization_constant(alpha, delta, cutoff)?;
        Ok(Self { family: KernelFamily::Tspl { alpha, delta, z }, cutoff })
    }

    /// TSPL kernel with an explicit constant `Z`.
    pub fn tspl_with_constant(alpha: T, delta: T, z: T, cutoff: T) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("delta", delta)?;
        check_positive("z", z)?;
        check_cutoff(cutoff)?;
        if cutoff.is_infinite() && alpha <= T::one() {
            return Err(invalid_param("alpha", alpha.to_f64_lossy(), "TSPL on an infinite support needs alpha > 1"));
        }
        Ok(Self { family: KernelFamily::Tspl { alpha, delta, z }, cutoff })
    }

    pub fn convex_combo(theta: T, lambda_a: T, lambda_b: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(invalid_param("theta", theta.to_f64_lossy(), "must lie in [0, 1]"));
        }
        check_positive("lambda_a", lambda_a)?;
        check_positive("lambda_b", lambda_b)?;
        Ok(Self { family: KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b }, cutoff: T::infinity() })
    }

    /// `((s + Δ) / (t + Δ))^a`; the history length `Δ` must be finite.
    pub fn shifted_power(a: T, delta: T) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("cutoff", delta)?;
        Ok(Self { family: KernelFamily::ShiftedPower { a }, cutoff: delta })
    }

    /// Restricts the support to `s >= -cutoff`. TSPL constants are
    /// renormalized over the new support.
    pub fn with_cutoff(self, cutoff: T) -> Result<Self> {
        check_cutoff(cutoff)?;
        match self.family {
            KernelFamily::Tspl { alpha, delta, .. } => Self::tspl(alpha, delta, cutoff),
            KernelFamily::ShiftedPower { a } => Self::shifted_power(a, cutoff),
            family => Ok(Self { family, cutoff }),
        }
    }

    pub fn family(&self) -> &KernelFamily<T> {
        &self.family
    }

    pub fn kind(&self) -> KernelKind {
        match self.family {
            KernelFamily::Exponential { .. } => KernelKind::Exponential,
            KernelFamily::Tspl { .. } => KernelKind::Tspl,
            KernelFamily::ConvexComboExp { .. } => KernelKind::ConvexComboExp,
            KernelFamily::ShiftedPower { .. } => KernelKind::ShiftedPower,
        }
    }

    pub fn cutoff(&self) -> T {
        self.cutoff
    }

    /// Lower end of the support, `-Δ` (possibly `-inf`).
    pub fn support_start(&self) -> T {
        -self.cutoff
    }

    /// True when `K(s, t)` depends on `t - s` only.
    pub fn is_convolution(&self) -> bool {
        !matches!(self.family, KernelFamily::ShiftedPower { .. })
    }

    fn validate_args(&self, s: T, t: T) -> Result<()> {
        if !s.is_finite() || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite kernel argument (s = {s}, t = {t})")));
        }
        if s > t {
            return Err(Error::InvalidArgument(format!("kernel requires s <= t (s = {s}, t = {t})")));
        }
        Ok(())
    }

    /// Convolution profile `k(u)` with `K(s, t) = k(t - s)`; `None` for
    /// shifted-power kernels. Support truncation is not applied.
    pub fn lag_value(&self, lag: T) -> Option<T> {
        match self.family {
            KernelFamily::Exponential { lambda } => Some(lambda * (-lambda * lag).exp()),
            KernelFamily::Tspl { alpha, delta, z } => Some(z * (lag + delta).powf(-alpha)),
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => Some(
                theta * lambda_a * (-lambda_a * lag).exp() + (T::one() - theta) * lambda_b * (-lambda_b * lag).exp(),
            ),
            KernelFamily::ShiftedPower { .. } => None,
        }
    }

    fn value_unchecked(&self, s: T, t: T) -> T {
        if s < -self.cutoff {
            return T::zero();
        }
        match self.family {
            KernelFamily::ShiftedPower { a } => {
                let d = self.cutoff;
                ((s + d) / (t + d)).powf(a)
            }
            _ => self.lag_value(t - s).unwrap_or_else(T::zero),
        }
    }

    /// `K(s, t)`.
    pub fn evaluate(&self, s: T, t: T) -> Result<T> {
        self.validate_args(s, t)?;
        Ok(self.value_unchecked(s, t))
    }

    fn derivative_unchecked(&self, s: T, t: T) -> T {
        if s < -self.cutoff {
            return T::zero();
        }
        let k = self.value_unchecked(s, t);
        match self.family {
            KernelFamily::Exponential { lambda } => -lambda * k,
            KernelFamily::Tspl { alpha, delta, .. } => -alpha * k / (t - s + delta),
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => {
                let lag = t - s;
                -(theta * lambda_a * lambda_a * (-lambda_a * lag).exp()
                    + (T::one() - theta) * lambda_b * lambda_b * (-lambda_b * lag).exp())
            }
            KernelFamily::ShiftedPower { a } => -a * k / (t + self.cutoff),
        }
    }

    /// Analytic `∂K/∂t (s, t)`.
    pub fn time_derivative(&self, s: T, t: T) -> Result<T> {
        self.validate_args(s, t)?;
        Ok(self.derivative_unchecked(s, t))
    }

    /// `K(s, t) = f(s) e^{h(t)}` when such a factorization exists.
    pub fn separable_decomposition(&self) -> Option<Separable<T>> {
        match self.family {
            KernelFamily::Exponential { lambda } => Some(Separable::Exponential { lambda }),
            KernelFamily::ShiftedPower { a } => Some(Separable::ShiftedPower { a, delta: self.cutoff }),
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => {
                if theta == T::one() || lambda_a == lambda_b {
                    Some(Separable::Exponential { lambda: lambda_a })
                } else if theta == T::zero() {
                    Some(Separable::Exponential { lambda: lambda_b })
                } else {
                    None
                }
            }
            KernelFamily::Tspl { .. } => None,
        }
    }

    /// Exact sum-of-exponentials representation, for Markovian simulation.
    pub fn exp_factors(&self) -> Option<ExpFactors<T>> {
        match self.family {
            KernelFamily::Exponential { lambda } => Some(ExpFactors { weights: vec![lambda], rates: vec![lambda] }),
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => {
                let mut weights = Vec::with_capacity(2);
                let mut rates = Vec::with_capacity(2);
                if theta > T::zero() {
                    weights.push(theta * lambda_a);
                    rates.push(lambda_a);
                }
                if theta < T::one() {
                    weights.push((T::one() - theta) * lambda_b);
                    rates.push(lambda_b);
                }
                Some(ExpFactors { weights, rates })
            }
            _ => None,
        }
    }

    fn clamp_bounds(&self, lower: T, upper: T, t: T) -> Result<Option<(T, T)>> {
        if lower.is_nan() || upper.is_nan() || !t.is_finite() || upper.is_infinite() {
            return Err(Error::InvalidArgument("integration bounds must be ordered reals".into()));
        }
        if lower > upper {
            return Err(Error::InvalidArgument(format!("inverted bounds [{lower}, {upper}]")));
        }
        if upper > t {
            return Err(Error::InvalidArgument(format!("upper bound {upper} exceeds t = {t}")));
        }
        let lo = lower.max(-self.cutoff);
        if lo >= upper {
            return Ok(None);
        }
        Ok(Some((lo, upper)))
    }

    /// Closed form of `∫_{lower}^{upper} K(s, t)^p ds` when one is registered.
    pub fn integral_closed_form(&self, power: T, lower: T, upper: T, t: T) -> Result<Option<T>> {
        let Some((lo, hi)) = self.clamp_bounds(lower, upper, t)? else {
            return Ok(Some(T::zero()));
        };
        let (a, b) = (t - hi, t - lo);
        let p = power;
        let value = match self.family {
            KernelFamily::Exponential { lambda } => Some(exp_integral(lambda.powf(p), p * lambda, a, b)),
            KernelFamily::Tspl { alpha, delta, z } => Some(z.powf(p) * power_law_integral(alpha * p, delta, a, b)),
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => {
                let wa = theta * lambda_a;
                let wb = (T::one() - theta) * lambda_b;
                if p == T::one() {
                    Some(exp_integral(wa, lambda_a, a, b) + exp_integral(wb, lambda_b, a, b))
                } else if p == T::two() {
                    Some(
                        exp_integral(wa * wa, T::two() * lambda_a, a, b)
                            + exp_integral(T::two() * wa * wb, lambda_a + lambda_b, a, b)
                            + exp_integral(wb * wb, T::two() * lambda_b, a, b),
                    )
                } else {
                    None
                }
            }
            KernelFamily::ShiftedPower { a: expo } => {
                let d = self.cutoff;
                let q = expo * p + T::one();
                let scale = t + d;
                Some(scale * (((hi + d) / scale).powf(q) - ((lo + d) / scale).powf(q)) / q)
            }
        };
        Ok(value)
    }

    /// `∫_{lower}^{upper} K(s, t)^p ds` by adaptive quadrature only.
    pub fn integral_quadrature(&self, power: T, lower: T, upper: T, t: T, cfg: &QuadConfig) -> Result<T> {
        let Some((lo, hi)) = self.clamp_bounds(lower, upper, t)? else {
            return Ok(T::zero());
        };
        let (a, b) = (t - hi, t - lo);
        let breaks = self.lag_breaks(a, b);
        let r = integrate_with_breaks(
            |lag: T| {
                let v = self.value_unchecked(t - lag, t);
                if v == T::zero() {
                    T::zero()
                } else {
                    v.powf(power)
                }
            },
            a,
            b,
            &breaks,
            cfg,
        )?;
        Ok(r.value)
    }

    pub(crate) fn lag_breaks(&self, a: T, b: T) -> Vec<T> {
        let scale = match self.family {
            KernelFamily::Tspl { delta, .. } => delta,
            KernelFamily::Exponential { lambda } => lambda.recip(),
            KernelFamily::ConvexComboExp { lambda_a, lambda_b, .. } => lambda_a.max(lambda_b).recip(),
            KernelFamily::ShiftedPower { .. } => return Vec::new(),
        };
        [1.0, 10.0, 100.0, 1000.0].iter().map(|&m| a + scale * T::lit(m)).filter(|&x| x < b).collect()
    }

    /// `∫_{lower}^{upper} K(s, t)^p ds`; `lower` may be `-inf`. Uses the
    /// closed form when registered, otherwise adaptive quadrature with
    /// absolute tolerance 1e-10. Divergent integrals return `+inf`.
    pub fn integral(&self, power: T, lower: T, upper: T, t: T) -> Result<T> {
        if !(power > T::zero()) {
            return Err(invalid_param("power", power.to_f64_lossy(), "must be > 0"));
        }
        match self.integral_closed_form(power, lower, upper, t)? {
            Some(v) => Ok(v),
            None => self.integral_quadrature(power, lower, upper, t, &QuadConfig::default()),
        }
    }

    /// `∫_{lower}^{upper} |∂K/∂t (s, t)|^p ds`.
    pub fn abs_derivative_integral(&self, power: T, lower: T, upper: T, t: T) -> Result<T> {
        let Some((lo, hi)) = self.clamp_bounds(lower, upper, t)? else {
            return Ok(T::zero());
        };
        let (a, b) = (t - hi, t - lo);
        let p = power;
        match self.family {
            KernelFamily::Exponential { lambda } => Ok(lambda.powf(p) * self.integral(p, lower, upper, t)?),
            KernelFamily::Tspl { alpha, delta, z } => {
                Ok((alpha * z).powf(p) * power_law_integral((alpha + T::one()) * p, delta, a, b))
            }
            KernelFamily::ShiftedPower { a: expo } => {
                Ok((expo / (t + self.cutoff)).powf(p) * self.integral(p, lower, upper, t)?)
            }
            KernelFamily::ConvexComboExp { .. } => {
                let breaks = self.lag_breaks(a, b);
                let r = integrate_with_breaks(
                    |lag: T| self.derivative_unchecked(t - lag, t).abs().powf(p),
                    a,
                    b,
                    &breaks,
                    &QuadConfig::default(),
                )?;
                Ok(r.value)
            }
        }
    }

    /// Total mass `∫_{-Δ}^{t} K(s, t) ds`.
    pub fn mass(&self, t: T) -> Result<T> {
        self.integral(T::one(), T::neg_infinity(), t, t)
    }
}

impl<T: Scalar> fmt::Display for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Exponential { lambda } => write!(f, "exponential(lambda={lambda})")?,
            KernelFamily::Tspl { alpha, delta, z } => write!(f, "tspl(alpha={alpha}, delta={delta}, Z={z})")?,
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => {
                write!(f, "combo(theta={theta}, lambda_a={lambda_a}, lambda_b={lambda_b})")?
            }
            KernelFamily::ShiftedPower { a } => write!(f, "shifted_power(a={a})")?,
        }
        if self.cutoff.is_finite() {
            write!(f, "[cutoff={}]", self.cutoff)?;
        }
        Ok(())
    }
}
