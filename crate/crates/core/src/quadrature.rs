//! Adaptive Gauss–Kronrod (7/15) integration.
//!
//! Intervals are bisected by largest local error until the global estimate
//! falls under `max(abs_tol, rel_tol * |I|)`. A semi-infinite upper limit is
//! mapped onto `(0, 1]` with `x = a + (1 - u) / u`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    /// Absolute tolerance 1e-10 with a tight relative floor.
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let center = T::half() * (a + b);
    let half = T::half() * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod += T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`; `b` may be `+inf`.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, cfg: &QuadConfig) -> Result<QuadResult<T>> {
    integrate_with_breaks(f, a, b, &[], cfg)
}

/// Like [`integrate`], with extra initial breakpoints inside `(a, b)`.
pub fn integrate_with_breaks<T: Scalar, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    breaks: &[T],
    cfg: &QuadConfig,
) -> Result<QuadResult<T>> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument("NaN integration bound".into()));
    }
    if b < a {
        return Err(Error::InvalidArgument(format!("inverted bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: T::zero(), error: T::zero(), intervals: 0 });
    }
    if a.is_infinite() {
        return Err(Error::InvalidArgument("lower bound must be finite".into()));
    }
    if b.is_infinite() {
        // Finite head up to the last breakpoint, mapped tail after it.
        let split = breaks.iter().copied().filter(|&x| x > a && x.is_finite()).fold(a + T::one(), T::max);
        let head_breaks: Vec<T> = breaks.iter().copied().filter(|&x| x > a && x < split).collect();
        let head = adaptive(&f, a, split, &head_breaks, cfg)?;
        let tail = adaptive(
            &|u: T| {
                if u <= T::zero() {
                    return T::zero();
                }
                let x = split + (T::one() - u) / u;
                let v = f(x) / (u * u);
                if v.is_finite() {
                    v
                } else {
                    T::zero()
                }
            },
            T::zero(),
            T::one(),
            &[],
            cfg,
        )?;
        return Ok(QuadResult {
            value: head.value + tail.value,
            error: head.error + tail.error,
            intervals: head.intervals + tail.intervals,
        });
    }
    let inner: Vec<T> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    adaptive(&f, a, b, &inner, cfg)
}

fn adaptive<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T, breaks: &[T], cfg: &QuadConfig) -> Result<QuadResult<T>> {
    let mut points = vec![a];
    let mut sorted: Vec<T> = breaks.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    points.extend(sorted);
    points.push(b);
    points.dedup();

    let mut segments: Vec<Segment<T>> = points
        .windows(2)
        .map(|w| {
            let (value, error) = gk15(f, w[0], w[1]);
            Segment { a: w[0], b: w[1], value, error }
        })
        .collect();

    // f32 cannot reach 1e-10; never ask for better than a few ulps of the result.
    let eps_floor = T::epsilon() * T::lit(50.0);
    loop {
        let total: T = segments.iter().map(|s| s.value).sum();
        let err: T = segments.iter().map(|s| s.error).sum();
        let tol = T::lit(cfg.abs_tol).max(T::lit(cfg.rel_tol) * total.abs()).max(eps_floor * total.abs());
        if err <= tol {
            return Ok(QuadResult { value: total, error: err, intervals: segments.len() });
        }
        if segments.len() >= cfg.max_intervals {
            return Err(Error::Quadrature { error: err.to_f64_lossy(), tolerance: tol.to_f64_lossy() });
        }
        let (idx, _) = segments.iter().enumerate().fold((0usize, T::neg_infinity()), |acc, (i, s)| {
            if s.error > acc.1 {
                (i, s.error)
            } else {
                acc
            }
        });
        let seg = segments.swap_remove(idx);
        let mid = T::half() * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Cannot split further; accept what we have.
            return Ok(QuadResult { value: total, error: err, intervals: segments.len() + 1 });
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        segments.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        segments.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_degree_22_is_exact_on_one_panel() {
        let (v, _) = gk15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 23.0, max_relative = 1e-13);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert_relative_eq!(k, 2.0, epsilon = 1e-15);
        assert_relative_eq!(g, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate(|x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate(|x: f64| (-3.0 * x).exp(), 0.5, f64::INFINITY, &QuadConfig::default()).unwrap();
        assert_relative_eq!(r.value, (-1.5f64).exp() / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn semi_infinite_power_tail() {
        // ∫_0^∞ (x+0.01)^{-1.5} dx = 2 / sqrt(0.01) = 20
        let r = integrate_with_breaks(
            |x: f64| (x + 0.01).powf(-1.5),
            0.0,
            f64::INFINITY,
            &[0.01, 0.1, 1.0],
            &QuadConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, 20.0, max_relative = 1e-9);
    }

    #[test]
    fn empty_and_inverted() {
        let cfg = QuadConfig::default();
        assert_eq!(integrate(|x: f64| x, 1.0, 1.0, &cfg).unwrap().value, 0.0);
        assert!(integrate(|x: f64| x, 2.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn works_in_f32() {
        let r = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, &QuadConfig::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }
}
