//! Helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use pdvol::kernel::{KernelFamily, KernelSpec};
use pdvol::quadrature::QuadConfig;
use rand::Rng;

/// Random kernel from every family, with parameters in the ranges the
/// invariants are stated for.
pub fn draw_kernel<R: Rng>(rng: &mut R) -> KernelSpec<f64> {
    let log_uniform = |rng: &mut R, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    match rng.random_range(0..5) {
        0 => KernelSpec::exponential(log_uniform(rng, 0.1, 50.0)).unwrap(),
        1 => KernelSpec::tspl(rng.random_range(1.05..3.0), log_uniform(rng, 1e-3, 1.0), f64::INFINITY).unwrap(),
        2 => KernelSpec::tspl(rng.random_range(0.2..3.0), log_uniform(rng, 1e-3, 1.0), rng.random_range(0.1..5.0))
            .unwrap(),
        3 => KernelSpec::convex_combo(
            rng.random_range(0.0..=1.0),
            log_uniform(rng, 0.1, 50.0),
            log_uniform(rng, 0.1, 50.0),
        )
        .unwrap(),
        _ => KernelSpec::shifted_power(rng.random_range(0.1..5.0), rng.random_range(0.1..5.0)).unwrap(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

/// Lower end of the `(s, t)` test window.
fn window_start(k: &KernelSpec<f64>) -> f64 {
    (-k.cutoff()).max(-1.0)
}

/// Unit mass of TSPL kernels over their support, within 1e-8.
pub fn check_normalization(k: &KernelSpec<f64>) -> Result<(), String> {
    if !matches!(k.family(), KernelFamily::Tspl { .. }) {
        return Ok(());
    }
    let m = k.mass(0.0).map_err(|e| e.to_string())?;
    if (m - 1.0).abs() > 1e-8 {
        return Err(format!("{k}: mass {m}"));
    }
    Ok(())
}

/// `|K(s,t) - f(s) e^{h(t)}| <= 1e-12` on a 100 x 100 grid.
pub fn check_separability(k: &KernelSpec<f64>) -> Result<(), String> {
    let Some(sep) = k.separable_decomposition() else {
        return Ok(());
    };
    let a = window_start(k);
    for s in linspace(a, 1.0, 100) {
        for t in linspace(a, 1.0, 100) {
            if s > t {
                continue;
            }
            let direct = k.evaluate(s, t).map_err(|e| e.to_string())?;
            let factored = sep.f(s) * sep.h(t).exp();
            if (direct - factored).abs() > 1e-12 {
                return Err(format!("{k}: K({s}, {t}) = {direct} vs factored {factored}"));
            }
        }
    }
    Ok(())
}

/// Analytic `∂_t K` against a central difference with step 1e-6, relative
/// 1e-5; TSPL skips `t - s < 1e-3`.
pub fn check_derivative(k: &KernelSpec<f64>) -> Result<(), String> {
    let h = 1e-6;
    let gap = if matches!(k.family(), KernelFamily::Tspl { .. }) { 1e-3 } else { 1e-5 };
    let a = window_start(k);
    for s in linspace(a, 1.0, 25) {
        for t in linspace(a, 1.0, 25) {
            if t - s < gap {
                continue;
            }
            let d = k.time_derivative(s, t).map_err(|e| e.to_string())?;
            let fd = (k.evaluate(s, t + h).unwrap() - k.evaluate(s, t - h).unwrap()) / (2.0 * h);
            let scale = d.abs().max(1e-300);
            if (d - fd).abs() > 1e-5 * scale {
                return Err(format!("{k}: dK/dt({s}, {t}) = {d} vs finite difference {fd}"));
            }
        }
    }
    Ok(())
}

/// `K(s, t)` non-increasing in `t` and never negative.
pub fn check_monotone_decay(k: &KernelSpec<f64>) -> Result<(), String> {
    let a = window_start(k);
    for s in linspace(a, 1.0, 40) {
        let mut prev = f64::INFINITY;
        for t in linspace(s, 2.0, 60) {
            let v = k.evaluate(s, t).map_err(|e| e.to_string())?;
            if v < 0.0 || v > prev {
                return Err(format!("{k}: K({s}, {t}) = {v} after {prev}"));
            }
            prev = v;
        }
    }
    Ok(())
}

/// Closed form against adaptive quadrature, relative 1e-9. The quadrature
/// runs on a relative stopping rule so small integrals are resolved too.
pub fn check_closed_form<R: Rng>(k: &KernelSpec<f64>, rng: &mut R) -> Result<(), String> {
    let relative = QuadConfig { abs_tol: 1e-300, rel_tol: 1e-12, ..QuadConfig::default() };
    for _ in 0..4 {
        let p = [1.0, 2.0, 0.5][rng.random_range(0..3)];
        let t: f64 = rng.random_range(0.0..1.0);
        let lower = rng.random_range((t - 3.0).max(-k.cutoff())..t);
        let upper = rng.random_range(lower..=t);
        let Some(closed) = k.integral_closed_form(p, lower, upper, t).map_err(|e| e.to_string())? else {
            continue;
        };
        let quad = k.integral_quadrature(p, lower, upper, t, &relative).map_err(|e| e.to_string())?;
        if (closed - quad).abs() > 1e-9 * closed.abs().max(1e-300) {
            return Err(format!("{k}: ∫K^{p} over [{lower}, {upper}] at t={t}: closed {closed} vs quadrature {quad}"));
        }
    }
    Ok(())
}

pub fn check_all_kernel_invariants<R: Rng>(k: &KernelSpec<f64>, rng: &mut R) -> Result<(), String> {
    check_normalization(k)?;
    check_separability(k)?;
    check_derivative(k)?;
    check_monotone_decay(k)?;
    check_closed_form(k, rng)
}
