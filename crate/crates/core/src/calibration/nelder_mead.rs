//! Nelder–Mead simplex minimization.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const REFLECTION: f64 = 1.0;
pub const EXPANSION: f64 = 2.0;
pub const CONTRACTION: f64 = 0.5;
pub const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    pub max_iterations: usize,
    pub max_evaluations: usize,
    /// Stop when every vertex is within this distance of the best one
    /// (max norm, search coordinates)...
    pub x_tol: f64,
    /// ...and the spread of values is below `f_tol · (1 + |f_best|)`.
    pub f_tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self { max_iterations: 2000, max_evaluations: 4000, x_tol: 1e-7, f_tol: 1e-12, initial_step: 0.5 }
    }
}

impl NelderMeadSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_evaluations == 0 {
            return Err(Error::InvalidArgument("optimizer budgets must be >= 1".into()));
        }
        if !(self.x_tol >= 0.0) || !(self.f_tol >= 0.0) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument("optimizer tolerances must be >= 0 and the step > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite values are treated as `+inf`.
pub fn nelder_mead<T: Scalar, F: FnMut(&[T]) -> T>(mut f: F, x0: &[T], settings: &NelderMeadSettings) -> NmOutcome<T> {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[T], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let step = T::lit(settings.initial_step);
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evaluations);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }
    let (alpha, gamma, rho, sigma) = (T::lit(REFLECTION), T::lit(EXPANSION), T::lit(CONTRACTION), T::lit(SHRINK));
    let mut iterations = 0;
    let mut converged = false;
    let order = |s: &mut Vec<(Vec<T>, T)>| {
        // stable: ties keep insertion order
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    order(&mut simplex);
    while iterations < settings.max_iterations && evaluations < settings.max_evaluations {
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        if best.is_finite()
            && worst - best <= T::lit(settings.f_tol) * (T::one() + best.abs())
            && spread <= T::lit(settings.x_tol)
        {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<T> =
            (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<T>() / T::from_usize_lossy(n)).collect();
        let along = |t: T| -> Vec<T> { (0..n).map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j])).collect() };
        let xr = along(-alpha);
        let fr = eval(&xr, &mut evaluations);
        if fr < simplex[0].1 {
            let xe = along(-alpha * gamma);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-alpha * rho);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<T> = x_best.iter().zip(&vertex.0).map(|(&b, &v)| b + sigma * (v - b)).collect();
                    let v = eval(&x, &mut evaluations);
                    *vertex = (x, v);
                }
            }
        }
        order(&mut simplex);
    }
    let (x, value) = simplex.swap_remove(0);
    NmOutcome { x, value, iterations, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(f, &[-1.2, 1.0], &NelderMeadSettings { x_tol: 1e-10, ..Default::default() });
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::INFINITY } else { (x[0] - 0.5).powi(2) + x[1] * x[1] };
        let out = nelder_mead(f, &[0.1, 0.3], &NelderMeadSettings::default());
        assert!((out.x[0] - 0.5).abs() < 1e-5);
        assert!(out.value < 1e-10);
    }

    #[test]
    fn nan_counts_as_infinite_and_budget_is_respected() {
        let f = |_: &[f64]| f64::NAN;
        let s = NelderMeadSettings { max_evaluations: 20, ..Default::default() };
        let out = nelder_mead(f, &[0.0, 0.0, 0.0], &s);
        assert!(out.value.is_infinite());
        assert!(!out.converged);
        assert!(out.evaluations <= 20 + 4);
    }
}
