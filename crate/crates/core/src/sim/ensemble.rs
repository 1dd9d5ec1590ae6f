//! Parallel ensembles, summary statistics and path dumps.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use super::{Observer, SimConfig, SimPath, Simulator};
use crate::error::{Error, Result};
use crate::model::{HistorySegment, ModelParams};
use crate::scalar::{CompensatedSum, Scalar};

/// Quantile levels reported for `σ` and `S`.
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Aborts listed individually in a summary.
const MAX_LISTED_ABORTS: usize = 20;

/// What one path contributes to the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary<T> {
    pub index: u64,
    /// `σ` at each report time.
    pub sigma: Vec<T>,
    /// `S` at each report time.
    pub s: Vec<T>,
    /// Grid points with `σ < X - tol`.
    pub violations: usize,
    /// Grid points where `X` was compared.
    pub checked: usize,
    /// `min_t (σ_t - X_t)`, when `X` is defined.
    pub min_gap: Option<T>,
    pub floor_count: usize,
    /// Minimum of `R2` before flooring.
    pub min_r2: T,
    pub abort: Option<String>,
}

/// Cross-sectional statistics of one quantity at one report time.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonStats<T> {
    pub time: T,
    pub count: usize,
    pub mean: T,
    /// Standard error of the mean.
    pub std_error: T,
    /// Values at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary<T> {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: T,
    pub seed: u64,
    pub scheme: super::Scheme,
    pub verdict: Option<String>,
    pub sigma: Vec<HorizonStats<T>>,
    pub s: Vec<HorizonStats<T>>,
    /// Grid points, over all completed paths, with `σ < X - tol`.
    pub violations: usize,
    pub violating_paths: usize,
    /// Grid points where `X` was compared.
    pub checked_points: usize,
    pub violation_tol: T,
    pub min_gap: Option<T>,
    pub floor_events: usize,
    pub floored_paths: usize,
    pub min_r2: T,
    pub n_aborted: usize,
    /// `(path index, reason)` for the first aborted paths.
    pub aborts: Vec<(u64, String)>,
    /// Setup notes (gate override, kernel approximations, missing `X`).
    pub notes: Vec<String>,
}

struct SummaryObserver<'a, T> {
    report_idx: &'a [usize],
    tol: T,
    sigma: Vec<T>,
    s: Vec<T>,
    violations: usize,
    checked: usize,
    min_gap: Option<T>,
    floor_count: usize,
    min_r2: T,
}

impl<T: Scalar> Observer<T> for SummaryObserver<'_, T> {
    fn record(&mut self, n: usize, _r1: T, r2: T, sigma: T, s: T, x: Option<T>) {
        if r2 < self.min_r2 {
            self.min_r2 = r2;
        }
        for &idx in self.report_idx {
            if idx == n {
                self.sigma.push(sigma);
                self.s.push(s);
            }
        }
        if let Some(x) = x {
            self.checked += 1;
            let gap = sigma - x;
            if sigma < x - self.tol {
                self.violations += 1;
            }
            self.min_gap = Some(self.min_gap.map_or(gap, |g| g.min(gap)));
        }
    }

    fn floor(&mut self, _n: usize, _time: T, value: T) {
        self.floor_count += 1;
        if value < self.min_r2 {
            self.min_r2 = value;
        }
    }
}

impl<T: Scalar> Simulator<T> {
    /// Grid indices nearest to the configured report times (the horizon
    /// when none are given).
    pub fn report_indices(&self) -> Vec<usize> {
        let n = self.n_steps();
        if self.config.report_times.is_empty() {
            return vec![n];
        }
        self.config.report_times.iter().map(|&t| (t / self.dt).round().to_usize().unwrap_or(n).min(n)).collect()
    }

    /// `tol = factor · √Δt · |σ0|`, with `σ0` from the deterministic part of
    /// the initial state.
    fn violation_tol(&self, sigma0: T) -> T {
        self.config.violation_factor * self.dt.sqrt() * sigma0.abs()
    }

    /// Simulates path `index` keeping only what the ensemble needs.
    pub fn summarize(&self, index: u64) -> PathSummary<T> {
        let report_idx = self.report_indices();
        let noise = self.draw_noise(index);
        let sigma0 = self
            .g1(&noise.past)
            .map(|g1| self.params.betas.sigma(g1[0], self.g2[0].max(self.config.r2_floor)))
            .unwrap_or_else(|_| T::nan());
        let mut obs = SummaryObserver {
            report_idx: &report_idx,
            tol: self.violation_tol(sigma0),
            sigma: Vec::with_capacity(report_idx.len()),
            s: Vec::with_capacity(report_idx.len()),
            violations: 0,
            checked: 0,
            min_gap: None,
            floor_count: 0,
            min_r2: T::infinity(),
        };
        let abort = self.integrate(&noise, &mut obs).err().map(|e| e.to_string());
        PathSummary {
            index,
            sigma: obs.sigma,
            s: obs.s,
            violations: obs.violations,
            checked: obs.checked,
            min_gap: obs.min_gap,
            floor_count: obs.floor_count,
            min_r2: obs.min_r2,
            abort,
        }
    }

    /// Runs every path (in parallel on the current rayon pool) and
    /// aggregates in path order, so the result does not depend on the
    /// number of threads.
    pub fn ensemble(&self) -> EnsembleSummary<T> {
        let paths: Vec<PathSummary<T>> =
            (0..self.config.n_paths as u64).into_par_iter().map(|i| self.summarize(i)).collect();
        self.aggregate(&paths)
    }

    /// Aggregates per-path summaries, in the given order.
    pub fn aggregate(&self, paths: &[PathSummary<T>]) -> EnsembleSummary<T> {
        let report_idx = self.report_indices();
        let done: Vec<&PathSummary<T>> = paths.iter().filter(|p| p.abort.is_none()).collect();
        let stats = |pick: &dyn Fn(&PathSummary<T>) -> &Vec<T>| -> Vec<HorizonStats<T>> {
            report_idx
                .iter()
                .enumerate()
                .map(|(h, &idx)| {
                    let values: Vec<T> = done.iter().map(|p| pick(p)[h]).collect();
                    horizon_stats(self.times[idx], &values)
                })
                .collect()
        };
        let sigma = stats(&|p| &p.sigma);
        let s = stats(&|p| &p.s);
        let aborted: Vec<&PathSummary<T>> = paths.iter().filter(|p| p.abort.is_some()).collect();
        let min_gap =
            done.iter().filter_map(|p| p.min_gap).fold(None, |acc: Option<T>, g| Some(acc.map_or(g, |a| a.min(g))));
        let sigma0 = self
            .g1(&super::PastNoise::zeros(self.g1.n_intervals(), self.g1.tail_dim()))
            .map(|g1| self.params.betas.sigma(g1[0], self.g2[0].max(self.config.r2_floor)))
            .unwrap_or_else(|_| T::nan());
        EnsembleSummary {
            n_paths: paths.len(),
            n_steps: self.n_steps(),
            dt: self.dt,
            seed: self.config.seed,
            scheme: self.config.scheme,
            verdict: self.report.as_ref().map(|r| r.verdict.as_str().to_string()),
            sigma,
            s,
            violations: done.iter().map(|p| p.violations).sum(),
            violating_paths: done.iter().filter(|p| p.violations > 0).count(),
            checked_points: done.iter().map(|p| p.checked).sum(),
            violation_tol: self.violation_tol(sigma0),
            min_gap,
            floor_events: paths.iter().map(|p| p.floor_count).sum(),
            floored_paths: paths.iter().filter(|p| p.floor_count > 0).count(),
            min_r2: done.iter().map(|p| p.min_r2).fold(T::infinity(), T::min),
            n_aborted: aborted.len(),
            aborts: aborted
                .iter()
                .take(MAX_LISTED_ABORTS)
                .map(|p| (p.index, p.abort.clone().unwrap_or_default()))
                .collect(),
            notes: self.setup_events.iter().map(|e| e.to_string()).collect(),
        }
    }
}

pub(super) fn horizon_stats<T: Scalar>(time: T, values: &[T]) -> HorizonStats<T> {
    let count = values.len();
    if count == 0 {
        return HorizonStats {
            time,
            count,
            mean: T::nan(),
            std_error: T::nan(),
            quantiles: vec![T::nan(); QUANTILE_LEVELS.len()],
        };
    }
    let n = T::from_usize_lossy(count);
    let mean = values.iter().copied().collect::<CompensatedSum<T>>().value() / n;
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).collect::<CompensatedSum<T>>().value();
    let std_error = if count > 1 { (ss / (n - T::one()) / n).sqrt() } else { T::nan() };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let quantiles = QUANTILE_LEVELS.iter().map(|&q| quantile_sorted(&sorted, q)).collect();
    HorizonStats { time, count, mean, std_error, quantiles }
}

/// Linear interpolation between order statistics (`(n - 1) q` rule).
fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = T::lit(pos - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// Builds the gated simulator and runs the ensemble.
pub fn monte_carlo<T: Scalar>(
    params: &ModelParams<T>,
    history: &HistorySegment<T>,
    config: &SimConfig<T>,
) -> Result<EnsembleSummary<T>> {
    Ok(Simulator::new(params, history, config)?.ensemble())
}

fn num<T: Scalar>(x: T) -> String {
    format!("{:?}", x.to_f64_lossy())
}

impl<T: Scalar> EnsembleSummary<T> {
    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("n_paths", self.n_paths.to_string());
        kv("n_steps", self.n_steps.to_string());
        kv("dt", num(self.dt));
        kv("seed", self.seed.to_string());
        kv("scheme", self.scheme.to_string());
        if let Some(v) = &self.verdict {
            kv("verdict", v.clone());
        }
        for (name, block) in [("sigma", &self.sigma), ("S", &self.s)] {
            for (h, st) in block.iter().enumerate() {
                kv(&format!("{name}.{h}.time"), num(st.time));
                kv(&format!("{name}.{h}.count"), st.count.to_string());
                kv(&format!("{name}.{h}.mean"), num(st.mean));
                kv(&format!("{name}.{h}.se"), num(st.std_error));
            }
        }
        kv("violations", self.violations.to_string());
        kv("violating_paths", self.violating_paths.to_string());
        kv("checked_points", self.checked_points.to_string());
        kv("violation_tol", num(self.violation_tol));
        kv("min_sigma_minus_x", self.min_gap.map_or_else(|| "nan".to_string(), num));
        kv("r2_floor_events", self.floor_events.to_string());
        kv("r2_floor_paths", self.floored_paths.to_string());
        kv("min_r2", num(self.min_r2));
        kv("aborted", self.n_aborted.to_string());
        for (i, (idx, reason)) in self.aborts.iter().enumerate() {
            kv(&format!("abort.{i}"), format!("path {idx}: {reason}"));
        }
        for (i, note) in self.notes.iter().enumerate() {
            kv(&format!("note.{i}"), note.clone());
        }
        out
    }

    /// `variable,time,mean,se,q0.01,...` table.
    pub fn quantile_table(&self) -> String {
        let mut out = String::from("variable,time,count,mean,se");
        for q in QUANTILE_LEVELS {
            let _ = write!(out, ",q{q}");
        }
        out.push('\n');
        for (name, block) in [("sigma", &self.sigma), ("S", &self.s)] {
            for st in block {
                let _ = write!(out, "{name},{},{},{},{}", num(st.time), st.count, num(st.mean), num(st.std_error));
                for &q in &st.quantiles {
                    let _ = write!(out, ",{}", num(q));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Writes `time,R1,R2,sigma,S,X,dW` with 17 significant digits; `X` is
/// `nan` when undefined.
pub fn write_path<T: Scalar, W: Write>(path: &SimPath<T>, mut w: W) -> Result<()> {
    let e = |x: T| format!("{:.16e}", x.to_f64_lossy());
    writeln!(w, "time,R1,R2,sigma,S,X,dW")?;
    for n in 0..path.times.len() {
        let x = path.x.as_ref().map_or_else(|| "nan".to_string(), |xs| e(xs[n]));
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e(path.times[n]),
            e(path.r1[n]),
            e(path.r2[n]),
            e(path.sigma[n]),
            e(path.s[n]),
            x,
            e(path.dw[n])
        )
        .map_err(Error::from)?;
    }
    Ok(())
}
