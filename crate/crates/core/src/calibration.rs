//! Calibration of `σ = β0 + β1 R1 + β2 √R2` to a volatility proxy.
//!
//! The betas solve a box-constrained ridge problem for fixed kernels
//! ([`fit_betas`]). Kernel parameters are searched by Nelder–Mead on
//! log/logit-transformed coordinates from a quasi-random set of starts, each
//! start minimizing the profiled train objective ([`objective`]).

mod nelder_mead;
mod report;

use std::fmt;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assumptions::{check_ii3, Status};
use crate::error::{Error, Result};
use crate::features::{direct_sum, lag_weights, recursive_sum, MarketDataset, Truncation};
use crate::kernel::KernelSpec;
use crate::lsq::{solve_box_qp, BoundState};
use crate::model::Betas;
use crate::scalar::{CompensatedSum, Scalar};

pub use nelder_mead::{nelder_mead, NelderMeadSettings, NmOutcome, CONTRACTION, EXPANSION, REFLECTION, SHRINK};
pub use report::{render_report, ComparisonTable};

/// The four kernel pairs that can be calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelChoice {
    ExpExp,
    TsplTspl,
    ComboCombo,
    ExpTspl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Transform {
    /// `x = e^u`.
    Log,
    /// `x = 1 + e^u`.
    LogAboveOne,
    /// `x = 1 / (1 + e^{-u})`.
    Logit,
}

impl Transform {
    fn to_natural<T: Scalar>(self, u: T) -> T {
        match self {
            Transform::Log => u.exp(),
            Transform::LogAboveOne => T::one() + u.exp(),
            Transform::Logit => T::one() / (T::one() + (-u).exp()),
        }
    }

    fn to_search<T: Scalar>(self, x: T) -> T {
        match self {
            Transform::Log => x.ln(),
            Transform::LogAboveOne => (x - T::one()).ln(),
            Transform::Logit => (x / (T::one() - x)).ln(),
        }
    }

    /// Maps `v ∈ [0, 1)` into `[lo, hi]`, log-uniformly for log transforms.
    fn spread(self, v: f64, lo: f64, hi: f64) -> f64 {
        match self {
            Transform::Log => (lo.ln() + v * (hi.ln() - lo.ln())).exp(),
            Transform::LogAboveOne => 1.0 + ((lo - 1.0).ln() + v * ((hi - 1.0).ln() - (lo - 1.0).ln())).exp(),
            Transform::Logit => lo + v * (hi - lo),
        }
    }
}

use Transform::{Log, LogAboveOne, Logit};

impl KernelChoice {
    pub const ALL: [KernelChoice; 4] = [Self::ExpExp, Self::TsplTspl, Self::ComboCombo, Self::ExpTspl];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExpExp => "exp/exp",
            Self::TsplTspl => "tspl/tspl",
            Self::ComboCombo => "combo/combo",
            Self::ExpTspl => "exp/tspl",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key: String = s.trim().to_ascii_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
        Self::ALL.into_iter().find(|c| c.as_str() == key || c.as_str().replace('/', "_") == key).ok_or_else(|| {
            Error::Parse(format!("unknown kernel choice `{s}` (expected exp/exp, tspl/tspl, combo/combo or exp/tspl)"))
        })
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Self::ExpExp => &["lambda1", "lambda2"],
            Self::TsplTspl => &["alpha1", "delta1", "alpha2", "delta2"],
            Self::ComboCombo => &["theta1", "lambda1a", "lambda1b", "theta2", "lambda2a", "lambda2b"],
            Self::ExpTspl => &["lambda1", "alpha2", "delta2"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    fn transforms(self) -> &'static [Transform] {
        match self {
            Self::ExpExp => &[Log, Log],
            Self::TsplTspl => &[LogAboveOne, Log, LogAboveOne, Log],
            Self::ComboCombo => &[Logit, Log, Log, Logit, Log, Log],
            Self::ExpTspl => &[Log, LogAboveOne, Log],
        }
    }

    /// Natural-space ranges the starting points are spread over.
    fn start_ranges(self) -> &'static [(f64, f64)] {
        const LAMBDA: (f64, f64) = (1.0, 100.0);
        const ALPHA: (f64, f64) = (1.1, 3.0);
        const DELTA: (f64, f64) = (0.002, 0.2);
        const THETA: (f64, f64) = (0.1, 0.9);
        const FAST: (f64, f64) = (10.0, 200.0);
        const SLOW: (f64, f64) = (0.5, 20.0);
        match self {
            Self::ExpExp => &[LAMBDA, LAMBDA],
            Self::TsplTspl => &[ALPHA, DELTA, ALPHA, DELTA],
            Self::ComboCombo => &[THETA, FAST, SLOW, THETA, FAST, SLOW],
            Self::ExpTspl => &[LAMBDA, ALPHA, DELTA],
        }
    }

    /// Ridge weight applied by default: only the TSPL pair is penalized.
    pub fn default_ridge(self) -> f64 {
        match self {
            Self::TsplTspl => 1e-6,
            _ => 0.0,
        }
    }

    /// Builds `(K1, K2)`; out-of-domain parameters are errors.
    pub fn kernels<T: Scalar>(self, p: &[T]) -> Result<(KernelSpec<T>, KernelSpec<T>)> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} takes {} parameters, got {}",
                self,
                self.n_params(),
                p.len()
            )));
        }
        let inf = T::infinity();
        match self {
            Self::ExpExp => Ok((KernelSpec::exponential(p[0])?, KernelSpec::exponential(p[1])?)),
            Self::TsplTspl => Ok((KernelSpec::tspl(p[0], p[1], inf)?, KernelSpec::tspl(p[2], p[3], inf)?)),
            Self::ComboCombo => {
                Ok((KernelSpec::convex_combo(p[0], p[1], p[2])?, KernelSpec::convex_combo(p[3], p[4], p[5])?))
            }
            Self::ExpTspl => Ok((KernelSpec::exponential(p[0])?, KernelSpec::tspl(p[1], p[2], inf)?)),
        }
    }

    fn to_search<T: Scalar>(self, p: &[T]) -> Vec<T> {
        p.iter().zip(self.transforms()).map(|(&x, t)| t.to_search(x)).collect()
    }

    fn to_natural<T: Scalar>(self, u: &[T]) -> Vec<T> {
        u.iter().zip(self.transforms()).map(|(&x, t)| t.to_natural(x)).collect()
    }
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Box for `(β0, β1, β2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBounds<T> {
    pub lower: [T; 3],
    pub upper: [T; 3],
}

impl<T: Scalar> Default for BetaBounds<T> {
    /// `β0 >= 0`, `β1 <= 1`, `β2 >= 0`.
    fn default() -> Self {
        Self { lower: [T::zero(), T::neg_infinity(), T::zero()], upper: [T::infinity(), T::one(), T::infinity()] }
    }
}

impl<T: Scalar> BetaBounds<T> {
    pub fn unbounded() -> Self {
        Self { lower: [T::neg_infinity(); 3], upper: [T::infinity(); 3] }
    }

    pub fn with_beta1_max(mut self, v: T) -> Self {
        self.upper[1] = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "empty bound for beta{i}: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, b: &Betas<T>) -> bool {
        b.to_array().iter().enumerate().all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSpec<T> {
    pub choice: KernelChoice,
    pub bounds: BetaBounds<T>,
    /// Ridge weight `κ` on the betas.
    pub ridge: T,
    /// Whether `β0` is part of the ridge penalty.
    pub penalize_intercept: bool,
    pub multistarts: usize,
    pub optimizer: NelderMeadSettings,
    pub truncation: Truncation,
    /// Optional first starting point (natural parameters).
    pub initial: Option<Vec<T>>,
    /// Horizon for the positivity diagnostic.
    pub horizon: T,
}

impl<T: Scalar> CalibrationSpec<T> {
    /// Defaults: `BetaBounds::default`, ridge per [`KernelChoice::default_ridge`],
    /// penalized intercept, 8 starts.
    pub fn new(choice: KernelChoice) -> Self {
        Self {
            choice,
            bounds: BetaBounds::default(),
            ridge: T::lit(choice.default_ridge()),
            penalize_intercept: true,
            multistarts: 8,
            optimizer: NelderMeadSettings::default(),
            truncation: Truncation::FullHistory,
            initial: None,
            horizon: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.ridge >= T::zero()) || !self.ridge.is_finite() {
            return Err(Error::InvalidArgument(format!("ridge weight must be finite and >= 0, got {}", self.ridge)));
        }
        if self.multistarts == 0 {
            return Err(Error::InvalidArgument("multistarts must be >= 1".into()));
        }
        if let Some(p) = &self.initial {
            self.choice.kernels(p)?;
        }
        self.optimizer.validate()
    }
}

/// Result of the inner beta problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit<T> {
    pub betas: Betas<T>,
    /// `‖Xβ - y‖² / n`.
    pub mse: T,
    /// `mse + κ ‖β‖²` (without `β0` when the intercept is not penalized).
    pub objective: T,
    pub state: [BoundState; 3],
    pub rank_deficient: bool,
}

impl<T: Scalar> BetaFit<T> {
    /// True when some bound is active.
    pub fn active(&self) -> bool {
        self.state.iter().any(|s| *s != BoundState::Free)
    }
}

/// Solves `min ‖Xβ - y‖²/n + κ‖β‖²` over the box, with design rows
/// `(1, R1, √R2)`.
///
/// Columns are scaled to unit RMS before the normal equations are formed.
/// A singular free-set system yields the minimum-norm solution and sets
/// `rank_deficient`.
pub fn fit_betas<T: Scalar>(
    r1: &[T],
    sqrt_r2: &[T],
    y: &[T],
    bounds: &BetaBounds<T>,
    ridge: T,
    penalize_intercept: bool,
) -> Result<BetaFit<T>> {
    let n = y.len();
    if r1.len() != n || sqrt_r2.len() != n {
        return Err(Error::DimensionMismatch(format!("{} / {} feature rows for {n} targets", r1.len(), sqrt_r2.len())));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 rows, got {n}")));
    }
    if r1.iter().chain(sqrt_r2).chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("design and targets must be finite".into()));
    }
    if !(ridge >= T::zero()) {
        return Err(Error::InvalidArgument(format!("ridge weight must be >= 0, got {ridge}")));
    }
    bounds.validate()?;
    let nn = T::from_usize_lossy(n);
    let col = |j: usize, i: usize| match j {
        0 => T::one(),
        1 => r1[i],
        _ => sqrt_r2[i],
    };
    let sum = |f: &dyn Fn(usize) -> T| (0..n).map(f).collect::<CompensatedSum<T>>().value();
    let mut scale = [T::one(); 3];
    for (j, s) in scale.iter_mut().enumerate() {
        let rms = (sum(&|i| col(j, i) * col(j, i)) / nn).sqrt();
        if rms > T::zero() {
            *s = T::one() / rms;
        }
    }
    let mut h = vec![vec![T::zero(); 3]; 3];
    let mut g = vec![T::zero(); 3];
    for a in 0..3 {
        for b in a..3 {
            let v = sum(&|i| col(a, i) * col(b, i)) / nn * scale[a] * scale[b];
            h[a][b] = v;
            h[b][a] = v;
        }
        g[a] = sum(&|i| col(a, i) * y[i]) / nn * scale[a];
        if a > 0 || penalize_intercept {
            h[a][a] += ridge * scale[a] * scale[a];
        }
    }
    let lower: Vec<T> = (0..3).map(|j| bounds.lower[j] / scale[j]).collect();
    let upper: Vec<T> = (0..3).map(|j| bounds.upper[j] / scale[j]).collect();
    let sol = solve_box_qp(&h, &g, &lower, &upper)?;
    let beta: Vec<T> = (0..3).map(|j| (sol.x[j] * scale[j]).max(bounds.lower[j]).min(bounds.upper[j])).collect();
    let betas = Betas::new(beta[0], beta[1], beta[2]);
    let mse = sum(&|i| {
        let e = betas.sigma_from_sqrt(r1[i], sqrt_r2[i]) - y[i];
        e * e
    }) / nn;
    let penalty: T = beta.iter().enumerate().filter(|(j, _)| *j > 0 || penalize_intercept).map(|(_, &b)| b * b).sum();
    Ok(BetaFit {
        betas,
        mse,
        objective: mse + ridge * penalty,
        state: [sol.state[0], sol.state[1], sol.state[2]],
        rank_deficient: sol.rank_deficient,
    })
}

/// Coefficient of determination `1 - SSE / SST`, SST centered on the mean
/// of the evaluated rows. `undefined` marks `SST = 0` (value set to 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSquared<T> {
    pub value: T,
    pub undefined: bool,
}

pub fn r_squared<T: Scalar>(predicted: &[T], observed: &[T]) -> RSquared<T> {
    let n = T::from_usize_lossy(observed.len().max(1));
    let mean = observed.iter().copied().collect::<CompensatedSum<T>>().value() / n;
    let sst = observed.iter().map(|&y| (y - mean) * (y - mean)).collect::<CompensatedSum<T>>().value();
    let sse = predicted.iter().zip(observed).map(|(&p, &y)| (p - y) * (p - y)).collect::<CompensatedSum<T>>().value();
    if !(sst > T::zero()) {
        return RSquared { value: T::zero(), undefined: true };
    }
    RSquared { value: T::one() - sse / sst, undefined: false }
}

/// Returns and row indices prepared once per dataset.
///
/// Train evaluations only read returns strictly before the first test row
/// and the train targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationData<T> {
    pub returns: Vec<T>,
    pub dates: Vec<NaiveDate>,
    pub split_date: NaiveDate,
    /// Indices into `returns` of train rows.
    pub train_rows: Vec<usize>,
    pub train_target: Vec<T>,
    pub test_rows: Vec<usize>,
    pub test_target: Vec<T>,
    /// Proxy observations without a return on the same date.
    pub dropped_proxy: usize,
}

impl<T: Scalar> CalibrationData<T> {
    pub fn new(dataset: &MarketDataset<T>) -> Result<Self> {
        let returns = dataset.returns();
        let index: std::collections::HashMap<NaiveDate, usize> =
            returns.dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let mut data = Self {
            returns: returns.values.clone(),
            dates: returns.dates.clone(),
            split_date: dataset.split_date,
            train_rows: Vec::new(),
            train_target: Vec::new(),
            test_rows: Vec::new(),
            test_target: Vec::new(),
            dropped_proxy: 0,
        };
        for (d, &y) in dataset.proxy.dates.iter().zip(&dataset.proxy.values) {
            match index.get(d) {
                Some(&i) if *d < dataset.split_date => {
                    data.train_rows.push(i);
                    data.train_target.push(y);
                }
                Some(&i) => {
                    data.test_rows.push(i);
                    data.test_target.push(y);
                }
                None => data.dropped_proxy += 1,
            }
        }
        if data.train_rows.len() < 3 {
            return Err(Error::Data(format!(
                "only {} train rows before {}; need at least 3",
                data.train_rows.len(),
                dataset.split_date
            )));
        }
        if data.test_rows.is_empty() {
            return Err(Error::Data(format!("no test rows on or after {}", dataset.split_date)));
        }
        Ok(data)
    }

    /// Number of leading returns the train rows depend on.
    pub fn train_horizon(&self) -> usize {
        self.train_rows.iter().max().map_or(0, |&i| i + 1)
    }
}

fn feature<T: Scalar>(x: &[T], k: &KernelSpec<T>, truncation: Truncation) -> Result<Vec<T>> {
    if truncation == Truncation::FullHistory {
        if let Some(v) = recursive_sum(x, k) {
            return Ok(v);
        }
    }
    Ok(direct_sum(x, &lag_weights(k, x.len(), truncation)?))
}

/// `(R1, √R2)` at `rows`, using `returns[..len]` only.
fn design<T: Scalar>(
    returns: &[T],
    rows: &[usize],
    k1: &KernelSpec<T>,
    k2: &KernelSpec<T>,
    truncation: Truncation,
) -> Result<(Vec<T>, Vec<T>)> {
    let squared: Vec<T> = returns.iter().map(|&r| r * r).collect();
    let f1 = feature(returns, k1, truncation)?;
    let f2 = feature(&squared, k2, truncation)?;
    Ok((rows.iter().map(|&i| f1[i]).collect(), rows.iter().map(|&i| f2[i].max(T::zero()).sqrt()).collect()))
}

fn train_fit<T: Scalar>(params: &[T], data: &CalibrationData<T>, spec: &CalibrationSpec<T>) -> Result<BetaFit<T>> {
    let (k1, k2) = spec.choice.kernels(params)?;
    let (r1, sr2) = design(&data.returns[..data.train_horizon()], &data.train_rows, &k1, &k2, spec.truncation)?;
    fit_betas(&r1, &sr2, &data.train_target, &spec.bounds, spec.ridge, spec.penalize_intercept)
}

/// Train MSE plus the ridge penalty at the profiled betas; `+inf` outside
/// the parameter domain or on any numerical failure.
pub fn objective<T: Scalar>(params: &[T], data: &CalibrationData<T>, spec: &CalibrationSpec<T>) -> T {
    match train_fit(params, data, spec) {
        Ok(fit) if fit.objective.is_finite() => fit.objective,
        _ => T::infinity(),
    }
}

/// Outcome of one multistart run.
#[derive(Debug, Clone, PartialEq)]
pub struct StartTrace<T> {
    pub initial: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace<T> {
    pub starts: Vec<StartTrace<T>>,
    pub best_start: usize,
}

impl<T: Scalar> OptimizerTrace<T> {
    pub fn total_evaluations(&self) -> usize {
        self.starts.iter().map(|s| s.evaluations).sum()
    }

    pub fn failed_starts(&self) -> usize {
        self.starts.iter().filter(|s| !s.value.is_finite()).count()
    }
}

/// The (II.3) positivity diagnostic for the fitted kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityDiagnostic<T> {
    /// Closed-form ratio (`2λδ/α` for exp/tspl, `2λ1/λ2` for exp/exp) or
    /// the numeric check's value.
    pub ratio: Option<T>,
    pub status: String,
    pub pass: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult<T> {
    /// Free-form dataset label.
    pub dataset: String,
    pub choice: KernelChoice,
    pub betas: Betas<T>,
    pub beta_state: [BoundState; 3],
    pub params: Vec<T>,
    pub r2_train: RSquared<T>,
    pub r2_test: RSquared<T>,
    pub objective: T,
    pub mse_train: T,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge: T,
    pub positivity: PositivityDiagnostic<T>,
    pub trace: OptimizerTrace<T>,
}

impl<T: Scalar> CalibrationResult<T> {
    pub fn kernels(&self) -> Result<(KernelSpec<T>, KernelSpec<T>)> {
        self.choice.kernels(&self.params)
    }

    pub fn param(&self, name: &str) -> Option<T> {
        self.choice.param_names().iter().position(|n| *n == name).map(|i| self.params[i])
    }
}

/// First `count` points of the Halton sequence in `dim` dimensions, each
/// shifted modulo 1 by a seed-derived offset.
pub fn halton_points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let base = PRIMES[d % PRIMES.len()];
                    let mut f = 1.0;
                    let mut r = 0.0;
                    let mut k = i;
                    while k > 0 {
                        f /= base as f64;
                        r += f * (k % base) as f64;
                        k /= base;
                    }
                    (r + shift[d]).fract()
                })
                .collect()
        })
        .collect()
}

/// Natural-space starting points for `spec` and `seed`.
pub fn starting_points<T: Scalar>(spec: &CalibrationSpec<T>, seed: u64) -> Vec<Vec<T>> {
    let choice = spec.choice;
    let mut starts: Vec<Vec<T>> = spec.initial.iter().cloned().collect();
    let need = spec.multistarts.saturating_sub(starts.len());
    for u in halton_points(need, choice.n_params(), seed) {
        starts.push(
            u.iter()
                .zip(choice.transforms().iter().zip(choice.start_ranges()))
                .map(|(&v, (t, &(lo, hi)))| T::lit(t.spread(v, lo, hi)))
                .collect(),
        );
    }
    starts.truncate(spec.multistarts);
    starts
}

/// Fits on a prepared dataset.
pub fn calibrate_prepared<T: Scalar>(
    data: &CalibrationData<T>,
    spec: &CalibrationSpec<T>,
    seed: u64,
    label: &str,
) -> Result<CalibrationResult<T>> {
    spec.validate()?;
    let choice = spec.choice;
    let starts = starting_points(spec, seed);
    let runs: Vec<(StartTrace<T>, Vec<T>)> = starts
        .par_iter()
        .map(|x0| {
            let u0 = choice.to_search(x0);
            let out = nelder_mead(|u: &[T]| objective(&choice.to_natural(u), data, spec), &u0, &spec.optimizer);
            let trace = StartTrace {
                initial: x0.clone(),
                value: out.value,
                iterations: out.iterations,
                evaluations: out.evaluations,
                converged: out.converged,
            };
            (trace, choice.to_natural(&out.x))
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, (t, _))| t.value.is_finite())
        .min_by(|a, b| a.1 .0.value.partial_cmp(&b.1 .0.value).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Calibration(format!("all {} starts failed the parameter domain checks", runs.len())))?;
    let params = runs[best].1.clone();
    let trace = OptimizerTrace { starts: runs.into_iter().map(|(t, _)| t).collect(), best_start: best };
    evaluate_params(data, spec, params, trace, label)
}

/// Scores fixed kernel parameters: betas from the train rows, R² on both
/// partitions and the positivity diagnostic.
pub fn evaluate_params<T: Scalar>(
    data: &CalibrationData<T>,
    spec: &CalibrationSpec<T>,
    params: Vec<T>,
    trace: OptimizerTrace<T>,
    label: &str,
) -> Result<CalibrationResult<T>> {
    let fit = train_fit(&params, data, spec)?;
    let (k1, k2) = spec.choice.kernels(&params)?;
    let predict = |rows: &[usize]| -> Result<Vec<T>> {
        let (r1, sr2) = design(&data.returns, rows, &k1, &k2, spec.truncation)?;
        Ok(r1.iter().zip(&sr2).map(|(&a, &b)| fit.betas.sigma_from_sqrt(a, b)).collect())
    };
    let r2_train = r_squared(&predict(&data.train_rows)?, &data.train_target);
    let r2_test = r_squared(&predict(&data.test_rows)?, &data.test_target);
    let ii3 = check_ii3(&k1, &k2, spec.horizon)?;
    let positivity = PositivityDiagnostic {
        ratio: ii3.value,
        status: ii3.status.as_str().to_string(),
        pass: ii3.status.is_pass(),
        note: ii3.note.clone(),
    };
    debug_assert!(ii3.status != Status::Fail || ii3.witness.is_some());
    Ok(CalibrationResult {
        dataset: label.to_string(),
        choice: spec.choice,
        betas: fit.betas,
        beta_state: fit.state,
        params,
        r2_train,
        r2_test,
        objective: fit.objective,
        mse_train: fit.mse,
        n_train: data.train_rows.len(),
        n_test: data.test_rows.len(),
        ridge: spec.ridge,
        positivity,
        trace,
    })
}

/// Calibrates `spec.choice` on `dataset`.
pub fn calibrate<T: Scalar>(
    dataset: &MarketDataset<T>,
    spec: &CalibrationSpec<T>,
    seed: u64,
) -> Result<CalibrationResult<T>> {
    calibrate_prepared(&CalibrationData::new(dataset)?, spec, seed, "")
}

fn bound_str(s: BoundState) -> &'static str {
    match s {
        BoundState::Free => "free",
        BoundState::AtLower => "lower",
        BoundState::AtUpper => "upper",
    }
}

fn parse_bound(s: &str) -> Result<BoundState> {
    match s {
        "free" => Ok(BoundState::Free),
        "lower" => Ok(BoundState::AtLower),
        "upper" => Ok(BoundState::AtUpper),
        other => Err(Error::Parse(format!("unknown bound state `{other}`"))),
    }
}

fn num<T: Scalar>(x: T) -> String {
    format!("{:?}", x.to_f64_lossy())
}

impl<T: Scalar> CalibrationResult<T> {
    /// `key=value` lines; [`CalibrationResult::from_kv`] reads them back.
    pub fn to_kv(&self) -> String {
        let mut lines = vec![
            format!("dataset={}", self.dataset),
            format!("choice={}", self.choice),
            format!("beta0={}", num(self.betas.b0)),
            format!("beta1={}", num(self.betas.b1)),
            format!("beta2={}", num(self.betas.b2)),
            format!("beta_state={}", self.beta_state.iter().map(|s| bound_str(*s)).collect::<Vec<_>>().join(",")),
        ];
        for (name, &v) in self.choice.param_names().iter().zip(&self.params) {
            lines.push(format!("param.{name}={}", num(v)));
        }
        lines.extend([
            format!("r2_train={}", num(self.r2_train.value)),
            format!("r2_train_undefined={}", self.r2_train.undefined),
            format!("r2_test={}", num(self.r2_test.value)),
            format!("r2_test_undefined={}", self.r2_test.undefined),
            format!("objective={}", num(self.objective)),
            format!("mse_train={}", num(self.mse_train)),
            format!("n_train={}", self.n_train),
            format!("n_test={}", self.n_test),
            format!("ridge={}", num(self.ridge)),
            format!("positivity.ratio={}", self.positivity.ratio.map_or_else(|| "none".into(), num)),
            format!("positivity.status={}", self.positivity.status),
            format!("positivity.pass={}", self.positivity.pass),
            format!("positivity.note={}", self.positivity.note),
            format!("trace.starts={}", self.trace.starts.len()),
            format!("trace.best_start={}", self.trace.best_start),
            format!("trace.evaluations={}", self.trace.total_evaluations()),
            format!("trace.failed_starts={}", self.trace.failed_starts()),
        ]);
        for (i, s) in self.trace.starts.iter().enumerate() {
            lines
                .push(format!("trace.{i}.initial={}", s.initial.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" ")));
            lines.push(format!("trace.{i}.value={}", num(s.value)));
            lines.push(format!("trace.{i}.iterations={}", s.iterations));
            lines.push(format!("trace.{i}.evaluations={}", s.evaluations));
            lines.push(format!("trace.{i}.converged={}", s.converged));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map: std::collections::HashMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::Parse(format!("missing key `{k}`")));
        let real = |k: &str| -> Result<T> {
            let v = get(k)?;
            v.parse::<f64>().map(T::lit).map_err(|e| Error::Parse(format!("`{k}` = `{v}`: {e}")))
        };
        let int = |k: &str| -> Result<usize> {
            let v = get(k)?;
            v.parse::<usize>().map_err(|e| Error::Parse(format!("`{k}` = `{v}`: {e}")))
        };
        let flag = |k: &str| -> Result<bool> {
            let v = get(k)?;
            v.parse::<bool>().map_err(|e| Error::Parse(format!("`{k}` = `{v}`: {e}")))
        };
        let choice = KernelChoice::parse(get("choice")?)?;
        let states: Vec<BoundState> = get("beta_state")?.split(',').map(parse_bound).collect::<Result<_>>()?;
        if states.len() != 3 {
            return Err(Error::Parse("beta_state needs three entries".into()));
        }
        let params = choice.param_names().iter().map(|n| real(&format!("param.{n}"))).collect::<Result<Vec<T>>>()?;
        let n_starts = int("trace.starts")?;
        let mut starts = Vec::with_capacity(n_starts);
        for i in 0..n_starts {
            let initial = get(&format!("trace.{i}.initial"))?
                .split_whitespace()
                .map(|v| v.parse::<f64>().map(T::lit).map_err(|e| Error::Parse(format!("trace.{i}.initial: {e}"))))
                .collect::<Result<Vec<T>>>()?;
            starts.push(StartTrace {
                initial,
                value: real(&format!("trace.{i}.value"))?,
                iterations: int(&format!("trace.{i}.iterations"))?,
                evaluations: int(&format!("trace.{i}.evaluations"))?,
                converged: flag(&format!("trace.{i}.converged"))?,
            });
        }
        let ratio = match get("positivity.ratio")? {
            "none" => None,
            _ => Some(real("positivity.ratio")?),
        };
        Ok(Self {
            dataset: get("dataset")?.to_string(),
            choice,
            betas: Betas::new(real("beta0")?, real("beta1")?, real("beta2")?),
            beta_state: [states[0], states[1], states[2]],
            params,
            r2_train: RSquared { value: real("r2_train")?, undefined: flag("r2_train_undefined")? },
            r2_test: RSquared { value: real("r2_test")?, undefined: flag("r2_test_undefined")? },
            objective: real("objective")?,
            mse_train: real("mse_train")?,
            n_train: int("n_train")?,
            n_test: int("n_test")?,
            ridge: real("ridge")?,
            positivity: PositivityDiagnostic {
                ratio,
                status: get("positivity.status")?.to_string(),
                pass: flag("positivity.pass")?,
                note: get("positivity.note")?.to_string(),
            },
            trace: OptimizerTrace { starts, best_start: int("trace.best_start")? },
        })
    }
}

#[cfg(test)]
mod tests;
