//! Monte Carlo simulation of `(R1, R2)`, the volatility `σ`, the price `S`
//! and the lower-bound process `X` on a uniform grid.
//!
//! Two schemes share the same noise:
//! - [`Scheme::MarkovRecursion`] propagates one state per exponential factor
//!   with exponential-integrator weights (frozen `σ` over a step).
//! - [`Scheme::DirectQuadrature`] evaluates the left-point Volterra sums
//!   `Σ_{k<n} K(t_k, t_n) x_k`, O(N²) per path for convolution kernels.
//!
//! Each path draws its noise from ChaCha8 seeded with the master seed and
//! switched to stream `path_index`, so results do not depend on scheduling.

mod ensemble;
mod g1;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assumptions::{full_report, AssumptionReport, Verdict};
use crate::error::{Error, Result};
use crate::kernel::{fit_sum_of_exponentials, ExpFactors, KernelFamily, KernelSpec, SoeFit};
use crate::model::{deterministic_g2, HistorySegment, ModelParams};
use crate::scalar::Scalar;

pub use ensemble::{monte_carlo, write_path, EnsembleSummary, HorizonStats, PathSummary, QUANTILE_LEVELS};
pub use g1::{G1Plan, PastNoise, TAIL_MASS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    MarkovRecursion,
    DirectQuadrature,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::MarkovRecursion => "markov",
            Scheme::DirectQuadrature => "direct",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markov" | "markov_recursion" | "markovrecursion" => Ok(Scheme::MarkovRecursion),
            "direct" | "quadrature" | "direct_quadrature" | "directquadrature" => Ok(Scheme::DirectQuadrature),
            other => Err(Error::Parse(format!("unknown scheme `{other}` (expected markov or direct)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the past-noise term `g1` is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum G1Mode {
    /// Sample past Brownian increments per path.
    Sampled,
    /// Take `g1 ≡ 0`.
    Zero,
}

impl G1Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            G1Mode::Sampled => "sampled",
            G1Mode::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sampled" => Ok(G1Mode::Sampled),
            "zero" => Ok(G1Mode::Zero),
            other => Err(Error::Parse(format!("unknown g1 mode `{other}` (expected sampled or zero)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub horizon: T,
    pub steps_per_year: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub r2_floor: T,
    pub g1_mode: G1Mode,
    /// Simulate even when the assumption gate returns `NEITHER`.
    pub force: bool,
    /// Sum-of-exponentials terms for running TSPL kernels through the
    /// Markov recursion.
    pub soe_terms: Option<usize>,
    /// Times at which the ensemble summary reports `σ` and `S`; empty means
    /// the horizon only.
    pub report_times: Vec<T>,
    /// Lower-bound violations count grid points with
    /// `σ < X - factor · √Δt · |σ0|`.
    pub violation_factor: T,
}

impl<T: Scalar> SimConfig<T> {
    /// Defaults: 2520 steps per year, Markov scheme, `r2_floor = 1e-12`,
    /// sampled `g1`, violation factor 10.
    pub fn new(horizon: T, n_paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            steps_per_year: 2520,
            n_paths,
            seed,
            scheme: Scheme::MarkovRecursion,
            r2_floor: T::lit(1e-12),
            g1_mode: G1Mode::Sampled,
            force: false,
            soe_terms: None,
            report_times: Vec::new(),
            violation_factor: T::lit(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be finite and > 0, got {}", self.horizon)));
        }
        if self.steps_per_year == 0 {
            return Err(Error::InvalidArgument("steps_per_year must be >= 1".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
        }
        if !(self.r2_floor > T::zero()) {
            return Err(Error::InvalidArgument(format!("r2_floor must be > 0, got {}", self.r2_floor)));
        }
        if self.report_times.iter().any(|&t| !(t >= T::zero() && t <= self.horizon)) {
            return Err(Error::InvalidArgument("report times must lie in [0, horizon]".into()));
        }
        Ok(())
    }

    /// Number of steps: `round(T · steps_per_year)`, at least 1.
    pub fn n_steps(&self) -> usize {
        let n = (self.horizon * T::from_usize_lossy(self.steps_per_year)).round().to_usize().unwrap_or(1);
        n.max(1)
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n_steps())
    }
}

/// Noise consumed by one path.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample<T> {
    pub past: PastNoise<T>,
    /// Future increments `ΔW_k = W(t_{k+1}) - W(t_k)`, one per step.
    pub dw: Vec<T>,
}

impl<T: Scalar> NoiseSample<T> {
    /// Same realization on a grid twice as coarse: future increments summed
    /// in pairs, past noise unchanged.
    pub fn coarsen(&self) -> Result<Self> {
        if !self.dw.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("cannot pair-sum {} increments", self.dw.len())));
        }
        Ok(Self { past: self.past.clone(), dw: self.dw.chunks(2).map(|c| c[0] + c[1]).collect() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent<T> {
    /// `R2` fell below the floor and `√R2` used the floor instead.
    R2Floor { step: usize, time: T, value: T },
    /// The assumption gate returned `NEITHER` and the run was forced.
    GateOverridden { verdict: Verdict },
    /// `K1` is not separable, so `X` is not defined.
    LowerBoundUnavailable,
    /// A TSPL kernel was replaced by a sum of exponentials.
    SoeApproximation { kernel: usize, terms: usize, max_rel_error: T },
}

impl<T: Scalar> fmt::Display for SimEvent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEvent::R2Floor { step, time, value } => write!(f, "r2_floor step={step} t={time:?} R2={value:?}"),
            SimEvent::GateOverridden { verdict } => write!(f, "gate overridden (verdict {verdict})"),
            SimEvent::LowerBoundUnavailable => f.write_str("lower bound X unavailable: K1 not separable"),
            SimEvent::SoeApproximation { kernel, terms, max_rel_error } => {
                write!(f, "K{kernel} approximated by {terms} exponentials (max rel error {max_rel_error:?})")
            }
        }
    }
}

/// Floor activations kept individually in a path's event log.
const MAX_LOGGED_FLOORS: usize = 100;

/// One simulated path. All arrays have `N + 1` entries aligned with `times`;
/// `dw[n]` is the increment ending at `times[n]` (`dw[0] = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath<T> {
    pub times: Vec<T>,
    pub r1: Vec<T>,
    pub r2: Vec<T>,
    pub sigma: Vec<T>,
    pub s: Vec<T>,
    pub x: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub past: PastNoise<T>,
    pub events: Vec<SimEvent<T>>,
    pub floor_count: usize,
}

/// Per-kernel convolution engine.
#[derive(Debug, Clone)]
enum Engine<T> {
    /// Exponential-integrator factor states.
    Factors { weights: Vec<T>, decay: Vec<T>, phi: Vec<T> },
    /// Reversed lag table: `rev[N - l] = K(l Δt)` for `l = 1..=N`.
    LagTable { rev: Vec<T> },
    /// `S_{n+1} = ratio[n] (S_n + diag[n] x_n)` for separable kernels.
    Separable { diag: Vec<T>, ratio: Vec<T> },
}

#[derive(Debug, Clone)]
enum EngineState<T> {
    Factors(Vec<T>),
    History { xs: Vec<T> },
    Separable(T),
}

impl<T: Scalar> Engine<T> {
    fn factors(f: &ExpFactors<T>, dt: T) -> Self {
        let decay = f.rates.iter().map(|&m| (-m * dt).exp()).collect();
        let phi = f
            .rates
            .iter()
            .map(|&m| {
                let z = m * dt;
                if z == T::zero() {
                    T::one()
                } else {
                    -(-z).exp_m1() / z
                }
            })
            .collect();
        Engine::Factors { weights: f.weights.clone(), decay, phi }
    }

    fn direct(k: &KernelSpec<T>, times: &[T], dt: T) -> Result<Self> {
        let n = times.len() - 1;
        if k.is_convolution() {
            let mut rev = vec![T::zero(); n];
            for l in 1..=n {
                rev[n - l] = k.lag_value(T::from_usize_lossy(l) * dt).unwrap_or_else(T::zero);
            }
            return Ok(Engine::LagTable { rev });
        }
        let sep =
            k.separable_decomposition().ok_or_else(|| Error::Contract(format!("no direct scheme for kernel {k}")))?;
        let diag = times[..n].iter().map(|&t| k.evaluate(t, t)).collect::<Result<Vec<T>>>()?;
        let ratio = times.windows(2).map(|w| (sep.h(w[1]) - sep.h(w[0])).exp()).collect();
        Ok(Engine::Separable { diag, ratio })
    }

    fn init(&self, n_steps: usize) -> EngineState<T> {
        match self {
            Engine::Factors { weights, .. } => EngineState::Factors(vec![T::zero(); weights.len()]),
            Engine::LagTable { .. } => EngineState::History { xs: Vec::with_capacity(n_steps) },
            Engine::Separable { .. } => EngineState::Separable(T::zero()),
        }
    }

    /// Convolution value at step `n` given the inputs `x_0 .. x_{n-1}`.
    fn value(&self, state: &EngineState<T>, n: usize) -> T {
        match (self, state) {
            (Engine::Factors { weights, .. }, EngineState::Factors(y)) => {
                weights.iter().zip(y).map(|(&w, &v)| w * v).sum()
            }
            (Engine::LagTable { rev }, EngineState::History { xs }) => dot(&xs[..n], &rev[rev.len() - n..]),
            (Engine::Separable { .. }, EngineState::Separable(s)) => *s,
            _ => T::nan(),
        }
    }

    /// Absorbs `x_n`.
    fn push(&self, state: &mut EngineState<T>, n: usize, x: T) {
        match (self, state) {
            (Engine::Factors { decay, phi, .. }, EngineState::Factors(y)) => {
                for j in 0..y.len() {
                    y[j] = decay[j] * y[j] + phi[j] * x;
                }
            }
            (Engine::LagTable { .. }, EngineState::History { xs }) => xs.push(x),
            (Engine::Separable { diag, ratio }, EngineState::Separable(s)) => {
                *s = ratio[n] * (*s + diag[n] * x);
            }
            _ => {}
        }
    }
}

/// Dot product with four independent accumulators (fixed order).
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        total += a[i] * b[i];
    }
    total
}

/// `X_t / σ0` pieces for separable `K1`.
#[derive(Debug, Clone)]
struct LowerBound<T> {
    /// `K1(t_k, t_k)`.
    diag: Vec<T>,
    /// `h(t_n) - h(0)`.
    h_shift: Vec<T>,
}

/// Per-step observer used by the shared integration loop.
pub(crate) trait Observer<T> {
    fn record(&mut self, n: usize, r1: T, r2: T, sigma: T, s: T, x: Option<T>);
    fn floor(&mut self, n: usize, time: T, value: T);
}

/// Precomputed, immutable simulation setup shared by every path.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    params: ModelParams<T>,
    config: SimConfig<T>,
    times: Vec<T>,
    dt: T,
    g2: Vec<T>,
    g1: G1Plan<T>,
    past_widths: Vec<T>,
    e1: Engine<T>,
    e2: Engine<T>,
    lower: Option<LowerBound<T>>,
    setup_events: Vec<SimEvent<T>>,
    report: Option<AssumptionReport<T>>,
}

impl<T: Scalar> Simulator<T> {
    /// Validates inputs, runs the assumption gate and precomputes `g2`, the
    /// `g1` plan and the kernel engines.
    pub fn new(params: &ModelParams<T>, history: &HistorySegment<T>, config: &SimConfig<T>) -> Result<Self> {
        config.validate()?;
        params.check_history_span(history)?;
        history.validate()?;
        let mut setup_events = Vec::new();
        let report = full_report(params, history, config.horizon)?;
        if report.verdict == Verdict::Neither {
            if !config.force {
                return Err(Error::Contract(format!(
                    "assumption gate returned NEITHER for T = {}; rerun with force to simulate anyway",
                    config.horizon
                )));
            }
            setup_events.push(SimEvent::GateOverridden { verdict: report.verdict });
        }
        let mut sim = Self::build(params, history, config, setup_events)?;
        sim.report = Some(report);
        Ok(sim)
    }

    /// Like [`Simulator::new`] without the assumption gate (no report).
    pub fn new_ungated(params: &ModelParams<T>, history: &HistorySegment<T>, config: &SimConfig<T>) -> Result<Self> {
        config.validate()?;
        params.check_history_span(history)?;
        history.validate()?;
        Self::build(params, history, config, Vec::new())
    }

    fn build(
        params: &ModelParams<T>,
        history: &HistorySegment<T>,
        config: &SimConfig<T>,
        mut setup_events: Vec<SimEvent<T>>,
    ) -> Result<Self> {
        let n = config.n_steps();
        let dt = config.dt();
        let times: Vec<T> = (0..=n).map(|i| T::from_usize_lossy(i) * dt).collect();
        let g2 = deterministic_g2(&params.k2, history, &params.betas, &times)?;
        let g1 = G1Plan::new(&params.k1, history, &params.betas, &times, dt, config.g1_mode == G1Mode::Zero)?;
        let mut engine = |k: &KernelSpec<T>, idx: usize| -> Result<Engine<T>> {
            match config.scheme {
                Scheme::DirectQuadrature => Engine::direct(k, &times, dt),
                Scheme::MarkovRecursion => {
                    if let Some(f) = k.exp_factors() {
                        return Ok(Engine::factors(&f, dt));
                    }
                    match (k.family(), config.soe_terms) {
                        (KernelFamily::Tspl { .. }, Some(terms)) => {
                            let max_lag = config.horizon.max(T::lit(10.0) * dt);
                            let SoeFit { factors, max_rel_error, .. } = fit_sum_of_exponentials(k, terms, dt, max_lag)?;
                            setup_events.push(SimEvent::SoeApproximation { kernel: idx, terms, max_rel_error });
                            Ok(Engine::factors(&factors, dt))
                        }
                        _ => Err(Error::Contract(format!(
                            "Markov recursion needs exponential factors; K{idx} = {k}. Use the direct scheme \
                             (or soe_terms for TSPL kernels)"
                        ))),
                    }
                }
            }
        };
        let e1 = engine(&params.k1, 1)?;
        let e2 = engine(&params.k2, 2)?;
        let lower = match params.k1.separable_decomposition() {
            Some(sep) => {
                let h0 = sep.h(T::zero());
                Some(LowerBound {
                    diag: times[..n].iter().map(|&t| params.k1.evaluate(t, t)).collect::<Result<_>>()?,
                    h_shift: times.iter().map(|&t| sep.h(t) - h0).collect(),
                })
            }
            None => {
                setup_events.push(SimEvent::LowerBoundUnavailable);
                None
            }
        };
        Ok(Self {
            params: params.clone(),
            config: config.clone(),
            times,
            dt,
            g2,
            g1,
            past_widths: history.times().windows(2).map(|w| w[1] - w[0]).collect(),
            e1,
            e2,
            lower,
            setup_events,
            report: None,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn config(&self) -> &SimConfig<T> {
        &self.config
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    /// Deterministic `g2` on the time grid.
    pub fn g2(&self) -> &[T] {
        &self.g2
    }

    /// Gate report, when the simulator was built through [`Simulator::new`].
    pub fn report(&self) -> Option<&AssumptionReport<T>> {
        self.report.as_ref()
    }

    pub fn setup_events(&self) -> &[SimEvent<T>] {
        &self.setup_events
    }

    /// The ChaCha8 stream for `path_index`.
    pub fn rng(&self, path_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(path_index);
        rng
    }

    /// Draws past increments, tail normals and future increments, in that
    /// order, from the path's stream.
    pub fn draw_noise(&self, path_index: u64) -> NoiseSample<T> {
        let mut rng = self.rng(path_index);
        let mut normal = || T::lit(rng.sample::<f64, _>(StandardNormal));
        let past = if self.g1.is_zero() {
            PastNoise::zeros(0, 0)
        } else {
            let intervals = self.past_widths.iter().map(|&w| w.sqrt() * normal()).collect();
            let tail = (0..self.g1.tail_dim()).map(|_| normal()).collect();
            PastNoise { intervals, tail }
        };
        let sd = self.dt.sqrt();
        let dw = (0..self.n_steps()).map(|_| sd * normal()).collect();
        NoiseSample { past, dw }
    }

    /// `g1` on the grid for the given past noise.
    pub fn g1(&self, past: &PastNoise<T>) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.times.len()];
        if !self.g1.is_zero() {
            self.g1.evaluate(past, &mut out)?;
        }
        Ok(out)
    }

    pub(crate) fn integrate<O: Observer<T>>(&self, noise: &NoiseSample<T>, obs: &mut O) -> Result<()> {
        let n_steps = self.n_steps();
        if noise.dw.len() != n_steps {
            return Err(Error::DimensionMismatch(format!("{} increments for {n_steps} steps", noise.dw.len())));
        }
        let g1 = self.g1(&noise.past)?;
        let b = self.params.betas;
        let floor = self.config.r2_floor;
        let mut st1 = self.e1.init(n_steps);
        let mut st2 = self.e2.init(n_steps);
        let mut log_s = self.params.s0.ln();
        let mut sigma0 = T::zero();
        let (mut x_noise, mut x_comp) = (T::zero(), T::zero());
        for n in 0..=n_steps {
            let r1 = g1[n] + self.e1.value(&st1, n);
            let mut r2 = self.g2[n] + self.e2.value(&st2, n);
            if !(r2 >= floor) {
                if r2.is_nan() {
                    return Err(self.abort(n, "R2 is NaN"));
                }
                obs.floor(n, self.times[n], r2);
                r2 = floor;
            }
            let sigma = b.sigma(r1, r2);
            if !sigma.is_finite() {
                return Err(self.abort(n, format!("sigma = {sigma} (R1 = {r1}, R2 = {r2})")));
            }
            if n == 0 {
                sigma0 = sigma;
            }
            let x = self
                .lower
                .as_ref()
                .map(|lb| sigma0 * (b.b1 * x_noise + lb.h_shift[n] - T::half() * b.b1 * b.b1 * x_comp).exp());
            let s = log_s.exp();
            if !s.is_finite() || s <= T::zero() {
                return Err(self.abort(n, format!("price left (0, inf): log S = {log_s}")));
            }
            obs.record(n, r1, r2, sigma, s, x);
            if n == n_steps {
                break;
            }
            let dw = noise.dw[n];
            log_s += sigma * dw - T::half() * sigma * sigma * self.dt;
            self.e1.push(&mut st1, n, sigma * dw);
            self.e2.push(&mut st2, n, sigma * sigma * self.dt);
            if let Some(lb) = &self.lower {
                x_noise += lb.diag[n] * dw;
                x_comp += lb.diag[n] * lb.diag[n] * self.dt;
            }
        }
        Ok(())
    }

    fn abort(&self, step: usize, reason: impl Into<String>) -> Error {
        Error::SimulationAborted { step, time: self.times[step].to_f64_lossy(), reason: reason.into() }
    }

    /// Simulates one path on the given noise.
    pub fn run(&self, noise: &NoiseSample<T>) -> Result<SimPath<T>> {
        let len = self.times.len();
        let mut rec = PathRecorder {
            path: SimPath {
                times: self.times.clone(),
                r1: Vec::with_capacity(len),
                r2: Vec::with_capacity(len),
                sigma: Vec::with_capacity(len),
                s: Vec::with_capacity(len),
                x: self.lower.as_ref().map(|_| Vec::with_capacity(len)),
                dw: std::iter::once(T::zero()).chain(noise.dw.iter().copied()).collect(),
                past: noise.past.clone(),
                events: self.setup_events.clone(),
                floor_count: 0,
            },
        };
        self.integrate(noise, &mut rec)?;
        Ok(rec.path)
    }

    /// Draws the noise for `path_index` and simulates.
    pub fn simulate(&self, path_index: u64) -> Result<SimPath<T>> {
        self.run(&self.draw_noise(path_index))
    }
}

struct PathRecorder<T> {
    path: SimPath<T>,
}

impl<T: Scalar> Observer<T> for PathRecorder<T> {
    fn record(&mut self, _n: usize, r1: T, r2: T, sigma: T, s: T, x: Option<T>) {
        self.path.r1.push(r1);
        self.path.r2.push(r2);
        self.path.sigma.push(sigma);
        self.path.s.push(s);
        if let (Some(xs), Some(v)) = (self.path.x.as_mut(), x) {
            xs.push(v);
        }
    }

    fn floor(&mut self, n: usize, time: T, value: T) {
        self.path.floor_count += 1;
        if self.path.floor_count <= MAX_LOGGED_FLOORS {
            self.path.events.push(SimEvent::R2Floor { step: n, time, value });
        }
    }
}

/// Builds the simulator (with the assumption gate) and simulates path
/// `path_index`.
pub fn simulate_path<T: Scalar>(
    params: &ModelParams<T>,
    history: &HistorySegment<T>,
    config: &SimConfig<T>,
    path_index: u64,
) -> Result<SimPath<T>> {
    Simulator::new(params, history, config)?.simulate(path_index)
}

/// `(g1, g2)` on `t_grid` for one realization of the past noise.
pub fn build_g<T: Scalar>(
    params: &ModelParams<T>,
    history: &HistorySegment<T>,
    t_grid: &[T],
    past: &PastNoise<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let cell = T::lit(1.0 / 2520.0);
    let plan = G1Plan::new(&params.k1, history, &params.betas, t_grid, cell, false)?;
    let mut g1 = vec![T::zero(); t_grid.len()];
    plan.evaluate(past, &mut g1)?;
    let g2 = deterministic_g2(&params.k2, history, &params.betas, t_grid)?;
    Ok((g1, g2))
}

/// One exact factor step: `R1_j ← e^{-λ_j Δt}(R1_j + λ_j σ ΔW)` and
/// `R2_j ← e^{-λ_j Δt}(R2_j + λ_j σ² Δt)` for each factor, returning the
/// updated states.
///
/// This is the textbook frozen-coefficient update; the simulator's
/// Markov engine uses exponential-integrator weights instead, see
/// [`Scheme::MarkovRecursion`].
pub fn step_markov<T: Scalar>(
    r1: &[T],
    r2: &[T],
    sigma: T,
    dw: T,
    dt: T,
    factors: &ExpFactors<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    if r1.len() != factors.len() || r2.len() != factors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} factors but {} / {} states",
            factors.len(),
            r1.len(),
            r2.len()
        )));
    }
    let mut n1 = Vec::with_capacity(r1.len());
    let mut n2 = Vec::with_capacity(r2.len());
    for (j, &lambda) in factors.rates.iter().enumerate() {
        let d = (-lambda * dt).exp();
        n1.push(d * (r1[j] + lambda * sigma * dw));
        n2.push(d * (r2[j] + lambda * sigma * sigma * dt));
    }
    Ok((n1, n2))
}

/// Markov factors for a kernel, or a contract error for non-exponential
/// families.
pub fn markov_factors<T: Scalar>(k: &KernelSpec<T>) -> Result<ExpFactors<T>> {
    k.exp_factors()
        .ok_or_else(|| Error::Contract(format!("kernel {k} has no exponential factors; use the direct scheme")))
}

/// `(R1(t_{n+1}), R2(t_{n+1}))` by the left-point Volterra sums over the
/// stored `(σ_k, ΔW_k)`, `k <= n`.
pub fn step_quadrature<T: Scalar>(
    params: &ModelParams<T>,
    times: &[T],
    sigmas: &[T],
    dws: &[T],
    g: (T, T),
    t_next: T,
) -> Result<(T, T)> {
    if times.len() != sigmas.len() || times.len() != dws.len() {
        return Err(Error::DimensionMismatch("times, sigmas and increments must align".into()));
    }
    let mut r1 = g.0;
    let mut r2 = g.1;
    for k in 0..times.len() {
        let dt = if k + 1 < times.len() { times[k + 1] - times[k] } else { t_next - times[k] };
        r1 += params.k1.evaluate(times[k], t_next)? * sigmas[k] * dws[k];
        r2 += params.k2.evaluate(times[k], t_next)? * sigmas[k] * sigmas[k] * dt;
    }
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Betas;
    use approx::assert_relative_eq;

    const INF: f64 = f64::INFINITY;

    fn exp(l: f64) -> KernelSpec<f64> {
        KernelSpec::exponential(l).unwrap()
    }

    fn two_factor() -> (ModelParams<f64>, HistorySegment<f64>) {
        let b = Betas::new(0.02, -0.1, 0.6);
        let h = HistorySegment::constant_sigma(0.2, &b, INF).unwrap();
        (ModelParams::new(b, exp(10.0), exp(15.0), 100.0, INF).unwrap(), h)
    }

    fn cfg(horizon: f64, steps: usize) -> SimConfig<f64> {
        let mut c = SimConfig::new(horizon, 1, 7);
        c.steps_per_year = steps;
        c
    }

    #[test]
    fn step_markov_examples() {
        let f = exp(1.0).exp_factors().unwrap();
        let (r1, r2) = step_markov(&[1.0], &[2.0], 0.0, 0.0, 1.0, &f).unwrap();
        assert_relative_eq!(r1[0], (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(r1[0], 0.367879, epsilon = 1e-6);
        assert_relative_eq!(r2[0], 2.0 * (-1.0f64).exp(), epsilon = 1e-15);
        let f = exp(3.0).exp_factors().unwrap();
        let (r1, _) = step_markov(&[0.0], &[0.0], 0.2, 0.5, 1e-9, &f).unwrap();
        assert_relative_eq!(r1[0], 3.0 * 0.2 * 0.5, max_relative = 1e-8);
        assert!(step_markov(&[0.0, 1.0], &[0.0], 0.2, 0.5, 0.1, &f).is_err());
        assert!(matches!(markov_factors(&KernelSpec::tspl(1.5, 0.05, INF).unwrap()), Err(Error::Contract(_))));
    }

    #[test]
    fn step_quadrature_examples() {
        let (p, _) = two_factor();
        let (r1, r2) = step_quadrature(&p, &[], &[], &[], (0.3, 0.04), 0.1).unwrap();
        assert_eq!((r1, r2), (0.3, 0.04));
        let (r1, _) = step_quadrature(&p, &[0.0, 0.1], &[0.2, 0.3], &[0.0, 0.0], (0.3, 0.04), 0.2).unwrap();
        assert_eq!(r1, 0.3);
    }

    #[test]
    fn build_g_examples() {
        let (p, h) = two_factor();
        let grid = [0.0, 0.1, 0.5];
        let (g1, g2) = build_g(&p, &h, &grid, &PastNoise::zeros(0, 1)).unwrap();
        assert_eq!(g1, vec![0.0; 3]);
        for (&t, &v) in grid.iter().zip(&g2) {
            assert_relative_eq!(v, 0.04 * (-15.0 * t).exp(), max_relative = 1e-9);
        }
        let b = Betas::new(0.0, 0.0, 1.0);
        let quiet = HistorySegment::constant(0.0, 0.0, 1.0).unwrap();
        let p = ModelParams::new(b, exp(10.0), exp(15.0), 1.0, 1.0).unwrap();
        let (g1, g2) = build_g(&p, &quiet, &grid, &PastNoise { intervals: vec![0.7], tail: vec![] }).unwrap();
        assert_eq!(g1, vec![0.0; 3]);
        assert_eq!(g2, vec![0.0; 3]);
    }

    #[test]
    fn constant_volatility_gives_exact_gbm() {
        let b = Betas::new(0.2, 0.0, 0.0);
        let h = HistorySegment::constant(0.0, 0.04, INF).unwrap();
        let p = ModelParams::new(b, exp(10.0), exp(15.0), 100.0, INF).unwrap();
        let sim = Simulator::new(&p, &h, &cfg(0.5, 252)).unwrap();
        let path = sim.simulate(3).unwrap();
        assert!(path.sigma.iter().all(|&s| s == 0.2));
        let w: f64 = path.dw.iter().sum();
        let want = 100.0f64.ln() + 0.2 * w - 0.5 * 0.04 * 0.5;
        assert_relative_eq!(path.s.last().unwrap().ln(), want, max_relative = 1e-12);
    }

    #[test]
    fn lower_bound_matches_exponential_formula() {
        let (p, h) = two_factor();
        let path = Simulator::new(&p, &h, &cfg(0.25, 2520)).unwrap().simulate(0).unwrap();
        let x = path.x.as_ref().unwrap();
        let s0 = path.sigma[0];
        assert_eq!(x[0], s0);
        let mut w = 0.0;
        for n in 1..path.times.len() {
            w += path.dw[n];
            let t = path.times[n];
            let want = s0 * (-0.1 * 10.0 * w - 10.0 * t - 0.5 * 0.01 * 100.0 * t).exp();
            assert_relative_eq!(x[n], want, max_relative = 1e-9);
        }
        assert!(path.r2.iter().all(|&r| r >= 1e-12));
        assert!(path.s.iter().all(|&s| s > 0.0));
        let len = path.times.len();
        for v in [&path.r1, &path.r2, &path.sigma, &path.s, &path.dw] {
            assert_eq!(v.len(), len);
        }
    }

    #[test]
    fn schemes_agree_on_exponential_kernels() {
        let (p, h) = two_factor();
        let mut c = cfg(0.5, 1260);
        let markov = Simulator::new(&p, &h, &c).unwrap();
        c.scheme = Scheme::DirectQuadrature;
        let direct = Simulator::new(&p, &h, &c).unwrap();
        let noise = markov.draw_noise(11);
        let a = markov.run(&noise).unwrap();
        let b = direct.run(&noise).unwrap();
        let gap = a.sigma.iter().zip(&b.sigma).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap > 0.0 && gap < 0.02, "gap {gap}");
    }

    #[test]
    fn direct_separable_engine_matches_quadrature() {
        let b = Betas::new(0.1, -0.05, 0.5);
        let h = HistorySegment::constant(0.0, 0.04, 1.0).unwrap();
        let k1 = KernelSpec::shifted_power(1.5, 1.0).unwrap();
        let p = ModelParams::new(b, k1, exp(5.0), 1.0, 1.0).unwrap();
        let mut c = cfg(0.1, 252);
        c.scheme = Scheme::DirectQuadrature;
        c.force = true;
        let sim = Simulator::new(&p, &h, &c).unwrap();
        let path = sim.simulate(2).unwrap();
        let g1 = sim.g1(&path.past).unwrap();
        let n = path.times.len() - 1;
        let (r1, r2) =
            step_quadrature(&p, &path.times[..n], &path.sigma[..n], &path.dw[1..], (g1[n], sim.g2()[n]), path.times[n])
                .unwrap();
        assert_relative_eq!(path.r1[n], r1, max_relative = 1e-10);
        assert_relative_eq!(path.r2[n], r2, max_relative = 1e-10);
    }

    #[test]
    fn lag_table_matches_quadrature() {
        let b = Betas::new(0.05, -0.02, 0.8);
        let h = HistorySegment::constant(0.0, 0.04, INF).unwrap();
        let k = KernelSpec::tspl(1.5, 0.05, INF).unwrap();
        let p = ModelParams::new(b, k, k, 1.0, INF).unwrap();
        let mut c = cfg(0.05, 2520);
        c.scheme = Scheme::DirectQuadrature;
        c.force = true;
        let sim = Simulator::new(&p, &h, &c).unwrap();
        let path = sim.simulate(5).unwrap();
        let g1 = sim.g1(&path.past).unwrap();
        let n = path.times.len() - 1;
        let (r1, r2) =
            step_quadrature(&p, &path.times[..n], &path.sigma[..n], &path.dw[1..], (g1[n], sim.g2()[n]), path.times[n])
                .unwrap();
        assert_relative_eq!(path.r1[n], r1, max_relative = 1e-9);
        assert_relative_eq!(path.r2[n], r2, max_relative = 1e-9);
    }

    #[test]
    fn markov_rejects_tspl_without_soe() {
        let (mut p, h) = two_factor();
        p.k2 = KernelSpec::tspl(1.5, 0.05, INF).unwrap();
        let mut c = cfg(0.1, 252);
        c.force = true;
        assert!(matches!(Simulator::new(&p, &h, &c), Err(Error::Contract(_))));
        c.soe_terms = Some(4);
        let sim = Simulator::new(&p, &h, &c).unwrap();
        assert!(sim.setup_events().iter().any(|e| matches!(e, SimEvent::SoeApproximation { .. })));
        assert!(sim.simulate(0).is_ok());
    }

    #[test]
    fn gate_blocks_neither_unless_forced() {
        let b = Betas::new(0.25, -0.5, 0.6);
        let p = ModelParams::new(b, exp(10.0), exp(15.0), 100.0, INF).unwrap();
        // σ_s = 0.25 - 0.5 · 0.5 = 0 on the whole history, so g2 ≡ 0
        let h = HistorySegment::constant(0.5, 0.0, INF).unwrap();
        let mut c = cfg(0.1, 252);
        assert!(matches!(Simulator::new(&p, &h, &c), Err(Error::Contract(_))));
        c.force = true;
        let path = simulate_path(&p, &h, &c, 0).unwrap();
        assert!(path.events.iter().any(|e| matches!(e, SimEvent::GateOverridden { verdict: Verdict::Neither })));
        assert!(path.floor_count > 0);
        assert!(path.events.iter().any(|e| matches!(e, SimEvent::R2Floor { step: 0, .. })));
    }

    #[test]
    fn paths_are_reproducible_per_index() {
        let (p, h) = two_factor();
        let sim = Simulator::new(&p, &h, &cfg(0.1, 252)).unwrap();
        assert_eq!(sim.simulate(4).unwrap(), sim.simulate(4).unwrap());
        assert_ne!(sim.simulate(4).unwrap().dw, sim.simulate(5).unwrap().dw);
    }

    #[test]
    fn coarsened_noise_sums_pairs() {
        let n = NoiseSample { past: PastNoise::zeros(0, 0), dw: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(n.coarsen().unwrap().dw, vec![3.0, 7.0]);
        assert!(NoiseSample { past: PastNoise::zeros(0, 0), dw: vec![1.0] }.coarsen().is_err());
    }

    #[test]
    fn config_validation_and_parsing() {
        assert!(SimConfig::new(0.0, 1, 0).validate().is_err());
        assert!(SimConfig::new(1.0, 0, 0).validate().is_err());
        let c = SimConfig::new(1.0, 1, 0);
        assert_eq!(c.n_steps(), 2520);
        assert_eq!(Scheme::parse("Direct").unwrap(), Scheme::DirectQuadrature);
        assert_eq!(G1Mode::parse("zero").unwrap(), G1Mode::Zero);
        assert!(Scheme::parse("euler").is_err());
    }

    #[test]
    fn zero_g1_mode_draws_no_past_noise() {
        let (p, h) = two_factor();
        let mut c = cfg(0.1, 252);
        c.g1_mode = G1Mode::Zero;
        let sim = Simulator::new(&p, &h, &c).unwrap();
        let path = sim.simulate(0).unwrap();
        assert!(path.past.tail.is_empty());
        assert_relative_eq!(path.sigma[0], 0.02 + 0.6 * 0.2, max_relative = 1e-12);
    }

    #[test]
    fn single_path_ensemble_matches_simulate_path() {
        let (p, h) = two_factor();
        let c = cfg(0.2, 252);
        let summary = monte_carlo(&p, &h, &c).unwrap();
        let path = simulate_path(&p, &h, &c, 0).unwrap();
        assert_eq!(summary.s[0].mean, *path.s.last().unwrap());
        assert_eq!(summary.sigma[0].quantiles[3], *path.sigma.last().unwrap());
        assert_eq!(summary.floor_events, path.floor_count);
    }

    #[test]
    fn ensemble_is_thread_count_invariant() {
        let (p, h) = two_factor();
        let mut c = cfg(0.1, 252);
        c.n_paths = 64;
        c.report_times = vec![0.05, 0.1];
        let sim = Simulator::new(&p, &h, &c).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sim.ensemble());
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| sim.ensemble());
        assert_eq!(one, three);
        assert_eq!(one.to_kv(), three.to_kv());
        assert_eq!(one.sigma.len(), 2);
    }

    #[test]
    fn path_dump_format() {
        let (p, h) = two_factor();
        let path = simulate_path(&p, &h, &cfg(0.01, 252), 0).unwrap();
        let mut buf = Vec::new();
        write_path(&path, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "time,R1,R2,sigma,S,X,dW");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 7);
        assert_eq!(first[0], "0.0000000000000000e0");
        let parsed: f64 = first[3].parse().unwrap();
        assert_eq!(parsed, path.sigma[0]);
        assert_eq!(text.lines().count(), path.times.len() + 1);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs: Vec<f64> = (0..=100).map(f64::from).collect();
        let st = ensemble_stats_for_test(&xs);
        assert_eq!(st.quantiles[0], 1.0);
        assert_eq!(st.quantiles[3], 50.0);
        assert_relative_eq!(st.mean, 50.0);
    }

    fn ensemble_stats_for_test(xs: &[f64]) -> HorizonStats<f64> {
        ensemble::horizon_stats(0.0, xs)
    }
}
