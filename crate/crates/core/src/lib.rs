//! Path-dependent volatility (PDV) model driven by a two-kernel stochastic
//! Volterra equation:
//!
//! ```text
//! dS_t / S_t = σ_t dW_t
//! σ_t        = β0 + β1 R1_t + β2 sqrt(R2_t)
//! R1_t       = ∫_{-Δ}^t K1(s, t) σ_s dW_s
//! R2_t       = ∫_{-Δ}^t K2(s, t) σ_s² ds
//! ```
//!
//! Modules:
//! - [`kernel`]: kernel families, closed-form and quadrature integrals.
//! - [`assumptions`]: numeric and analytic checks of the existence and
//!   positivity hypotheses.
//! - [`sim`]: Monte Carlo simulation of `(R1, R2, σ, S)` and the lower-bound
//!   process `X`.
//! - [`features`]: discrete trend/activity features from price series.
//! - [`calibration`]: constrained ridge fits of the betas and kernel search.
//! - [`synthetic`]: synthetic prices and proxies for recovery tests.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assumptions;
pub mod calibration;
pub mod error;
pub mod features;
pub mod kernel;
pub mod linalg;
pub mod lsq;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod sim;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Kernel = kernel::KernelSpec<f64>;
pub type Kernel32 = kernel::KernelSpec<f32>;
pub type Params = model::ModelParams<f64>;
pub type History = model::HistorySegment<f64>;
pub type Betas = model::Betas<f64>;
pub type Report = assumptions::AssumptionReport<f64>;
pub type SimulationConfig = sim::SimConfig<f64>;
pub type Path = sim::SimPath<f64>;
pub type Ensemble = sim::EnsembleSummary<f64>;
pub type Features = features::FeaturePath<f64>;
pub type Dataset = features::MarketDataset<f64>;
pub type CalibrationSpec = calibration::CalibrationSpec<f64>;
pub type CalibrationResult = calibration::CalibrationResult<f64>;
