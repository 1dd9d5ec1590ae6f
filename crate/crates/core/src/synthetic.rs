//! Synthetic prices and volatility proxies for recovery tests.
//!
//! Prices follow a discrete stochastic-volatility walk: log-volatility is a
//! Gaussian AR(1) around `base_vol`, daily returns are
//! `σ_i / √252 · z_i`. The proxy is the model volatility
//! `β0 + β1 R1 + β2 √R2` computed by the feature engine on those returns,
//! times `1 + noise · ε`.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::features::{
    business_days, compute_features, FeatureMethod, MarketDataset, PriceSeries, ReturnKind, Series, Truncation,
    DAYS_PER_YEAR,
};
use crate::kernel::KernelSpec;
use crate::model::Betas;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Number of prices.
    pub n_days: usize,
    /// Proxy observations, on the last days of the sample.
    pub proxy_days: usize,
    /// Share of proxy days before the split date.
    pub train_fraction: f64,
    /// Relative Gaussian noise on the proxy.
    pub noise: f64,
    pub seed: u64,
    pub start: NaiveDate,
    pub s0: f64,
    pub base_vol: f64,
    /// Daily AR(1) coefficient of log-volatility.
    pub persistence: f64,
    /// Stationary standard deviation of log-volatility.
    pub vol_of_vol: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_days: 2000,
            proxy_days: 1500,
            train_fraction: 0.8,
            noise: 0.0,
            seed: 1,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
            s0: 100.0,
            base_vol: 0.2,
            persistence: 0.98,
            vol_of_vol: 0.4,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_days < 3 || self.proxy_days == 0 || self.proxy_days >= self.n_days {
            return Err(Error::InvalidArgument(format!(
                "need 3 <= n_days and 0 < proxy_days < n_days, got {} and {}",
                self.n_days, self.proxy_days
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.noise >= 0.0) || !(self.base_vol > 0.0) || !(self.s0 > 0.0) || !(self.vol_of_vol >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise, base_vol, s0 and vol_of_vol must be non-negative (base_vol, s0 > 0)".into(),
            ));
        }
        if !(self.persistence.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("persistence must lie in (-1, 1), got {}", self.persistence)));
        }
        Ok(())
    }
}

/// Prices from the stochastic-volatility walk.
pub fn synthetic_prices<T: Scalar>(cfg: &SyntheticConfig) -> Result<PriceSeries<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shock = cfg.vol_of_vol * (1.0 - cfg.persistence * cfg.persistence).sqrt();
    let mut log_dev = 0.0;
    let mut price = cfg.s0;
    let mut prices = Vec::with_capacity(cfg.n_days);
    prices.push(T::lit(price));
    for _ in 1..cfg.n_days {
        log_dev = cfg.persistence * log_dev + shock * rng.sample::<f64, _>(StandardNormal);
        let sigma = cfg.base_vol * log_dev.exp();
        let r = sigma / DAYS_PER_YEAR.sqrt() * rng.sample::<f64, _>(StandardNormal);
        price *= 1.0 + r.max(-0.5);
        prices.push(T::lit(price));
    }
    PriceSeries::new(business_days(cfg.start, cfg.n_days), prices)
}

/// Prices plus the noisy model-volatility proxy and the split date.
pub fn synthetic_dataset<T: Scalar>(
    k1: &KernelSpec<T>,
    k2: &KernelSpec<T>,
    betas: &Betas<T>,
    cfg: &SyntheticConfig,
) -> Result<MarketDataset<T>> {
    let prices = synthetic_prices::<T>(cfg)?;
    let returns = prices.returns(ReturnKind::Arithmetic);
    let features = compute_features(&returns, k1, k2, Truncation::FullHistory, FeatureMethod::Direct)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_5eed);
    let first = features.len() - cfg.proxy_days;
    let mut dates = Vec::with_capacity(cfg.proxy_days);
    let mut values = Vec::with_capacity(cfg.proxy_days);
    for i in first..features.len() {
        let sigma = betas.sigma(features.r1[i], features.r2[i]);
        let eps = T::lit(cfg.noise * rng.sample::<f64, _>(StandardNormal));
        dates.push(features.dates[i]);
        values.push(sigma * (T::one() + eps));
    }
    let split_at = first + ((cfg.proxy_days as f64) * cfg.train_fraction).round() as usize;
    let split_date = features.dates[split_at.min(features.len() - 1)];
    MarketDataset::new(prices, Series::new(dates, values)?, split_date)
}
