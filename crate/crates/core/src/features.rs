//! Discrete trend and activity features from daily prices.
//!
//! For returns `r_i` on business days `i` and a feature date `j`,
//!
//! ```text
//! R1_j = Σ_{i <= j} K1((j - i) / 252) / 252 · r_i
//! R2_j = Σ_{i <= j} K2((j - i) / 252) / 252 · r_i²
//! ```
//!
//! Lags count business days (calendar gaps count as one day). Kernels with an
//! exponential form use an O(1)-per-day recursion; everything else uses the
//! direct sum.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::scalar::Scalar;

/// Business days per year.
pub const DAYS_PER_YEAR: f64 = 252.0;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// A dated series of finite values, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<T>,
    /// Non-fatal notes from loading (e.g. input was unsorted).
    pub warnings: Vec<String>,
}

impl<T: Scalar> Series<T> {
    /// Sorts by date (with a warning when needed) and rejects duplicates and
    /// non-finite values.
    pub fn new(dates: Vec<NaiveDate>, values: Vec<T>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} dates for {} values", dates.len(), values.len())));
        }
        let mut rows: Vec<(usize, NaiveDate, T)> =
            dates.into_iter().zip(values).enumerate().map(|(i, (d, v))| (i, d, v)).collect();
        let mut warnings = Vec::new();
        if rows.windows(2).any(|w| w[1].1 < w[0].1) {
            rows.sort_by_key(|r| r.1);
            warnings.push("input rows were not in date order and have been sorted".to_string());
        }
        for w in rows.windows(2) {
            if w[0].1 == w[1].1 {
                return Err(Error::Data(format!("duplicate date {} (rows {} and {})", w[0].1, w[0].0 + 1, w[1].0 + 1)));
            }
        }
        if let Some(r) = rows.iter().find(|r| !r.2.is_finite()) {
            return Err(Error::Data(format!("row {}: non-finite value on {}", r.0 + 1, r.1)));
        }
        Ok(Self { dates: rows.iter().map(|r| r.1).collect(), values: rows.iter().map(|r| r.2).collect(), warnings })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Validated prices (all `> 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T>(pub Series<T>);

impl<T: Scalar> PriceSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<T>) -> Result<Self> {
        for (i, p) in prices.iter().enumerate() {
            if !(*p > T::zero()) {
                return Err(Error::Data(format!("row {}: price must be > 0, got {p}", i + 1)));
            }
        }
        Ok(Self(Series::new(dates, prices)?))
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.0.dates
    }

    pub fn prices(&self) -> &[T] {
        &self.0.values
    }

    /// Returns dated at the later of the two prices.
    pub fn returns(&self, kind: ReturnKind) -> Series<T> {
        let p = &self.0.values;
        let values = p
            .windows(2)
            .map(|w| match kind {
                ReturnKind::Arithmetic => w[1] / w[0] - T::one(),
                ReturnKind::Log => (w[1] / w[0]).ln(),
            })
            .collect();
        Series { dates: self.0.dates.iter().skip(1).copied().collect(), values, warnings: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReturnKind {
    /// `P_i / P_{i-1} - 1`.
    #[default]
    Arithmetic,
    /// `ln(P_i / P_{i-1})`.
    Log,
}

impl ReturnKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arithmetic" | "simple" => Ok(Self::Arithmetic),
            "log" => Ok(Self::Log),
            other => Err(Error::Parse(format!("unknown return kind `{other}` (expected arithmetic or log)"))),
        }
    }
}

/// Delimited-text column selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvLayout {
    pub date_column: String,
    pub value_column: String,
    pub delimiter: u8,
}

impl CsvLayout {
    pub fn new(date_column: &str, value_column: &str) -> Self {
        Self { date_column: date_column.to_string(), value_column: value_column.to_string(), delimiter: b',' }
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }
}

/// Reads a dated column from delimited text with a header row.
pub fn read_series<T: Scalar, R: Read>(reader: R, layout: &CsvLayout) -> Result<Series<T>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(layout.delimiter).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(format!("header: {e}")))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse(format!("column `{name}` not found (have: {})", headers.iter().collect::<Vec<_>>().join(", ")))
        })
    };
    let di = column(&layout.date_column)?;
    let vi = column(&layout.value_column)?;
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let d = rec.get(di).ok_or_else(|| Error::Parse(format!("line {line}: missing date field")))?;
        let v = rec.get(vi).ok_or_else(|| Error::Parse(format!("line {line}: missing value field")))?;
        let date = NaiveDate::parse_from_str(d, DATE_FORMAT)
            .map_err(|e| Error::Parse(format!("line {line}: bad date `{d}`: {e}")))?;
        let value: f64 = v.parse().map_err(|e| Error::Parse(format!("line {line}: bad number `{v}`: {e}")))?;
        dates.push(date);
        values.push(T::lit(value));
    }
    Series::new(dates, values).map_err(|e| match e {
        Error::Data(msg) => Error::Data(msg.replace("row ", "data row ")),
        other => other,
    })
}

pub fn load_series<T: Scalar>(path: &Path, layout: &CsvLayout) -> Result<Series<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_series(file, layout).map_err(|e| prefix(path, e))
}

/// Loads prices; rows are sorted, duplicate dates and prices `<= 0` are
/// rejected with the offending row.
pub fn load_prices<T: Scalar>(path: &Path, layout: &CsvLayout) -> Result<PriceSeries<T>> {
    let s = load_series(path, layout)?;
    if let Some(i) = s.values.iter().position(|p| !(*p > T::zero())) {
        return Err(prefix(path, Error::Data(format!("price on {} must be > 0, got {}", s.dates[i], s.values[i]))));
    }
    Ok(PriceSeries(s))
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// How far back the sums reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    #[default]
    FullHistory,
    /// Keep lags of at most this many business days.
    CutoffDays(usize),
}

impl Truncation {
    fn max_lag(self) -> Option<usize> {
        match self {
            Truncation::FullHistory => None,
            Truncation::CutoffDays(c) => Some(c),
        }
    }
}

/// Summation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMethod {
    /// Recursion when the kernel allows it, direct sum otherwise.
    #[default]
    Auto,
    Direct,
    Recursive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePath<T> {
    pub dates: Vec<NaiveDate>,
    pub r1: Vec<T>,
    pub r2: Vec<T>,
}

impl<T: Scalar> FeaturePath<T> {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// `date,R1,R2` with 17 significant digits.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "date,R1,R2")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{:.16e},{:.16e}",
                self.dates[i].format(DATE_FORMAT),
                self.r1[i].to_f64_lossy(),
                self.r2[i].to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// Per-day weights `K(l / 252) / 252` for `l = 0..n`, zero beyond the
/// truncation or the kernel's own cutoff.
pub fn lag_weights<T: Scalar>(k: &KernelSpec<T>, n: usize, truncation: Truncation) -> Result<Vec<T>> {
    if !k.is_convolution() {
        return Err(Error::InvalidArgument(format!("features need a convolution kernel, got {k}")));
    }
    let year = T::lit(DAYS_PER_YEAR);
    let max_lag = truncation.max_lag().unwrap_or(usize::MAX);
    Ok((0..n)
        .map(|l| {
            let lag = T::from_usize_lossy(l) / year;
            if l > max_lag || lag > k.cutoff() {
                T::zero()
            } else {
                k.lag_value(lag).unwrap_or_else(T::zero) / year
            }
        })
        .collect())
}

/// `out_j = Σ_{i <= j} w[j - i] x_i`, in a fixed summation order.
pub fn direct_sum<T: Scalar>(x: &[T], weights: &[T]) -> Vec<T> {
    let n = x.len();
    let reach = weights.iter().rposition(|&w| w != T::zero()).map_or(0, |p| p + 1);
    let rev: Vec<T> = weights[..reach.min(n)].iter().rev().copied().collect();
    (0..n)
        .map(|j| {
            let len = (j + 1).min(rev.len());
            dot(&x[j + 1 - len..=j], &rev[rev.len() - len..])
        })
        .collect()
}

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

/// Rolling recursion `y_j ← e^{-μ_j / 252} y_j + x`, output `Σ_j w_j y_j / 252`.
/// `None` when the kernel has no exponential form or a finite cutoff.
pub fn recursive_sum<T: Scalar>(x: &[T], k: &KernelSpec<T>) -> Option<Vec<T>> {
    let f = k.exp_factors()?;
    if k.cutoff().is_finite() {
        return None;
    }
    let year = T::lit(DAYS_PER_YEAR);
    let decay: Vec<T> = f.rates.iter().map(|&m| (-m / year).exp()).collect();
    let mut y = vec![T::zero(); f.len()];
    Some(
        x.iter()
            .map(|&v| {
                let mut out = T::zero();
                for j in 0..y.len() {
                    y[j] = decay[j] * y[j] + v;
                    out += f.weights[j] * y[j];
                }
                out / year
            })
            .collect(),
    )
}

fn one_feature<T: Scalar>(x: &[T], k: &KernelSpec<T>, truncation: Truncation, method: FeatureMethod) -> Result<Vec<T>> {
    let can_recurse = truncation == Truncation::FullHistory;
    match method {
        FeatureMethod::Recursive => {
            if !can_recurse {
                return Err(Error::InvalidArgument("the recursion only supports full-history sums".into()));
            }
            recursive_sum(x, k)
                .ok_or_else(|| Error::InvalidArgument(format!("kernel {k} has no exponential recursion")))
        }
        FeatureMethod::Auto if can_recurse => match recursive_sum(x, k) {
            Some(v) => Ok(v),
            None => Ok(direct_sum(x, &lag_weights(k, x.len(), truncation)?)),
        },
        _ => Ok(direct_sum(x, &lag_weights(k, x.len(), truncation)?)),
    }
}

/// Features on every return date.
pub fn compute_features<T: Scalar>(
    returns: &Series<T>,
    k1: &KernelSpec<T>,
    k2: &KernelSpec<T>,
    truncation: Truncation,
    method: FeatureMethod,
) -> Result<FeaturePath<T>> {
    let squared: Vec<T> = returns.values.iter().map(|&r| r * r).collect();
    Ok(FeaturePath {
        dates: returns.dates.clone(),
        r1: one_feature(&returns.values, k1, truncation, method)?,
        r2: one_feature(&squared, k2, truncation, method)?,
    })
}

/// Prices, an aligned volatility proxy (annualized decimals) and the
/// train/test boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset<T> {
    pub prices: PriceSeries<T>,
    pub proxy: Series<T>,
    /// First test date; train rows are strictly earlier.
    pub split_date: NaiveDate,
    pub return_kind: ReturnKind,
}

impl<T: Scalar> MarketDataset<T> {
    /// Every proxy date must be a price date.
    pub fn new(prices: PriceSeries<T>, proxy: Series<T>, split_date: NaiveDate) -> Result<Self> {
        let calendar: std::collections::HashSet<NaiveDate> = prices.dates().iter().copied().collect();
        let missing: Vec<NaiveDate> = proxy.dates.iter().copied().filter(|d| !calendar.contains(d)).collect();
        if let Some(first) = missing.first() {
            return Err(Error::Data(format!(
                "{} proxy date(s) are not in the price calendar (first: {first})",
                missing.len()
            )));
        }
        if prices.0.len() < 2 {
            return Err(Error::Data("need at least two prices".into()));
        }
        Ok(Self { prices, proxy, split_date, return_kind: ReturnKind::Arithmetic })
    }

    pub fn returns(&self) -> Series<T> {
        self.prices.returns(self.return_kind)
    }
}

/// Regression rows `(R1, √R2) → proxy`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionRows<T> {
    pub dates: Vec<NaiveDate>,
    pub r1: Vec<T>,
    pub sqrt_r2: Vec<T>,
    pub target: Vec<T>,
}

impl<T: Scalar> RegressionRows<T> {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    fn push(&mut self, d: NaiveDate, r1: T, r2: T, y: T) {
        self.dates.push(d);
        self.r1.push(r1);
        self.sqrt_r2.push(r2.max(T::zero()).sqrt());
        self.target.push(y);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedData<T> {
    pub train: RegressionRows<T>,
    pub test: RegressionRows<T>,
    /// Feature dates with no proxy observation.
    pub dropped_features: usize,
    /// Proxy dates with no feature.
    pub dropped_proxy: usize,
}

/// Inner join on dates, split at `split_date` (test starts there).
pub fn align<T: Scalar>(features: &FeaturePath<T>, proxy: &Series<T>, split_date: NaiveDate) -> Result<AlignedData<T>> {
    let by_date: HashMap<NaiveDate, usize> = proxy.dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let mut train = RegressionRows::default();
    let mut test = RegressionRows::default();
    let mut matched = 0;
    for (i, d) in features.dates.iter().enumerate() {
        if let Some(&j) = by_date.get(d) {
            matched += 1;
            let rows = if *d < split_date { &mut train } else { &mut test };
            rows.push(*d, features.r1[i], features.r2[i], proxy.values[j]);
        }
    }
    if train.is_empty() {
        return Err(Error::Data(format!("no aligned rows before the split date {split_date}")));
    }
    if test.is_empty() {
        return Err(Error::Data(format!("no aligned rows on or after the split date {split_date}")));
    }
    Ok(AlignedData { train, test, dropped_features: features.len() - matched, dropped_proxy: proxy.len() - matched })
}

/// `n` consecutive weekdays starting at `start` (weekends skipped).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    use chrono::{Datelike, Weekday};
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}
