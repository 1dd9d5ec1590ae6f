//! INI run configuration.
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use ini::{Ini, Properties};

use pdvol::calibration::{BetaBounds, CalibrationSpec, KernelChoice};
use pdvol::features::{CsvLayout, FeatureMethod, ReturnKind, Truncation, DATE_FORMAT};
use pdvol::kernel::KernelSpec;
use pdvol::model::{Betas, HistorySegment, ModelParams};
use pdvol::sim::{G1Mode, Scheme, SimConfig};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub base_dir: PathBuf,
    pub ini: Ini,
}

fn parse<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| anyhow!("[{section}] {key} = `{raw}`: {e}"))
}

fn parse_real(section: &str, key: &str, raw: &str) -> Result<f64> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => parse(section, key, raw),
    }
}

/// Typed view of one section.
pub struct Section<'a> {
    name: &'a str,
    props: Option<&'a Properties>,
}

impl<'a> Section<'a> {
    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(key)).map(str::trim).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&'a str> {
        self.raw(key).ok_or_else(|| anyhow!("missing [{}] {key}", self.name))
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| parse_real(self.name, key, v)).transpose()
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    pub fn require_real(&self, key: &str) -> Result<f64> {
        parse_real(self.name, key, self.require(key)?)
    }

    pub fn int_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map_or(Ok(default), |v| parse(self.name, key, v))
    }

    pub fn flag_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) if ["true", "yes", "1", "on"].contains(&v.as_str()) => Ok(true),
            Some(v) if ["false", "no", "0", "off"].contains(&v.as_str()) => Ok(false),
            Some(v) => bail!("[{}] {key} = `{v}`: expected true or false", self.name),
        }
    }

    pub fn list(&self, key: &str) -> Vec<&'a str> {
        self.raw(key).map_or_else(Vec::new, |v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { base_dir, ini })
    }

    pub fn section<'a>(&'a self, name: &'a str) -> Section<'a> {
        Section { name, props: self.ini.section(Some(name)) }
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Existing input file named by `[section] key`.
    pub fn input_file(&self, section: &str, key: &str) -> Result<PathBuf> {
        let path = self.resolve(self.section(section).require(key)?);
        if !path.is_file() {
            bail!("[{section}] {key}: file {} does not exist", path.display());
        }
        Ok(path)
    }

    /// `--out` wins over `[output] dir`, which defaults to `out` next to the
    /// config file.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match flag {
            Some(p) => p.to_path_buf(),
            None => self.resolve(self.section("output").raw("dir").unwrap_or("out")),
        }
    }

    pub fn kernel(&self, which: &str, delta: f64) -> Result<KernelSpec<f64>> {
        let s = self.section("kernels");
        let family = s.require(which)?.to_ascii_lowercase();
        let key = |k: &str| format!("{which}.{k}");
        let cutoff = s.real_or(&key("cutoff"), f64::INFINITY)?;
        let k = match family.as_str() {
            "exp" | "exponential" => KernelSpec::exponential(s.require_real(&key("lambda"))?)?,
            "tspl" => KernelSpec::tspl(s.require_real(&key("alpha"))?, s.require_real(&key("delta"))?, cutoff)?,
            "combo" | "convex_combo" => KernelSpec::convex_combo(
                s.require_real(&key("theta"))?,
                s.require_real(&key("lambda_a"))?,
                s.require_real(&key("lambda_b"))?,
            )?,
            "shifted_power" | "power" => {
                KernelSpec::shifted_power(s.require_real(&key("a"))?, s.real_or(&key("delta"), delta)?)?
            }
            other => bail!("[kernels] {which} = `{other}`: expected exponential, tspl, combo or shifted_power"),
        };
        if family != "tspl" && family != "shifted_power" && family != "power" && cutoff.is_finite() {
            return Ok(k.with_cutoff(cutoff)?);
        }
        Ok(k)
    }

    pub fn betas(&self) -> Result<Betas<f64>> {
        let s = self.section("model");
        Ok(Betas::new(s.require_real("beta0")?, s.require_real("beta1")?, s.require_real("beta2")?))
    }

    pub fn model(&self) -> Result<(ModelParams<f64>, HistorySegment<f64>)> {
        let s = self.section("model");
        let delta = s.real_or("delta", 0.0)?;
        let betas = self.betas()?;
        let k1 = self.kernel("k1", delta)?;
        let k2 = self.kernel("k2", delta)?;
        let params = ModelParams::new(betas, k1, k2, s.real_or("s0", 100.0)?, delta)?;
        let history = match s.raw("history").map(str::to_ascii_lowercase).as_deref() {
            None | Some("none") => {
                if delta > 0.0 {
                    bail!("[model] delta = {delta} but no history is configured (set history = constant or a file)");
                }
                HistorySegment::empty()
            }
            Some("constant") => {
                if let Some(sigma) = s.real("history.sigma")? {
                    HistorySegment::constant_sigma(sigma, &betas, delta)?
                } else {
                    HistorySegment::constant(s.real_or("history.r1", 0.0)?, s.require_real("history.r2")?, delta)?
                }
            }
            Some(_) => {
                let path = self.input_file("model", "history")?;
                read_history(&path, delta.is_infinite())?
            }
        };
        params.check_history_span(&history)?;
        Ok((params, history))
    }

    pub fn horizon(&self) -> Result<f64> {
        self.section("sim").real_or("horizon", 1.0)
    }

    pub fn sim(&self, seed: Option<u64>, force: bool) -> Result<SimConfig<f64>> {
        let s = self.section("sim");
        let mut c = SimConfig::new(self.horizon()?, s.int_or("n_paths", 1000usize)?, s.int_or("seed", 0u64)?);
        c.steps_per_year = s.int_or("steps_per_year", c.steps_per_year)?;
        if let Some(v) = s.raw("scheme") {
            c.scheme = Scheme::parse(v)?;
        }
        c.r2_floor = s.real_or("r2_floor", c.r2_floor)?;
        if let Some(v) = s.raw("g1_mode") {
            c.g1_mode = G1Mode::parse(v)?;
        }
        if let Some(v) = s.raw("soe_terms") {
            c.soe_terms = Some(parse("sim", "soe_terms", v)?);
        }
        c.report_times =
            s.list("report_times").iter().map(|v| parse_real("sim", "report_times", v)).collect::<Result<_>>()?;
        c.violation_factor = s.real_or("violation_factor", c.violation_factor)?;
        if let Some(seed) = seed {
            c.seed = seed;
        }
        c.force = force || s.flag_or("force", false)?;
        c.validate()?;
        Ok(c)
    }

    pub fn dump_paths(&self) -> Result<usize> {
        self.section("sim").int_or("dump_paths", 1usize)
    }

    fn layout(&self, date_key: &str, value_key: &str, value_default: &str) -> Result<CsvLayout> {
        let s = self.section("data");
        let delim = s.raw("delimiter").unwrap_or(",");
        let delimiter = match delim {
            "tab" | "\\t" => b'\t',
            "semicolon" => b';',
            d if d.len() == 1 => d.as_bytes()[0],
            d => bail!("[data] delimiter = `{d}`: expected a single character, tab or semicolon"),
        };
        Ok(CsvLayout::new(s.raw(date_key).unwrap_or("date"), s.raw(value_key).unwrap_or(value_default))
            .with_delimiter(delimiter))
    }

    pub fn price_layout(&self) -> Result<CsvLayout> {
        self.layout("price_date_column", "price_column", "close")
    }

    pub fn proxy_layout(&self) -> Result<CsvLayout> {
        self.layout("proxy_date_column", "proxy_column", "vol")
    }

    pub fn split_date(&self) -> Result<NaiveDate> {
        let raw = self.section("data").require("split_date")?;
        NaiveDate::parse_from_str(raw, DATE_FORMAT).map_err(|e| anyhow!("[data] split_date = `{raw}`: {e}"))
    }

    pub fn return_kind(&self) -> Result<ReturnKind> {
        Ok(self.section("data").raw("returns").map(ReturnKind::parse).transpose()?.unwrap_or_default())
    }

    pub fn dataset_label(&self) -> String {
        self.section("data").raw("label").unwrap_or("data").to_string()
    }

    pub fn truncation(&self) -> Result<Truncation> {
        match self.section("features").raw("truncation") {
            None => Ok(Truncation::FullHistory),
            Some(v) if v.eq_ignore_ascii_case("full") || v.eq_ignore_ascii_case("full_history") => {
                Ok(Truncation::FullHistory)
            }
            Some(v) => Ok(Truncation::CutoffDays(parse("features", "truncation", v)?)),
        }
    }

    pub fn feature_method(&self) -> Result<FeatureMethod> {
        match self.section("features").raw("method").map(str::to_ascii_lowercase).as_deref() {
            None | Some("auto") => Ok(FeatureMethod::Auto),
            Some("direct") => Ok(FeatureMethod::Direct),
            Some("recursive") => Ok(FeatureMethod::Recursive),
            Some(other) => bail!("[features] method = `{other}`: expected auto, direct or recursive"),
        }
    }

    pub fn choices(&self) -> Result<Vec<KernelChoice>> {
        let list = self.section("calib").list("choices");
        if list.is_empty() {
            bail!("[calib] choices is empty (expected e.g. exp/exp, exp/tspl)");
        }
        list.iter().map(|c| Ok(KernelChoice::parse(c)?)).collect()
    }

    pub fn calib_seed(&self, flag: Option<u64>) -> Result<u64> {
        Ok(flag.unwrap_or(self.section("calib").int_or("seed", 0u64)?))
    }

    pub fn calibration_spec(&self, choice: KernelChoice) -> Result<CalibrationSpec<f64>> {
        let s = self.section("calib");
        let mut spec = CalibrationSpec::new(choice);
        let ridge_key = format!("ridge.{}", choice.as_str().replace('/', "_"));
        spec.ridge = match s.real(&ridge_key)? {
            Some(v) => v,
            None => s.real_or("ridge", spec.ridge)?,
        };
        let defaults = BetaBounds::<f64>::default();
        spec.bounds = BetaBounds {
            lower: [
                s.real_or("beta0_min", defaults.lower[0])?,
                s.real_or("beta1_min", f64::NEG_INFINITY)?,
                s.real_or("beta2_min", defaults.lower[2])?,
            ],
            upper: [
                s.real_or("beta0_max", f64::INFINITY)?,
                s.real_or("beta1_max", defaults.upper[1])?,
                s.real_or("beta2_max", f64::INFINITY)?,
            ],
        };
        spec.penalize_intercept = s.flag_or("penalize_intercept", true)?;
        spec.multistarts = s.int_or("multistarts", spec.multistarts)?;
        let o = &mut spec.optimizer;
        o.max_iterations = s.int_or("max_iterations", o.max_iterations)?;
        o.max_evaluations = s.int_or("max_evaluations", o.max_evaluations)?;
        o.x_tol = s.real_or("x_tol", o.x_tol)?;
        o.f_tol = s.real_or("f_tol", o.f_tol)?;
        o.initial_step = s.real_or("initial_step", o.initial_step)?;
        spec.truncation = self.truncation()?;
        spec.horizon = s.real_or("horizon", 1.0)?;
        let init_key = format!("initial.{}", choice.as_str().replace('/', "_"));
        let init = s.list(&init_key);
        if !init.is_empty() {
            spec.initial = Some(init.iter().map(|v| parse_real("calib", &init_key, v)).collect::<Result<_>>()?);
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// `time,r1,r2` rows with times increasing to 0.
fn read_history(path: &Path, unbounded: bool) -> Result<HistorySegment<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading history {}", path.display()))?;
    let (mut t, mut r1, mut r2) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        let field = |j: usize| -> Result<f64> {
            let v = rec.get(j).ok_or_else(|| anyhow!("{}: line {}: expected time,r1,r2", path.display(), i + 2))?;
            v.parse().map_err(|e| anyhow!("{}: line {}: `{v}`: {e}", path.display(), i + 2))
        };
        t.push(field(0)?);
        r1.push(field(1)?);
        r2.push(field(2)?);
    }
    HistorySegment::new(t, r1, r2, unbounded).with_context(|| format!("history {}", path.display()))
}
