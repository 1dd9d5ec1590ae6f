use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use pdvol::assumptions::{full_report, Verdict};
use pdvol::calibration::{calibrate_prepared, render_report, CalibrationData, CalibrationResult};
use pdvol::features::{compute_features, load_prices, load_series, MarketDataset};
use pdvol::sim::{write_path, Simulator};

use crate::config::RunConfig;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
}

pub struct Outcome {
    pub code: i32,
    pub out_dir: PathBuf,
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn check(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let (params, history) = cfg.model()?;
    let horizon = cfg.horizon()?;
    let out_dir = cfg.out_dir(o.out.as_deref());
    prepare_out(&out_dir)?;
    let report = full_report(&params, &history, horizon)?;
    write_text(&out_dir.join("assumptions.txt"), &report.render_table())?;
    write_text(&out_dir.join("assumptions.kv"), &report.to_kv())?;
    print!("{}", report.render_table());
    Ok(Outcome { code: report.verdict.exit_code(), out_dir })
}

pub fn simulate(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let (params, history) = cfg.model()?;
    let sim_cfg = cfg.sim(o.seed, o.force)?;
    let out_dir = cfg.out_dir(o.out.as_deref());
    prepare_out(&out_dir)?;

    let report = full_report(&params, &history, sim_cfg.horizon)?;
    write_text(&out_dir.join("assumptions.kv"), &report.to_kv())?;
    if report.verdict == Verdict::Neither && !sim_cfg.force {
        eprintln!("assumption gate: verdict NEITHER; nothing simulated (use --force to override)");
        return Ok(Outcome { code: Verdict::Neither.exit_code(), out_dir });
    }

    let sim = Simulator::new(&params, &history, &sim_cfg)?;
    for i in 0..cfg.dump_paths()?.min(sim_cfg.n_paths) {
        let file = out_dir.join(format!("path_{i:04}.csv"));
        match sim.simulate(i as u64) {
            Ok(path) => {
                let mut w =
                    BufWriter::new(File::create(&file).with_context(|| format!("creating {}", file.display()))?);
                write_path(&path, &mut w)?;
                w.flush()?;
            }
            Err(e) => eprintln!("path {i}: {e}"),
        }
    }
    let summary = sim.ensemble();
    write_text(&out_dir.join("summary.kv"), &summary.to_kv())?;
    write_text(&out_dir.join("quantiles.csv"), &summary.quantile_table())?;
    println!("verdict: {}", report.verdict);
    println!(
        "violations: {} at {} of {} checked points (tol {:e})",
        summary.violations, summary.violating_paths, summary.checked_points, summary.violation_tol
    );
    println!("r2 floor events: {} on {} paths", summary.floor_events, summary.floored_paths);
    println!("aborted paths: {}", summary.n_aborted);
    if let Some(last) = summary.s.last() {
        println!("mean S at t={}: {} (se {})", last.time, last.mean, last.std_error);
    }
    Ok(Outcome { code: 0, out_dir })
}

pub fn features(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let prices = load_prices::<f64>(&cfg.input_file("data", "prices")?, &cfg.price_layout()?)?;
    for w in &prices.0.warnings {
        eprintln!("warning: {w}");
    }
    let delta = cfg.section("model").real_or("delta", 0.0)?;
    let k1 = cfg.kernel("k1", delta)?;
    let k2 = cfg.kernel("k2", delta)?;
    let returns = prices.returns(cfg.return_kind()?);
    let f = compute_features(&returns, &k1, &k2, cfg.truncation()?, cfg.feature_method()?)?;
    let out_dir = cfg.out_dir(o.out.as_deref());
    prepare_out(&out_dir)?;
    let file = out_dir.join("features.csv");
    let mut w = BufWriter::new(File::create(&file).with_context(|| format!("creating {}", file.display()))?);
    f.write(&mut w)?;
    w.flush()?;
    println!("wrote {} feature rows to {}", f.len(), file.display());
    Ok(Outcome { code: 0, out_dir })
}

fn load_dataset(cfg: &RunConfig) -> Result<MarketDataset<f64>> {
    let prices = load_prices::<f64>(&cfg.input_file("data", "prices")?, &cfg.price_layout()?)?;
    let proxy = load_series::<f64>(&cfg.input_file("data", "proxy")?, &cfg.proxy_layout()?)?;
    for w in prices.0.warnings.iter().chain(&proxy.warnings) {
        eprintln!("warning: {w}");
    }
    let mut ds = MarketDataset::new(prices, proxy, cfg.split_date()?)?;
    ds.return_kind = cfg.return_kind()?;
    Ok(ds)
}

fn result_file(out_dir: &Path, r: &CalibrationResult<f64>) -> PathBuf {
    out_dir.join(format!("calibration_{}.kv", r.choice.as_str().replace('/', "_")))
}

fn write_comparison(out_dir: &Path, results: &[CalibrationResult<f64>]) -> Result<()> {
    let table = render_report(results);
    write_text(&out_dir.join("comparison.txt"), &table.text)?;
    write_text(&out_dir.join("comparison.csv"), &table.csv)?;
    print!("{}", table.text);
    Ok(())
}

pub fn calibrate_cmd(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let data = CalibrationData::new(&load_dataset(cfg)?)?;
    let label = cfg.dataset_label();
    let seed = cfg.calib_seed(o.seed)?;
    let out_dir = cfg.out_dir(o.out.as_deref());
    prepare_out(&out_dir)?;
    let mut results = Vec::new();
    for choice in cfg.choices()? {
        let spec = cfg.calibration_spec(choice)?;
        let r = calibrate_prepared(&data, &spec, seed, &label)
            .with_context(|| format!("calibrating {}", choice.as_str()))?;
        write_text(&result_file(&out_dir, &r), &r.to_kv())?;
        results.push(r);
    }
    write_comparison(&out_dir, &results)?;
    Ok(Outcome { code: 0, out_dir })
}

pub fn report(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let out_dir = cfg.out_dir(o.out.as_deref());
    let listed = cfg.section("report").list("results");
    let files: Vec<PathBuf> = if listed.is_empty() {
        let mut found: Vec<PathBuf> = fs::read_dir(&out_dir)
            .with_context(|| format!("listing {}", out_dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("calibration_") && n.ends_with(".kv"))
            })
            .collect();
        found.sort();
        found
    } else {
        listed.iter().map(|p| cfg.resolve(p)).collect()
    };
    if files.is_empty() {
        bail!("no calibration results found in {} (run calibrate or set [report] results)", out_dir.display());
    }
    let mut results = Vec::with_capacity(files.len());
    for f in &files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        results.push(CalibrationResult::<f64>::from_kv(&text).with_context(|| format!("parsing {}", f.display()))?);
    }
    prepare_out(&out_dir)?;
    write_comparison(&out_dir, &results)?;
    Ok(Outcome { code: 0, out_dir })
}
